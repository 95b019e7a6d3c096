#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "timedrl/error.hpp"

namespace timedrl {

// File layout (all integers little-endian):
//   "TDRL" | u32 format_version | u32 record_count |
//   records sorted by name: u32 name_len, name, u8 dtype, u32 rank,
//     u64 dims[rank], u64 payload_bytes, payload |
//   u32 CRC-32 of every preceding byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { F32 = 1, F64 = 2, U64 = 3, Text = 4 };

struct CheckpointRecord {
  DType dtype = DType::F64;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> payload;
};

class Checkpoint {
 public:
  std::uint32_t format_version = kCheckpointVersion;

  template <typename Real>
  void put_tensor(const std::string& name, const std::vector<std::uint64_t>& shape, const std::vector<Real>& values);
  void put_u64(const std::string& name, const std::vector<std::uint64_t>& values);
  void put_text(const std::string& name, const std::string& text);

  // Converts from the stored float width when it differs from Real.
  template <typename Real>
  std::vector<Real> get_tensor(const std::string& name) const;
  std::vector<std::uint64_t> get_u64(const std::string& name) const;
  std::string get_text(const std::string& name) const;
  const std::vector<std::uint64_t>& shape(const std::string& name) const;

  bool has(const std::string& name) const { return records_.count(name) != 0; }
  std::vector<std::string> names(const std::string& prefix = "") const;
  const std::map<std::string, CheckpointRecord>& records() const { return records_; }
  std::map<std::string, CheckpointRecord>& records() { return records_; }

 private:
  const CheckpointRecord& at(const std::string& name) const;
  std::map<std::string, CheckpointRecord> records_;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size);

}  // namespace timedrl
