#include "timedrl/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace timedrl {

namespace {

void put_uint(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}

  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::vector<std::uint8_t> bytes(std::uint64_t n) {
    need(n);
    std::vector<std::uint8_t> out(b_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  b_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) fail(ErrorCode::CorruptChecksum, "checkpoint record runs past end of file");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::size_t dtype_width(DType d) {
  switch (d) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U64: return 8;
    case DType::Text: return 1;
  }
  fail(ErrorCode::CorruptChecksum, "unknown dtype");
}

template <typename Word, typename T>
void encode_words(const std::vector<T>& values, std::vector<std::uint8_t>& out) {
  out.reserve(values.size() * sizeof(Word));
  for (T v : values) put_uint(out, std::bit_cast<Word>(v), sizeof(Word));
}

template <typename T, typename Word>
std::vector<T> decode_words(const std::vector<std::uint8_t>& payload) {
  std::vector<T> out(payload.size() / sizeof(Word));
  for (std::size_t i = 0; i < out.size(); ++i) {
    Word w = 0;
    for (std::size_t k = 0; k < sizeof(Word); ++k) w |= static_cast<Word>(payload[i * sizeof(Word) + k]) << (8 * k);
    out[i] = std::bit_cast<T>(w);
  }
  return out;
}

}  // namespace

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

template <typename Real>
void Checkpoint::put_tensor(const std::string& name, const std::vector<std::uint64_t>& shape,
                            const std::vector<Real>& values) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  require(n == values.size(), ErrorCode::ShapeMismatch, "checkpoint record " + name + " shape/value count mismatch");
  CheckpointRecord rec;
  rec.shape = shape;
  if constexpr (std::is_same_v<Real, float>) {
    rec.dtype = DType::F32;
    encode_words<std::uint32_t>(values, rec.payload);
  } else {
    rec.dtype = DType::F64;
    encode_words<std::uint64_t>(values, rec.payload);
  }
  records_[name] = std::move(rec);
}

void Checkpoint::put_u64(const std::string& name, const std::vector<std::uint64_t>& values) {
  CheckpointRecord rec;
  rec.dtype = DType::U64;
  rec.shape = {values.size()};
  encode_words<std::uint64_t>(values, rec.payload);
  records_[name] = std::move(rec);
}

void Checkpoint::put_text(const std::string& name, const std::string& text) {
  CheckpointRecord rec;
  rec.dtype = DType::Text;
  rec.shape = {text.size()};
  rec.payload.assign(text.begin(), text.end());
  records_[name] = std::move(rec);
}

const CheckpointRecord& Checkpoint::at(const std::string& name) const {
  auto it = records_.find(name);
  if (it == records_.end()) fail(ErrorCode::IoError, "checkpoint has no record " + name);
  return it->second;
}

template <typename Real>
std::vector<Real> Checkpoint::get_tensor(const std::string& name) const {
  const auto& rec = at(name);
  if (rec.dtype == DType::F32) {
    auto v = decode_words<float, std::uint32_t>(rec.payload);
    return std::vector<Real>(v.begin(), v.end());
  }
  if (rec.dtype == DType::F64) {
    auto v = decode_words<double, std::uint64_t>(rec.payload);
    return std::vector<Real>(v.begin(), v.end());
  }
  fail(ErrorCode::IoError, "checkpoint record " + name + " is not a float tensor");
}

std::vector<std::uint64_t> Checkpoint::get_u64(const std::string& name) const {
  const auto& rec = at(name);
  require(rec.dtype == DType::U64, ErrorCode::IoError, "checkpoint record " + name + " is not u64");
  return decode_words<std::uint64_t, std::uint64_t>(rec.payload);
}

std::string Checkpoint::get_text(const std::string& name) const {
  const auto& rec = at(name);
  require(rec.dtype == DType::Text, ErrorCode::IoError, "checkpoint record " + name + " is not text");
  return std::string(rec.payload.begin(), rec.payload.end());
}

const std::vector<std::uint64_t>& Checkpoint::shape(const std::string& name) const { return at(name).shape; }

std::vector<std::string> Checkpoint::names(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, rec] : records_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  }
  return out;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out = {'T', 'D', 'R', 'L'};
  put_uint(out, ckpt.format_version, 4);
  put_uint(out, ckpt.records().size(), 4);
  for (const auto& [name, rec] : ckpt.records()) {
    put_uint(out, name.size(), 4);
    out.insert(out.end(), name.begin(), name.end());
    out.push_back(static_cast<std::uint8_t>(rec.dtype));
    put_uint(out, rec.shape.size(), 4);
    for (auto d : rec.shape) put_uint(out, d, 8);
    put_uint(out, rec.payload.size(), 8);
    out.insert(out.end(), rec.payload.begin(), rec.payload.end());
  }
  put_uint(out, crc32_of(out.data(), out.size()), 4);
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) fail(ErrorCode::CorruptChecksum, "checkpoint truncated");
  if (std::memcmp(bytes.data(), "TDRL", 4) != 0) fail(ErrorCode::CorruptChecksum, "bad checkpoint magic");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  if (stored != crc32_of(bytes.data(), body)) fail(ErrorCode::CorruptChecksum, "checkpoint CRC-32 mismatch");

  Reader r(bytes, body);
  r.bytes(4);
  Checkpoint ckpt;
  ckpt.format_version = static_cast<std::uint32_t>(r.uint(4));
  if (ckpt.format_version > kCheckpointVersion) {
    fail(ErrorCode::VersionMismatch, "checkpoint format_version " + std::to_string(ckpt.format_version) +
                                         " is newer than supported " + std::to_string(kCheckpointVersion));
  }
  const auto count = r.uint(4);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name_bytes = r.bytes(r.uint(4));
    CheckpointRecord rec;
    rec.dtype = static_cast<DType>(r.uint(1));
    const auto width = dtype_width(rec.dtype);
    const auto rank = r.uint(4);
    std::uint64_t n = 1;
    for (std::uint64_t k = 0; k < rank; ++k) {
      rec.shape.push_back(r.uint(8));
      n *= rec.shape.back();
    }
    const auto payload = r.uint(8);
    if (payload != n * width) fail(ErrorCode::CorruptChecksum, "checkpoint payload size disagrees with shape");
    rec.payload = r.bytes(payload);
    ckpt.records()[std::string(name_bytes.begin(), name_bytes.end())] = std::move(rec);
  }
  if (!r.done()) fail(ErrorCode::CorruptChecksum, "trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

template void Checkpoint::put_tensor<float>(const std::string&, const std::vector<std::uint64_t>&,
                                            const std::vector<float>&);
template void Checkpoint::put_tensor<double>(const std::string&, const std::vector<std::uint64_t>&,
                                             const std::vector<double>&);
template std::vector<float> Checkpoint::get_tensor<float>(const std::string&) const;
template std::vector<double> Checkpoint::get_tensor<double>(const std::string&) const;

}  // namespace timedrl
