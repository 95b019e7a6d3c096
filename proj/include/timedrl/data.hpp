#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "timedrl/rng.hpp"
#include "timedrl/tensor.hpp"

namespace timedrl {

// Row-major real matrix; rows are timesteps, columns channels.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> v);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

// A multivariate series. Forecasting data is one continuous series
// (instance_length == 0); classification data is a stack of fixed-length
// instances of instance_length rows each, with one label per instance.
struct TimeSeriesDataset {
  Matrix values;
  std::optional<std::vector<int>> labels;
  std::vector<std::string> feature_names;
  std::string frequency_note;
  std::size_t instance_length = 0;

  std::size_t channels() const { return values.cols; }
  std::size_t instance_count() const;
  Matrix instance(std::size_t i) const;
};

struct CsvSchema {
  bool has_header = true;
  // Column name (needs a header) or zero-based index.
  std::optional<std::string> timestamp_column;
  std::optional<std::string> label_column;
};

TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
TimeSeriesDataset parse_csv(std::istream& in, const CsvSchema& schema);
void write_csv(const std::filesystem::path& path, const TimeSeriesDataset& dataset);

// Groups per-row labelled data into instances of `length` consecutive rows.
// Every row of an instance must carry the same label.
TimeSeriesDataset group_instances(const TimeSeriesDataset& rows, std::size_t length);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct DatasetSplit {
  TimeSeriesDataset train, val, test;
  // Source row offsets (forecasting) or instance ids (classification).
  std::vector<std::size_t> train_index, val_index, test_index;

  std::uint64_t fingerprint() const;
};

// Forecasting: contiguous chronological segments. Classification: seeded
// instance shuffle, stratified when every class has at least 3 instances.
DatasetSplit split_train_val_test(const TimeSeriesDataset& dataset, SplitRatios ratios = {},
                                  std::uint64_t seed = 0);

struct WindowSample {
  Matrix x;                  // [T x C]
  Matrix y_forecast;         // [H x C]; empty for classification
  std::optional<int> y_class;
  bool label_available = true;
  std::size_t source_start = 0;  // first row of x in its segment
  std::size_t target_start = 0;  // first row of y_forecast
};

// Sliding windows over a forecasting segment: floor((len - T - H)/stride) + 1
// samples. Classification datasets map one instance to one sample and
// ignore H and stride.
std::vector<WindowSample> make_windows(const TimeSeriesDataset& dataset, std::size_t window, std::size_t horizon,
                                       std::size_t window_stride = 1);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;  // population std, clamped below at eps
};

struct Normalized {
  Matrix x;
  NormStats stats;
};

// Per channel over time: (x - mean) / max(std, eps).
Normalized instance_normalize(const Matrix& x, double eps = Epsilons::instance_norm);
// pred * std + mean per channel.
Matrix denormalize(const Matrix& pred, const NormStats& stats);

struct PatchConfig {
  std::size_t length = 8;  // P
  std::size_t stride = 8;  // S

  void validate(std::size_t window) const;
};

// floor((T - P)/S) + 2 under end-replication padding.
std::size_t patch_count(std::size_t window, const PatchConfig& cfg);

// Replicates the last row S times, then cuts windows of P rows at stride S.
// A patch flattens channel-major: token[c * P + p] = x[start + p][c].
Matrix patch(const Matrix& x_norm, const PatchConfig& cfg);

// Dense [d0, d1, d2] block of doubles used for sample batches.
struct Block3 {
  std::size_t d0 = 0, d1 = 0, d2 = 0;
  std::vector<double> values;

  bool operator==(const Block3&) const = default;
};

// [B, T, C] -> [B*C, T, 1]; pseudo-sample b*C + c holds channel c of sample b.
Block3 channel_independence_forward(const Block3& batch);
Block3 channel_independence_inverse(const Block3& flat, std::size_t channels);

enum class AugmentMethod { None, Jitter, Scaling, Rotation, Permutation, Masking, Cropping };

AugmentMethod parse_augment_method(const std::string& name);
std::string to_string(AugmentMethod method);

struct AugmentParams {
  double jitter_sigma = 0.1;
  double scale_low = 0.8;
  double scale_high = 1.2;
  std::size_t segments = 4;
  double mask_ratio = 0.1;
  double crop_ratio = 0.2;

  void validate() const;
};

// All methods keep the input shape.
Matrix augment(const Matrix& x, AugmentMethod method, const AugmentParams& params, RngStream& rng);

// Flags exactly ceil(fraction * N) samples as labelled, uniformly at random.
// With class labels and enough budget, every class keeps one labelled sample.
std::vector<WindowSample> label_subsample(std::vector<WindowSample> samples, double fraction, std::uint64_t seed);

}  // namespace timedrl
