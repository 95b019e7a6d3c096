#include "timedrl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

namespace timedrl {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> v) : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols)
    fail(ErrorCode::ShapeMismatch, "matrix " + std::to_string(r) + "x" + std::to_string(c) + " given " +
                                       std::to_string(values.size()) + " values");
}

std::size_t TimeSeriesDataset::instance_count() const {
  if (instance_length == 0) return values.rows > 0 ? 1 : 0;
  return values.rows / instance_length;
}

Matrix TimeSeriesDataset::instance(std::size_t i) const {
  const std::size_t len = instance_length == 0 ? values.rows : instance_length;
  Matrix m(len, values.cols);
  std::copy_n(values.values.begin() + static_cast<std::ptrdiff_t>(i * len * values.cols), len * values.cols,
              m.values.begin());
  return m;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  // Tolerate a UTF-8 byte order mark on the first field.
  if (!out.empty() && out[0].rfind("\xEF\xBB\xBF", 0) == 0) out[0] = out[0].substr(3);
  return out;
}

std::optional<double> parse_real(const std::string& cell) {
  double v = 0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || cell.empty()) return std::nullopt;
  return v;
}

std::optional<std::size_t> resolve_column(const std::optional<std::string>& spec,
                                          const std::vector<std::string>& header, std::size_t width) {
  if (!spec) return std::nullopt;
  const auto it = std::find(header.begin(), header.end(), *spec);
  if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
  std::size_t idx = 0;
  auto [ptr, ec] = std::from_chars(spec->data(), spec->data() + spec->size(), idx);
  if (ec == std::errc() && ptr == spec->data() + spec->size() && idx < width) return idx;
  fail(ErrorCode::ParseError, "column '" + *spec + "' not found in header");
}

}  // namespace

TimeSeriesDataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::vector<std::string> header;
  std::size_t row_number = 0;  // 1-based line number in the file
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (schema.has_header && header.empty()) {
      header = std::move(fields);
      continue;
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) fail(ErrorCode::EmptyDataset, "no data rows");
  const std::size_t width = header.empty() ? rows.front().size() : header.size();
  const auto ts_col = resolve_column(schema.timestamp_column, header, width);
  const auto label_col = resolve_column(schema.label_column, header, width);

  std::vector<std::size_t> value_cols;
  for (std::size_t c = 0; c < width; ++c)
    if (c != ts_col && c != label_col) value_cols.push_back(c);
  if (value_cols.empty()) fail(ErrorCode::EmptyDataset, "no value columns");

  TimeSeriesDataset ds;
  ds.values = Matrix(rows.size(), value_cols.size());
  for (std::size_t j = 0; j < value_cols.size(); ++j)
    ds.feature_names.push_back(header.empty() ? "c" + std::to_string(value_cols[j]) : header[value_cols[j]]);

  std::vector<std::string> raw_labels;
  const std::size_t first_data_line = schema.has_header ? 2 : 1;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& fields = rows[r];
    const std::size_t line_no = first_data_line + r;
    if (fields.size() != width)
      fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                                      " columns, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < value_cols.size(); ++j) {
      const std::string& cell = fields[value_cols[j]];
      const auto v = parse_real(cell);
      if (!v)
        fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ", column " + std::to_string(value_cols[j]) +
                                        " (" + ds.feature_names[j] + "): '" + cell + "' is not a number");
      if (!std::isfinite(*v))
        fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ", column " + std::to_string(value_cols[j]) +
                                        ": non-finite value rejected");
      ds.values(r, j) = *v;
    }
    if (label_col) raw_labels.push_back(fields[*label_col]);
  }

  if (label_col) {
    std::vector<int> labels;
    bool all_int = true;
    for (const auto& s : raw_labels) {
      int v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) {
        all_int = false;
        break;
      }
      labels.push_back(v);
    }
    if (!all_int) {
      // Symbolic labels map to ids in sorted order.
      std::map<std::string, int> ids;
      for (const auto& s : raw_labels) ids.emplace(s, 0);
      int next = 0;
      for (auto& [name, id] : ids) id = next++;
      labels.clear();
      for (const auto& s : raw_labels) labels.push_back(ids.at(s));
    }
    ds.labels = std::move(labels);
    ds.instance_length = 1;
  }
  return ds;
}

TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  auto ds = parse_csv(in, schema);
  ds.frequency_note = path.filename().string();
  return ds;
}

void write_csv(const std::filesystem::path& path, const TimeSeriesDataset& dataset) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t c = 0; c < dataset.values.cols; ++c)
    out << (c ? "," : "") << (c < dataset.feature_names.size() ? dataset.feature_names[c] : "c" + std::to_string(c));
  if (dataset.labels) out << ",label";
  out << '\n';
  const std::size_t per_label = dataset.instance_length == 0 ? 1 : dataset.instance_length;
  for (std::size_t r = 0; r < dataset.values.rows; ++r) {
    for (std::size_t c = 0; c < dataset.values.cols; ++c) out << (c ? "," : "") << dataset.values(r, c);
    if (dataset.labels) out << ',' << (*dataset.labels)[r / per_label];
    out << '\n';
  }
}

TimeSeriesDataset group_instances(const TimeSeriesDataset& rows, std::size_t length) {
  if (length == 0) fail(ErrorCode::InvalidParam, "instance length must be positive");
  if (rows.values.rows % length != 0)
    fail(ErrorCode::ParseError, std::to_string(rows.values.rows) + " rows do not divide into instances of " +
                                    std::to_string(length));
  TimeSeriesDataset out = rows;
  out.instance_length = length;
  if (rows.labels) {
    std::vector<int> labels;
    const auto& src = *rows.labels;
    for (std::size_t i = 0; i < rows.values.rows / length; ++i) {
      const int lbl = src[i * length];
      for (std::size_t r = 1; r < length; ++r)
        if (src[i * length + r] != lbl)
          fail(ErrorCode::ParseError, "row " + std::to_string(i * length + r) + ": label changes inside instance " +
                                          std::to_string(i));
      labels.push_back(lbl);
    }
    out.labels = std::move(labels);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting and windows

namespace {

TimeSeriesDataset take_rows(const TimeSeriesDataset& ds, std::size_t begin, std::size_t end) {
  TimeSeriesDataset out;
  out.feature_names = ds.feature_names;
  out.frequency_note = ds.frequency_note;
  out.values = Matrix(end - begin, ds.values.cols);
  std::copy(ds.values.values.begin() + static_cast<std::ptrdiff_t>(begin * ds.values.cols),
            ds.values.values.begin() + static_cast<std::ptrdiff_t>(end * ds.values.cols), out.values.values.begin());
  return out;
}

TimeSeriesDataset take_instances(const TimeSeriesDataset& ds, const std::vector<std::size_t>& ids) {
  TimeSeriesDataset out;
  out.feature_names = ds.feature_names;
  out.frequency_note = ds.frequency_note;
  out.instance_length = ds.instance_length;
  const std::size_t len = ds.instance_length;
  out.values = Matrix(ids.size() * len, ds.values.cols);
  std::vector<int> labels;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(ds.values.values.begin() + static_cast<std::ptrdiff_t>(ids[i] * len * ds.values.cols),
                len * ds.values.cols,
                out.values.values.begin() + static_cast<std::ptrdiff_t>(i * len * ds.values.cols));
    if (ds.labels) labels.push_back((*ds.labels)[ids[i]]);
  }
  if (ds.labels) out.labels = std::move(labels);
  return out;
}

template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Cut points for n items: [0, a) train, [a, b) val, [b, n) test.
std::pair<std::size_t, std::size_t> cut_points(std::size_t n, const SplitRatios& r) {
  const auto a = static_cast<std::size_t>(std::floor(static_cast<double>(n) * r.train + 1e-9));
  const auto b = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (r.train + r.val) + 1e-9));
  return {a, std::min(b, n)};
}

}  // namespace

std::uint64_t DatasetSplit::fingerprint() const {
  std::uint64_t h = 0x51ED2701ULL;
  auto mix = [&h](const std::vector<std::size_t>& idx, std::uint64_t tag) {
    h = splitmix64(h ^ tag);
    for (std::size_t i : idx) h = splitmix64(h ^ i);
  };
  mix(train_index, 1);
  mix(val_index, 2);
  mix(test_index, 3);
  return h;
}

DatasetSplit split_train_val_test(const TimeSeriesDataset& dataset, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0) ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    fail(ErrorCode::InvalidParam, "split ratios must be positive and sum to 1");
  DatasetSplit split;
  if (dataset.instance_length == 0) {
    const std::size_t n = dataset.values.rows;
    const auto [a, b] = cut_points(n, ratios);
    if (a == 0 || b == a || n == b)
      fail(ErrorCode::TooSmall, std::to_string(n) + " timesteps leave an empty split segment");
    split.train = take_rows(dataset, 0, a);
    split.val = take_rows(dataset, a, b);
    split.test = take_rows(dataset, b, n);
    for (std::size_t i = 0; i < n; ++i) (i < a ? split.train_index : i < b ? split.val_index : split.test_index).push_back(i);
    return split;
  }

  const std::size_t n = dataset.instance_count();
  RngStream rng = RngStream(seed).derive("split");
  std::map<int, std::vector<std::size_t>> by_class;
  bool stratify = dataset.labels.has_value();
  if (stratify) {
    for (std::size_t i = 0; i < n; ++i) by_class[(*dataset.labels)[i]].push_back(i);
    for (const auto& [cls, ids] : by_class)
      if (ids.size() < 3) stratify = false;
  }
  if (stratify) {
    for (auto& [cls, ids] : by_class) {
      shuffle(ids, rng);
      const auto [a, b] = cut_points(ids.size(), ratios);
      for (std::size_t i = 0; i < ids.size(); ++i)
        (i < a ? split.train_index : i < b ? split.val_index : split.test_index).push_back(ids[i]);
    }
    shuffle(split.train_index, rng);
    shuffle(split.val_index, rng);
    shuffle(split.test_index, rng);
  } else {
    std::vector<std::size_t> ids(n);
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    shuffle(ids, rng);
    const auto [a, b] = cut_points(n, ratios);
    for (std::size_t i = 0; i < n; ++i)
      (i < a ? split.train_index : i < b ? split.val_index : split.test_index).push_back(ids[i]);
  }
  if (split.train_index.empty() || split.val_index.empty() || split.test_index.empty())
    fail(ErrorCode::TooSmall, std::to_string(n) + " instances leave an empty split segment");
  split.train = take_instances(dataset, split.train_index);
  split.val = take_instances(dataset, split.val_index);
  split.test = take_instances(dataset, split.test_index);
  return split;
}

std::vector<WindowSample> make_windows(const TimeSeriesDataset& dataset, std::size_t window, std::size_t horizon,
                                       std::size_t window_stride) {
  std::vector<WindowSample> out;
  if (dataset.instance_length > 0) {
    for (std::size_t i = 0; i < dataset.instance_count(); ++i) {
      WindowSample s;
      s.x = dataset.instance(i);
      if (dataset.labels) s.y_class = (*dataset.labels)[i];
      out.push_back(std::move(s));
    }
    return out;
  }
  if (window == 0 || window_stride == 0) fail(ErrorCode::InvalidParam, "window length and stride must be positive");
  const std::size_t len = dataset.values.rows;
  if (window + horizon > len)
    fail(ErrorCode::TooShort, "segment of " + std::to_string(len) + " rows cannot hold T=" + std::to_string(window) +
                                  " plus H=" + std::to_string(horizon));
  const std::size_t count = (len - window - horizon) / window_stride + 1;
  const std::size_t c = dataset.values.cols;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t s0 = w * window_stride;
    WindowSample s;
    s.source_start = s0;
    s.target_start = s0 + window;
    s.x = Matrix(window, c);
    std::copy_n(dataset.values.values.begin() + static_cast<std::ptrdiff_t>(s0 * c), window * c, s.x.values.begin());
    s.y_forecast = Matrix(horizon, c);
    std::copy_n(dataset.values.values.begin() + static_cast<std::ptrdiff_t>((s0 + window) * c), horizon * c,
                s.y_forecast.values.begin());
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization and patching

Normalized instance_normalize(const Matrix& x, double eps) {
  if (x.rows == 0) fail(ErrorCode::InvalidParam, "instance_normalize needs at least one timestep");
  Normalized out{Matrix(x.rows, x.cols), NormStats{std::vector<double>(x.cols), std::vector<double>(x.cols)}};
  for (std::size_t c = 0; c < x.cols; ++c) {
    double m = 0;
    for (std::size_t t = 0; t < x.rows; ++t) m += x(t, c);
    m /= static_cast<double>(x.rows);
    double v = 0;
    for (std::size_t t = 0; t < x.rows; ++t) v += (x(t, c) - m) * (x(t, c) - m);
    v /= static_cast<double>(x.rows);
    const double sd = std::max(std::sqrt(v), eps);
    out.stats.mean[c] = m;
    out.stats.std[c] = sd;
    for (std::size_t t = 0; t < x.rows; ++t) out.x(t, c) = (x(t, c) - m) / sd;
  }
  return out;
}

Matrix denormalize(const Matrix& pred, const NormStats& stats) {
  if (stats.mean.size() != pred.cols || stats.std.size() != pred.cols)
    fail(ErrorCode::StatsMismatch, "stats for " + std::to_string(stats.mean.size()) + " channels applied to " +
                                       std::to_string(pred.cols));
  Matrix out(pred.rows, pred.cols);
  for (std::size_t t = 0; t < pred.rows; ++t)
    for (std::size_t c = 0; c < pred.cols; ++c) out(t, c) = pred(t, c) * stats.std[c] + stats.mean[c];
  return out;
}

void PatchConfig::validate(std::size_t window) const {
  if (!(stride >= 1 && stride <= length && length <= window))
    fail(ErrorCode::ConfigInvalid, "patch geometry needs 1 <= S <= P <= T; got P=" + std::to_string(length) +
                                       " S=" + std::to_string(stride) + " T=" + std::to_string(window));
}

std::size_t patch_count(std::size_t window, const PatchConfig& cfg) {
  cfg.validate(window);
  return (window - cfg.length) / cfg.stride + 2;
}

Matrix patch(const Matrix& x_norm, const PatchConfig& cfg) {
  const std::size_t tp = patch_count(x_norm.rows, cfg);
  const std::size_t c = x_norm.cols, p = cfg.length;
  Matrix out(tp, c * p);
  const std::size_t last = x_norm.rows - 1;
  for (std::size_t k = 0; k < tp; ++k) {
    const std::size_t start = k * cfg.stride;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < p; ++j) out(k, ch * p + j) = x_norm(std::min(start + j, last), ch);
  }
  return out;
}

Block3 channel_independence_forward(const Block3& batch) {
  Block3 out{batch.d0 * batch.d2, batch.d1, 1, std::vector<double>(batch.values.size())};
  for (std::size_t b = 0; b < batch.d0; ++b)
    for (std::size_t t = 0; t < batch.d1; ++t)
      for (std::size_t c = 0; c < batch.d2; ++c)
        out.values[(b * batch.d2 + c) * batch.d1 + t] = batch.values[(b * batch.d1 + t) * batch.d2 + c];
  return out;
}

Block3 channel_independence_inverse(const Block3& flat, std::size_t channels) {
  if (channels == 0 || flat.d0 % channels != 0 || flat.d2 != 1)
    fail(ErrorCode::ShapeMismatch, "channel-independent block does not regroup into " + std::to_string(channels) +
                                       " channels");
  Block3 out{flat.d0 / channels, flat.d1, channels, std::vector<double>(flat.values.size())};
  for (std::size_t b = 0; b < out.d0; ++b)
    for (std::size_t t = 0; t < out.d1; ++t)
      for (std::size_t c = 0; c < channels; ++c)
        out.values[(b * out.d1 + t) * channels + c] = flat.values[(b * channels + c) * flat.d1 + t];
  return out;
}

// ---------------------------------------------------------------------------
// Augmentations

AugmentMethod parse_augment_method(const std::string& name) {
  if (name == "none") return AugmentMethod::None;
  if (name == "jitter") return AugmentMethod::Jitter;
  if (name == "scaling") return AugmentMethod::Scaling;
  if (name == "rotation") return AugmentMethod::Rotation;
  if (name == "permutation") return AugmentMethod::Permutation;
  if (name == "masking") return AugmentMethod::Masking;
  if (name == "cropping") return AugmentMethod::Cropping;
  fail(ErrorCode::UnknownMethod, "unknown augmentation '" + name + "'");
}

std::string to_string(AugmentMethod method) {
  switch (method) {
    case AugmentMethod::None: return "none";
    case AugmentMethod::Jitter: return "jitter";
    case AugmentMethod::Scaling: return "scaling";
    case AugmentMethod::Rotation: return "rotation";
    case AugmentMethod::Permutation: return "permutation";
    case AugmentMethod::Masking: return "masking";
    case AugmentMethod::Cropping: return "cropping";
  }
  return "none";
}

void AugmentParams::validate() const {
  if (!(jitter_sigma >= 0)) fail(ErrorCode::InvalidParam, "jitter sigma must be >= 0");
  if (!(scale_low <= scale_high)) fail(ErrorCode::InvalidParam, "scaling range is empty");
  if (segments == 0) fail(ErrorCode::InvalidParam, "permutation needs at least one segment");
  if (!(mask_ratio >= 0 && mask_ratio <= 1)) fail(ErrorCode::InvalidParam, "mask ratio must lie in [0, 1]");
  if (!(crop_ratio >= 0 && crop_ratio < 1)) fail(ErrorCode::InvalidParam, "crop ratio must lie in [0, 1)");
}

Matrix augment(const Matrix& x, AugmentMethod method, const AugmentParams& params, RngStream& rng) {
  params.validate();
  Matrix out = x;
  switch (method) {
    case AugmentMethod::None:
      break;
    case AugmentMethod::Jitter:
      for (double& v : out.values) v += rng.normal(0.0, params.jitter_sigma);
      break;
    case AugmentMethod::Scaling: {
      const double s = rng.uniform(params.scale_low, params.scale_high);
      for (double& v : out.values) v *= s;
      break;
    }
    case AugmentMethod::Rotation: {
      std::vector<std::size_t> perm(x.cols);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      shuffle(perm, rng);
      std::vector<double> sign(x.cols);
      for (double& s : sign) s = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (std::size_t t = 0; t < x.rows; ++t)
        for (std::size_t c = 0; c < x.cols; ++c) out(t, c) = sign[c] * x(t, perm[c]);
      break;
    }
    case AugmentMethod::Permutation: {
      if (params.segments > x.rows)
        fail(ErrorCode::InvalidParam, std::to_string(params.segments) + " segments exceed " + std::to_string(x.rows) +
                                          " timesteps");
      const std::size_t k = params.segments;
      std::vector<std::size_t> bounds(k + 1);
      for (std::size_t i = 0; i <= k; ++i) bounds[i] = i * x.rows / k;
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(order, rng);
      std::size_t row = 0;
      for (std::size_t seg : order)
        for (std::size_t t = bounds[seg]; t < bounds[seg + 1]; ++t, ++row)
          for (std::size_t c = 0; c < x.cols; ++c) out(row, c) = x(t, c);
      break;
    }
    case AugmentMethod::Masking:
      for (double& v : out.values)
        if (rng.uniform() < params.mask_ratio) v = 0.0;
      break;
    case AugmentMethod::Cropping: {
      const auto k = static_cast<std::size_t>(std::floor(params.crop_ratio * static_cast<double>(x.rows) / 2.0));
      for (std::size_t t = 0; t < k; ++t)
        for (std::size_t c = 0; c < x.cols; ++c) {
          out(t, c) = 0.0;
          out(x.rows - 1 - t, c) = 0.0;
        }
      break;
    }
  }
  return out;
}

std::vector<WindowSample> label_subsample(std::vector<WindowSample> samples, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    fail(ErrorCode::InvalidFraction, "label fraction " + std::to_string(fraction) + " not in (0, 1]");
  const std::size_t n = samples.size();
  const auto budget =
      std::min(n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  RngStream rng = RngStream(seed).derive("subsample");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);

  std::vector<bool> chosen(n, false);
  std::size_t taken = 0;
  const bool labelled = n > 0 && std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.y_class.has_value(); });
  if (labelled) {
    std::map<int, std::size_t> first_of_class;
    for (std::size_t i : order) first_of_class.emplace(*samples[i].y_class, i);
    if (first_of_class.size() <= budget)
      for (const auto& [cls, i] : first_of_class) {
        chosen[i] = true;
        ++taken;
      }
  }
  for (std::size_t i : order) {
    if (taken >= budget) break;
    if (!chosen[i]) {
      chosen[i] = true;
      ++taken;
    }
  }
  for (std::size_t i = 0; i < n; ++i) samples[i].label_available = chosen[i];
  return samples;
}

}  // namespace timedrl
