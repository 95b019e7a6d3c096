#include "timedrl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace timedrl {

AblationAxis parse_ablation_axis(const std::string& name) {
  if (name == "augmentation") return AblationAxis::Augmentation;
  if (name == "pooling") return AblationAxis::Pooling;
  if (name == "stop_gradient") return AblationAxis::StopGradient;
  if (name == "lambda") return AblationAxis::Lambda;
  fail(ErrorCode::ConfigError, "ablation.axis: unknown axis '" + name + "'");
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::Augmentation: return "augmentation";
    case AblationAxis::Pooling: return "pooling";
    case AblationAxis::StopGradient: return "stop_gradient";
    case AblationAxis::Lambda: return "lambda";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& why) {
  fail(ErrorCode::ConfigError, key + ": invalid value '" + value + "' (" + why + ")");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "expected a non-negative integer");
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "expected a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "expected true or false");
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_real(v[i]);
  return s;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

// Member-pointer field helpers.
template <typename Select>
Field size_field(Select sel) {
  return {[sel](const RunConfig& c) { return std::to_string(sel(const_cast<RunConfig&>(c))); },
          [sel](RunConfig& c, const std::string& k, const std::string& v) { sel(c) = to_u64(k, v); }};
}
template <typename Select>
Field real_field(Select sel) {
  return {[sel](const RunConfig& c) { return fmt_real(sel(const_cast<RunConfig&>(c))); },
          [sel](RunConfig& c, const std::string& k, const std::string& v) { sel(c) = to_real(k, v); }};
}
template <typename Select>
Field bool_field(Select sel) {
  return {[sel](const RunConfig& c) { return std::string(sel(const_cast<RunConfig&>(c)) ? "true" : "false"); },
          [sel](RunConfig& c, const std::string& k, const std::string& v) { sel(c) = to_bool(k, v); }};
}
template <typename Select>
Field text_field(Select sel) {
  return {[sel](const RunConfig& c) { return sel(const_cast<RunConfig&>(c)); },
          [sel](RunConfig& c, const std::string&, const std::string& v) { sel(c) = v; }};
}

#define F(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> s = {
      {"run.task", {[](const RunConfig& c) { return to_string(c.task); },
                    [](RunConfig& c, const std::string&, const std::string& v) { c.task = parse_task_kind(v); }}},
      {"run.dataset_id", text_field(F(dataset_id))},
      {"run.seed", size_field(F(seed))},
      {"run.precision", {[](const RunConfig& c) { return c.precision; },
                         [](RunConfig& c, const std::string& k, const std::string& v) {
                           if (v != "f32" && v != "f64") bad_value(k, v, "expected f32 or f64");
                           c.precision = v;
                         }}},
      {"run.out", text_field(F(out))},

      {"data.source", {[](const RunConfig& c) { return c.data_source; },
                       [](RunConfig& c, const std::string& k, const std::string& v) {
                         if (v != "synthetic" && v != "csv") bad_value(k, v, "expected synthetic or csv");
                         c.data_source = v;
                       }}},
      {"data.path", text_field(F(data_path))},
      {"data.has_header", bool_field(F(data_has_header))},
      {"data.timestamp_column", text_field(F(data_timestamp_column))},
      {"data.label_column", text_field(F(data_label_column))},
      {"data.instance_length", size_field(F(data_instance_length))},
      {"data.train_ratio", real_field(F(split.train))},
      {"data.val_ratio", real_field(F(split.val))},
      {"data.test_ratio", real_field(F(split.test))},

      {"synthetic.generator",
       {[](const RunConfig& c) { return to_string(c.synthetic.generator); },
        [](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.synthetic.generator = parse_generator(v);
          } catch (const Error&) {
            bad_value(k, v, "expected sinusoid-mix, ar-process or class-frequency");
          }
        }}},
      {"synthetic.length", size_field(F(synthetic.length))},
      {"synthetic.channels", size_field(F(synthetic.channels))},
      {"synthetic.classes", size_field(F(synthetic.classes))},
      {"synthetic.instances", size_field(F(synthetic.instances))},
      {"synthetic.instance_length", size_field(F(synthetic.instance_length))},
      {"synthetic.noise", real_field(F(synthetic.noise))},
      {"synthetic.seed", size_field(F(synthetic.seed))},
      {"synthetic.ar_coefficient", real_field(F(synthetic.ar_coefficient))},
      {"synthetic.period", size_field(F(synthetic.period))},
      {"synthetic.seasonal_amplitude", real_field(F(synthetic.seasonal_amplitude))},

      {"window.length", size_field(F(window))},
      {"window.horizon", size_field(F(horizon))},
      {"window.stride", size_field(F(window_stride))},
      {"patch.length", size_field(F(encoder.patch_len))},
      {"patch.stride", size_field(F(encoder.patch_stride))},

      {"encoder.d_model", size_field(F(encoder.d_model))},
      {"encoder.blocks", size_field(F(encoder.blocks))},
      {"encoder.heads", size_field(F(encoder.heads))},
      {"encoder.d_ff", size_field(F(encoder.d_ff))},
      {"encoder.dropout_embed", real_field(F(encoder.dropout_embed))},
      {"encoder.dropout_attn", real_field(F(encoder.dropout_attn))},
      {"encoder.dropout_ff", real_field(F(encoder.dropout_ff))},
      {"encoder.channel_independence", bool_field(F(channel_independence))},
      {"encoder.pooling", {[](const RunConfig& c) { return to_string(c.pooling); },
                           [](RunConfig& c, const std::string& k, const std::string& v) {
                             try {
                               c.pooling = parse_pool_method(v);
                             } catch (const Error&) {
                               bad_value(k, v, "expected cls, last, gap or all");
                             }
                           }}},

      {"train.lr", real_field(F(train.adam.lr))},
      {"train.weight_decay", real_field(F(train.adam.weight_decay))},
      {"train.beta1", real_field(F(train.adam.beta1))},
      {"train.beta2", real_field(F(train.adam.beta2))},
      {"train.adam_eps", real_field(F(train.adam.eps))},
      {"train.batch_size", size_field(F(train.batch_size))},
      {"train.epochs", size_field(F(train.epochs))},
      {"train.lambda", real_field(F(train.lambda))},
      {"train.patience", size_field(F(train.patience))},
      {"train.grad_clip", real_field(F(train.grad_clip))},
      {"train.stop_gradient", bool_field(F(train.stop_gradient))},

      {"augment.method", {[](const RunConfig& c) { return to_string(c.train.augment); },
                          [](RunConfig& c, const std::string& k, const std::string& v) {
                            try {
                              c.train.augment = parse_augment_method(v);
                            } catch (const Error&) {
                              bad_value(k, v, "unknown augmentation");
                            }
                          }}},
      {"augment.jitter_sigma", real_field(F(train.augment_params.jitter_sigma))},
      {"augment.scale_low", real_field(F(train.augment_params.scale_low))},
      {"augment.scale_high", real_field(F(train.augment_params.scale_high))},
      {"augment.segments", size_field(F(train.augment_params.segments))},
      {"augment.mask_ratio", real_field(F(train.augment_params.mask_ratio))},
      {"augment.crop_ratio", real_field(F(train.augment_params.crop_ratio))},

      {"eval.classes", size_field(F(classes))},
      {"eval.probe_epochs", size_field(F(probe.epochs))},
      {"eval.probe_lr", real_field(F(probe.adam.lr))},
      {"eval.probe_batch_size", size_field(F(probe.batch_size))},
      {"eval.probe_patience", size_field(F(probe.patience))},
      {"eval.finetune_epochs", size_field(F(finetune.epochs))},
      {"eval.finetune_lr", real_field(F(finetune.adam.lr))},
      {"eval.finetune_batch_size", size_field(F(finetune.batch_size))},
      {"eval.finetune_patience", size_field(F(finetune.patience))},
      {"eval.label_fractions", {[](const RunConfig& c) { return fmt_list(c.label_fractions); },
                                [](RunConfig& c, const std::string& k, const std::string& v) {
                                  c.label_fractions.clear();
                                  for (const auto& item : split_list(v)) c.label_fractions.push_back(to_real(k, item));
                                }}},

      {"ablation.axis", {[](const RunConfig& c) {
                           std::string s;
                           for (std::size_t i = 0; i < c.ablation_axes.size(); ++i)
                             s += (i ? "," : "") + to_string(c.ablation_axes[i]);
                           return s;
                         },
                         [](RunConfig& c, const std::string&, const std::string& v) {
                           c.ablation_axes.clear();
                           for (const auto& item : split_list(v)) c.ablation_axes.push_back(parse_ablation_axis(item));
                         }}},
      {"ablation.lambda_grid", {[](const RunConfig& c) { return fmt_list(c.lambda_grid); },
                                [](RunConfig& c, const std::string& k, const std::string& v) {
                                  c.lambda_grid.clear();
                                  for (const auto& item : split_list(v)) c.lambda_grid.push_back(to_real(k, item));
                                }}},
  };
  return s;
}

#undef F

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, f] : schema()) out.push_back(k);
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = schema().find(key);
  if (it == schema().end()) fail(ErrorCode::ConfigError, key + ": unknown configuration key");
  it->second.set(*this, key, value);
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, f] : schema())
    if (k != "run.out") out += k + " = " + f.get(*this) + "\n";  // where results land is not part of the run
  return out;
}

std::uint64_t RunConfig::hash() const { return fnv1a64(canonical()); }

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) fail(ErrorCode::ConfigError, key + ": " + why);
  };
  check(train.adam.lr > 0, "train.lr", "must be > 0");
  check(train.adam.weight_decay >= 0, "train.weight_decay", "must be >= 0");
  check(train.adam.beta1 >= 0 && train.adam.beta1 < 1, "train.beta1", "must lie in [0, 1)");
  check(train.adam.beta2 >= 0 && train.adam.beta2 < 1, "train.beta2", "must lie in [0, 1)");
  check(train.adam.eps > 0, "train.adam_eps", "must be > 0");
  check(train.batch_size >= 2, "train.batch_size", "must be >= 2 for contrastive BatchNorm");
  check(train.epochs >= 1, "train.epochs", "must be >= 1");
  check(train.lambda >= 0, "train.lambda", "must be >= 0");
  check(window >= 1, "window.length", "must be >= 1");
  check(window_stride >= 1, "window.stride", "must be >= 1");
  check(task != TaskKind::Forecasting || horizon >= 1, "window.horizon", "must be >= 1 for forecasting");
  check(split.train > 0 && split.val >= 0 && split.test > 0 &&
            std::abs(split.train + split.val + split.test - 1.0) < 1e-9,
        "data.train_ratio", "split ratios must be positive and sum to 1");
  check(data_source != "csv" || !data_path.empty(), "data.path", "required when data.source = csv");
  check(probe.epochs >= 1 && probe.batch_size >= 1, "eval.probe_epochs", "probe epochs and batch size must be >= 1");
  check(finetune.epochs >= 1 && finetune.batch_size >= 1, "eval.finetune_epochs",
        "fine-tune epochs and batch size must be >= 1");
  for (double f : label_fractions) check(f > 0 && f <= 1, "eval.label_fractions", "fractions must lie in (0, 1]");
  for (double l : lambda_grid) check(l >= 0, "ablation.lambda_grid", "lambda values must be >= 0");
  try {
    train.augment_params.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, std::string("augment: ") + e.what());
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::ConfigError, "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (seen.count(key))
      fail(ErrorCode::ConfigError, key + ": repeated on line " + std::to_string(lineno) + " (first on line " +
                                       std::to_string(seen[key]) + ")");
    seen[key] = lineno;
    cfg.set(key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace timedrl
