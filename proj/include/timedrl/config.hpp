#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "timedrl/data.hpp"
#include "timedrl/encoder.hpp"
#include "timedrl/evaluation.hpp"
#include "timedrl/synthetic.hpp"
#include "timedrl/trainer.hpp"

namespace timedrl {

enum class AblationAxis { Augmentation, Pooling, StopGradient, Lambda };

AblationAxis parse_ablation_axis(const std::string& name);
std::string to_string(AblationAxis axis);

// Resolved run configuration. Text form: one "key = value" per line with
// dotted section keys, '#' comments and comma-separated lists. Unknown or
// repeated keys are errors.
struct RunConfig {
  TaskKind task = TaskKind::Forecasting;
  std::string dataset_id;

  std::string data_source = "synthetic";  // synthetic | csv
  std::string data_path;
  bool data_has_header = true;
  std::string data_timestamp_column;
  std::string data_label_column;
  std::size_t data_instance_length = 0;
  SplitRatios split;

  SyntheticSpec synthetic;

  std::size_t window = 64;
  std::size_t horizon = 16;
  std::size_t window_stride = 1;

  EncoderConfig encoder;  // window, channels and patch fields are filled from the data
  bool channel_independence = true;
  PoolMethod pooling = PoolMethod::Cls;

  TrainConfig train;
  ProbeConfig probe;
  FineTuneConfig finetune;
  std::vector<double> label_fractions{0.1, 0.5, 1.0};
  std::size_t classes = 0;  // 0: inferred from the labels

  std::vector<AblationAxis> ablation_axes;
  std::vector<double> lambda_grid{0.001, 0.01, 0.1, 1, 10, 100, 1000};

  std::uint64_t seed = 0;
  std::string precision = "f64";
  std::string out = "out";

  // Every key except run.out with its resolved value, sorted by key.
  std::string canonical() const;
  std::uint64_t hash() const;
  bool operator==(const RunConfig& other) const { return canonical() == other.canonical(); }

  // Applies `value` to `key`; throws ConfigError naming the key.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Every key the schema accepts.
std::vector<std::string> config_keys();

}  // namespace timedrl
