#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timedrl/encoder.hpp"
#include "timedrl/metrics.hpp"
#include "timedrl/optim.hpp"
#include "timedrl/trainer.hpp"

namespace timedrl {

enum class TaskKind { Forecasting, Classification };

TaskKind parse_task_kind(const std::string& name);
std::string to_string(TaskKind task);

struct MetricsReport {
  TaskKind task = TaskKind::Forecasting;
  std::map<std::string, double> metrics;
  std::map<std::string, std::string> notes;
  std::string dataset_id;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double label_fraction = 1.0;
  bool single_class_warning = false;

  std::string to_json() const;
  // One CSV row: task, dataset_id, config_hash, seed, label_fraction, protocol,
  // init, then ';'-joined name=value metric pairs.
  std::string ledger_row() const;
  static std::string ledger_header();
};

// Per-sample inputs laid out for the encoder. Under channel independence
// (encoder channels == 1 < data channels) every sample contributes one unit
// per channel, ordered sample-major.
struct ProbeSet {
  std::vector<Matrix> units;       // normalized windows [T x C_enc]
  Matrix targets;                  // forecasting: [units x H*C_enc], normalized
  std::vector<int> labels;         // classification: one per sample
  std::vector<NormStats> stats;    // one per sample
  std::vector<Matrix> y_true;      // forecasting targets in original units
  std::vector<Matrix> last_value;  // forecasting naive baseline [H x C]
  std::size_t samples = 0;
  std::size_t units_per_sample = 1;
  std::size_t horizon = 0;
  std::size_t channels = 0;
};

// Normalized encoder inputs only (no targets), laid out as in ProbeSet.
ProbeSet encoder_units(const std::vector<WindowSample>& samples, const EncoderConfig& config);

ProbeSet build_probe_set(const std::vector<WindowSample>& samples, const EncoderConfig& config, TaskKind task,
                         bool labelled_only = false);

// Eval-mode, gradient-free features. Forecasting: one row per unit holding
// the flattened z_t. Classification: one row per sample holding the
// concatenated per-unit instance embeddings (z_i, or a pooling of z_t).
template <typename Real>
Matrix extract_features(const Encoder<Real>& encoder, const ProbeSet& set, TaskKind task,
                        PoolMethod pooling = PoolMethod::Cls, std::size_t batch = 64);

struct ProbeConfig {
  AdamWConfig adam{1e-3, 1e-4, 0.9, 0.999, 1e-8};
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
};

template <typename Real>
struct LinearHead {
  Tensor<Real> weight;  // [out, in]
  Tensor<Real> bias;    // [out]

  LinearHead(std::size_t in, std::size_t out, std::uint64_t seed);
  ParameterList<Real> parameters() const { return {{"head.weight", weight, true}, {"head.bias", bias, false}}; }
  Tensor<Real> forward(const Tensor<Real>& x) const { return linear(x, weight, bias); }
  Matrix predict(const Matrix& x) const;
};

// Trains a head on fixed features; early stops on validation loss and keeps
// the best weights. Regression uses MSE against `targets`; classification
// uses cross-entropy against `labels`.
template <typename Real>
LinearHead<Real> train_regression_probe(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
                                        const Matrix& y_val, const ProbeConfig& config);
template <typename Real>
LinearHead<Real> train_classifier_probe(const Matrix& x_train, const std::vector<int>& y_train, const Matrix& x_val,
                                        const std::vector<int>& y_val, std::size_t classes, const ProbeConfig& config);

// Regroups normalized unit predictions to [H x C] per sample and denormalizes
// them with the sample's stats.
std::vector<Matrix> denormalize_predictions(const Matrix& unit_pred, const ProbeSet& set);

std::vector<int> predict_classes(const Matrix& logits);

struct EvalData {
  std::vector<WindowSample> train, val, test;
};

// Linear evaluation with a frozen encoder. A null encoder raises NotPretrained.
template <typename Real>
MetricsReport linear_eval_forecast(const Encoder<Real>* encoder, const EvalData& data, const ProbeConfig& config);
template <typename Real>
MetricsReport linear_eval_classify(const Encoder<Real>* encoder, const EvalData& data, std::size_t classes,
                                   const ProbeConfig& config, PoolMethod pooling = PoolMethod::Cls);

struct FineTuneConfig {
  AdamWConfig adam{1e-3, 1e-4, 0.9, 0.999, 1e-8};
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  double label_fraction = 1.0;  // reported only; flags come from the samples
  bool pretrained = true;
  std::size_t classes = 2;
  PoolMethod pooling = PoolMethod::Cls;
};

// Trains encoder and head jointly (dropout on) on samples whose
// label_available flag is set. Validation uses every val sample.
template <typename Real>
MetricsReport fine_tune(Encoder<Real> encoder, TaskKind task, const EvalData& data, const FineTuneConfig& config);

}  // namespace timedrl
