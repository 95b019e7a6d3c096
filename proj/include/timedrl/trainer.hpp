#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "timedrl/checkpoint.hpp"
#include "timedrl/data.hpp"
#include "timedrl/optim.hpp"
#include "timedrl/pretext.hpp"

namespace timedrl {

struct TrainConfig {
  AdamWConfig adam;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  std::size_t patience = 10;
  double grad_clip = 5.0;  // global-norm bound; <= 0 disables
  bool stop_gradient = true;
  AugmentMethod augment = AugmentMethod::None;
  AugmentParams augment_params;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossValues train;
  std::optional<LossValues> val;
};

// Stacks windows [T x C] into patched tokens [B, T_p, C*P].
template <typename Real>
Tensor<Real> patch_batch(const std::vector<Matrix>& windows, const PatchConfig& cfg);

// Parameter values plus BatchNorm running statistics.
template <typename Real>
struct ModelState {
  std::map<std::string, std::vector<Real>> params;
  std::vector<double> bn_mean, bn_var;
};

template <typename Real>
ModelState<Real> capture_state(const PretextModel<Real>& model);
template <typename Real>
void restore_state(PretextModel<Real>& model, const ModelState<Real>& state);

// Encoder config plus pooling as "key=value" lines.
std::string model_config_text(const EncoderConfig& config, PoolMethod pooling);
EncoderConfig parse_model_config_text(const std::string& text, PoolMethod* pooling = nullptr);

// Records under "config/model" and "model/...".
template <typename Real>
void store_model(Checkpoint& ckpt, const PretextModel<Real>& model);
template <typename Real>
PretextModel<Real> load_model(const Checkpoint& ckpt);

// Epoch-at-a-time pretraining. Every epoch draws its shuffle, dropout and
// augmentation streams from (seed, epoch), so a run restored from
// save_state() continues exactly as the uninterrupted one.
template <typename Real>
class Pretrainer {
 public:
  Pretrainer(PretextModel<Real>& model, TrainConfig config, std::vector<Matrix> train, std::vector<Matrix> val);

  // Runs one epoch; returns false once the budget is spent or early stopping fired.
  bool run_epoch();
  // Runs until done, or until `stop_after` epochs have completed.
  void run(std::optional<std::size_t> stop_after = std::nullopt);
  // Loads the best-validation parameters into the model.
  void restore_best();

  bool done() const { return stopped_ || history_.size() >= config_.epochs; }
  bool stopped_early() const { return stopped_; }
  std::size_t best_epoch() const { return best_epoch_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  const AdamW<Real>& optimizer() const { return optimizer_; }

  void save_state(Checkpoint& ckpt) const;
  void load_state(const Checkpoint& ckpt);

  LossValues evaluate(const std::vector<Matrix>& windows) const;

 private:
  Tensor<Real> views(const std::vector<Matrix>& windows, RngStream& rng) const;

  PretextModel<Real>& model_;
  TrainConfig config_;
  std::vector<Matrix> train_, val_;
  AdamW<Real> optimizer_;
  std::vector<EpochRecord> history_;
  std::optional<ModelState<Real>> best_;
  double best_val_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t bad_epochs_ = 0;
  bool stopped_ = false;
};

struct PretrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

// Trains to completion and leaves the best-validation parameters in `model`.
template <typename Real>
PretrainResult pretrain(PretextModel<Real>& model, const std::vector<Matrix>& train, const std::vector<Matrix>& val,
                        const TrainConfig& config);

}  // namespace timedrl
