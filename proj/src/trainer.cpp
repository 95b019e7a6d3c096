#include "timedrl/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace timedrl {

void TrainConfig::validate() const {
  adam.validate();
  require(batch_size >= 2, ErrorCode::DegenerateBatch, "pretraining batch_size must be >= 2 (contrastive BatchNorm)");
  require(epochs >= 1, ErrorCode::InvalidParam, "epochs must be >= 1");
  require(lambda >= 0, ErrorCode::InvalidParam, "lambda must be >= 0");
  augment_params.validate();
}

template <typename Real>
Tensor<Real> patch_batch(const std::vector<Matrix>& windows, const PatchConfig& cfg) {
  require(!windows.empty(), ErrorCode::EmptyDataset, "empty batch");
  const Matrix first = patch(windows[0], cfg);
  std::vector<Real> data;
  data.reserve(windows.size() * first.values.size());
  for (const auto& w : windows) {
    const Matrix p = patch(w, cfg);
    require(p.rows == first.rows && p.cols == first.cols, ErrorCode::ShapeMismatch, "windows of different shapes");
    for (double v : p.values) data.push_back(static_cast<Real>(v));
  }
  return Tensor<Real>({windows.size(), first.rows, first.cols}, std::move(data));
}

template <typename Real>
ModelState<Real> capture_state(const PretextModel<Real>& model) {
  ModelState<Real> s;
  for (const auto& p : model.parameters()) s.params[p.name] = p.tensor.values();
  s.bn_mean = model.contrastive.bn_stats.running_mean;
  s.bn_var = model.contrastive.bn_stats.running_var;
  return s;
}

template <typename Real>
void restore_state(PretextModel<Real>& model, const ModelState<Real>& state) {
  for (auto& p : model.parameters()) {
    const auto it = state.params.find(p.name);
    require(it != state.params.end(), ErrorCode::ShapeMismatch, "state has no parameter " + p.name);
    require(it->second.size() == p.tensor.numel(), ErrorCode::ShapeMismatch, "state size mismatch for " + p.name);
    auto dst = p.tensor.mutable_data();
    std::copy(it->second.begin(), it->second.end(), dst.begin());
  }
  model.contrastive.bn_stats.running_mean = state.bn_mean;
  model.contrastive.bn_stats.running_var = state.bn_var;
}

std::string model_config_text(const EncoderConfig& c, PoolMethod pooling) {
  std::ostringstream os;
  os.precision(17);
  os << "d_model=" << c.d_model << "\nblocks=" << c.blocks << "\nheads=" << c.heads << "\nd_ff=" << c.d_ff
     << "\ndropout_embed=" << c.dropout_embed << "\ndropout_attn=" << c.dropout_attn << "\ndropout_ff=" << c.dropout_ff
     << "\npatch_len=" << c.patch_len << "\npatch_stride=" << c.patch_stride << "\nchannels=" << c.channels
     << "\nwindow=" << c.window << "\npooling=" << to_string(pooling) << "\n";
  return os.str();
}

EncoderConfig parse_model_config_text(const std::string& text, PoolMethod* pooling) {
  EncoderConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "d_model") c.d_model = std::stoull(v);
    else if (k == "blocks") c.blocks = std::stoull(v);
    else if (k == "heads") c.heads = std::stoull(v);
    else if (k == "d_ff") c.d_ff = std::stoull(v);
    else if (k == "dropout_embed") c.dropout_embed = std::stod(v);
    else if (k == "dropout_attn") c.dropout_attn = std::stod(v);
    else if (k == "dropout_ff") c.dropout_ff = std::stod(v);
    else if (k == "patch_len") c.patch_len = std::stoull(v);
    else if (k == "patch_stride") c.patch_stride = std::stoull(v);
    else if (k == "channels") c.channels = std::stoull(v);
    else if (k == "window") c.window = std::stoull(v);
    else if (k == "pooling") {
      if (pooling) *pooling = parse_pool_method(v);
    } else {
      fail(ErrorCode::IoError, "unknown model config key in checkpoint: " + k);
    }
  }
  c.validate();
  return c;
}

namespace {

std::vector<std::uint64_t> shape64(const Shape& s) { return {s.begin(), s.end()}; }

template <typename Real>
void store_state(Checkpoint& ckpt, const std::string& prefix, const PretextModel<Real>& model,
                 const ModelState<Real>& state) {
  for (const auto& p : model.parameters()) ckpt.put_tensor(prefix + p.name, shape64(p.tensor.shape()), state.params.at(p.name));
  ckpt.put_tensor(prefix + "contrastive.bn.running_mean", {state.bn_mean.size()}, state.bn_mean);
  ckpt.put_tensor(prefix + "contrastive.bn.running_var", {state.bn_var.size()}, state.bn_var);
}

template <typename Real>
ModelState<Real> read_state(const Checkpoint& ckpt, const std::string& prefix, const PretextModel<Real>& model) {
  ModelState<Real> s;
  for (const auto& p : model.parameters()) {
    const auto& shape = ckpt.shape(prefix + p.name);
    require(shape == shape64(p.tensor.shape()), ErrorCode::ShapeMismatch, "checkpoint shape mismatch for " + p.name);
    s.params[p.name] = ckpt.get_tensor<Real>(prefix + p.name);
  }
  s.bn_mean = ckpt.get_tensor<double>(prefix + "contrastive.bn.running_mean");
  s.bn_var = ckpt.get_tensor<double>(prefix + "contrastive.bn.running_var");
  return s;
}

void store_losses(Checkpoint& ckpt, const std::string& name, const std::vector<LossValues>& rows) {
  std::vector<double> flat;
  for (const auto& r : rows) flat.insert(flat.end(), {r.l_p1, r.l_p2, r.l_p, r.l_c1, r.l_c2, r.l_c, r.total});
  ckpt.put_tensor(name, {rows.size(), 7}, flat);
}

std::vector<LossValues> read_losses(const Checkpoint& ckpt, const std::string& name) {
  const auto flat = ckpt.get_tensor<double>(name);
  std::vector<LossValues> rows(flat.size() / 7);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* f = &flat[i * 7];
    rows[i] = {f[0], f[1], f[2], f[3], f[4], f[5], f[6]};
  }
  return rows;
}

void accumulate(LossValues& acc, const LossValues& v, double w) {
  acc.l_p1 += w * v.l_p1;
  acc.l_p2 += w * v.l_p2;
  acc.l_p += w * v.l_p;
  acc.l_c1 += w * v.l_c1;
  acc.l_c2 += w * v.l_c2;
  acc.l_c += w * v.l_c;
  acc.total += w * v.total;
}

std::vector<Matrix> gather(const std::vector<Matrix>& src, const std::vector<std::size_t>& idx, std::size_t begin,
                           std::size_t end) {
  std::vector<Matrix> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.push_back(src[idx[i]]);
  return out;
}

}  // namespace

template <typename Real>
void store_model(Checkpoint& ckpt, const PretextModel<Real>& model) {
  ckpt.put_text("config/model", model_config_text(model.encoder.config(), model.pooling));
  store_state(ckpt, "model/", model, capture_state(model));
}

template <typename Real>
PretextModel<Real> load_model(const Checkpoint& ckpt) {
  PoolMethod pooling = PoolMethod::Cls;
  const EncoderConfig cfg = parse_model_config_text(ckpt.get_text("config/model"), &pooling);
  PretextModel<Real> model(cfg, 0, pooling);
  restore_state(model, read_state(ckpt, "model/", model));
  return model;
}

template <typename Real>
Pretrainer<Real>::Pretrainer(PretextModel<Real>& model, TrainConfig config, std::vector<Matrix> train,
                             std::vector<Matrix> val)
    : model_(model), config_(config), train_(std::move(train)), val_(std::move(val)), optimizer_(config.adam) {
  config_.validate();
  require(!train_.empty(), ErrorCode::EmptyDataset, "no pretraining windows");
  require(train_.size() >= 2, ErrorCode::DegenerateBatch, "pretraining needs at least 2 windows");
}

template <typename Real>
Tensor<Real> Pretrainer<Real>::views(const std::vector<Matrix>& windows, RngStream& rng) const {
  if (config_.augment == AugmentMethod::None) return patch_batch<Real>(windows, model_.encoder.config().patch());
  std::vector<Matrix> aug;
  aug.reserve(windows.size());
  for (const auto& w : windows) aug.push_back(augment(w, config_.augment, config_.augment_params, rng));
  return patch_batch<Real>(aug, model_.encoder.config().patch());
}

template <typename Real>
LossValues Pretrainer<Real>::evaluate(const std::vector<Matrix>& windows) const {
  NoGradScope<Real> no_grad;
  const RngStream root(config_.seed);
  RngStream drop = root.derive("val-dropout");
  RngStream aug = root.derive("val-augment");
  PretextOptions opts{config_.lambda, config_.stop_gradient, true, false};
  LossValues acc;
  for (std::size_t b = 0; b < windows.size(); b += config_.batch_size) {
    const std::size_t e = std::min(windows.size(), b + config_.batch_size);
    const std::vector<Matrix> batch(windows.begin() + static_cast<std::ptrdiff_t>(b),
                                    windows.begin() + static_cast<std::ptrdiff_t>(e));
    const Tensor<Real> v1 = views(batch, aug);
    const Tensor<Real> v2 = config_.augment == AugmentMethod::None ? v1 : views(batch, aug);
    const auto lb = pretext_objective(model_, v1, v2, opts, drop);
    accumulate(acc, lb.values, static_cast<double>(e - b) / static_cast<double>(windows.size()));
  }
  return acc;
}

template <typename Real>
bool Pretrainer<Real>::run_epoch() {
  if (done()) return false;
  const std::size_t epoch = history_.size();
  const RngStream root(config_.seed);
  RngStream shuffle = root.derive("data-shuffle", epoch);
  RngStream drop = root.derive("dropout", epoch);
  RngStream aug = root.derive("augment", epoch);

  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

  const PretextOptions opts{config_.lambda, config_.stop_gradient, true, true};
  const auto params = model_.parameters();
  LossValues acc;
  std::size_t seen = 0;
  for (std::size_t b = 0; b < order.size(); b += config_.batch_size) {
    const std::size_t e = std::min(order.size(), b + config_.batch_size);
    if (e - b < 2) break;  // a lone trailing sample cannot form BatchNorm statistics
    const std::vector<Matrix> batch = gather(train_, order, b, e);
    const Tensor<Real> v1 = views(batch, aug);
    const Tensor<Real> v2 = config_.augment == AugmentMethod::None ? v1 : views(batch, aug);

    Tape<Real> tape;
    TapeScope<Real> scope(tape);
    const auto lb = pretext_objective(model_, v1, v2, opts, drop);
    if (!std::isfinite(lb.values.total)) {
      fail(ErrorCode::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch starting " +
                                         std::to_string(b) + ": L_P=" + std::to_string(lb.values.l_p) +
                                         " L_C=" + std::to_string(lb.values.l_c));
    }
    zero_grads(params);
    tape.backward(lb.objective);
    clip_grad_norm(params, config_.grad_clip);
    optimizer_.step(params);
    accumulate(acc, lb.values, static_cast<double>(e - b));
    seen += e - b;
  }
  zero_grads(params);
  const double inv = 1.0 / static_cast<double>(seen);
  LossValues mean;
  accumulate(mean, acc, inv);

  EpochRecord rec{epoch + 1, mean, std::nullopt};
  if (!val_.empty()) {
    rec.val = evaluate(val_);
    if (!best_ || rec.val->total < best_val_) {
      best_val_ = rec.val->total;
      best_epoch_ = epoch + 1;
      best_ = capture_state(model_);
      bad_epochs_ = 0;
    } else if (++bad_epochs_ >= config_.patience) {
      stopped_ = true;
    }
  } else {
    best_epoch_ = epoch + 1;
  }
  history_.push_back(rec);
  return !done();
}

template <typename Real>
void Pretrainer<Real>::run(std::optional<std::size_t> stop_after) {
  while (!done()) {
    if (stop_after && history_.size() >= *stop_after) return;
    run_epoch();
  }
}

template <typename Real>
void Pretrainer<Real>::restore_best() {
  if (best_) restore_state(model_, *best_);
}

template <typename Real>
void Pretrainer<Real>::save_state(Checkpoint& ckpt) const {
  store_model(ckpt, model_);
  ckpt.put_u64("rng/seed", {config_.seed});
  ckpt.put_u64("train/state", {history_.size(), best_epoch_, bad_epochs_, stopped_ ? 1u : 0u, best_ ? 1u : 0u});
  ckpt.put_tensor<double>("train/best_val", {1}, {best_val_});
  if (best_) store_state(ckpt, "best/", model_, *best_);

  std::vector<LossValues> train, val;
  for (const auto& r : history_) {
    train.push_back(r.train);
    if (r.val) val.push_back(*r.val);
  }
  store_losses(ckpt, "history/train", train);
  if (!val_.empty()) store_losses(ckpt, "history/val", val);

  ckpt.put_u64("adam/step", {optimizer_.step_count()});
  for (const auto& [name, mo] : optimizer_.moments()) {
    ckpt.put_tensor("adam/m/" + name, {mo.m.size()}, mo.m);
    ckpt.put_tensor("adam/v/" + name, {mo.v.size()}, mo.v);
  }
}

template <typename Real>
void Pretrainer<Real>::load_state(const Checkpoint& ckpt) {
  restore_state(model_, read_state(ckpt, "model/", model_));
  require(ckpt.get_u64("rng/seed").at(0) == config_.seed, ErrorCode::ConfigInvalid,
          "checkpoint was trained with a different seed");
  const auto st = ckpt.get_u64("train/state");
  require(st.size() == 5, ErrorCode::CorruptChecksum, "bad train/state record");
  best_epoch_ = st[1];
  bad_epochs_ = st[2];
  stopped_ = st[3] != 0;
  best_val_ = ckpt.get_tensor<double>("train/best_val").at(0);
  best_.reset();
  if (st[4] != 0) best_ = read_state(ckpt, "best/", model_);

  const auto train = read_losses(ckpt, "history/train");
  const auto val = ckpt.has("history/val") ? read_losses(ckpt, "history/val") : std::vector<LossValues>{};
  require(train.size() == st[0], ErrorCode::CorruptChecksum, "loss history length disagrees with epoch count");
  history_.clear();
  for (std::size_t i = 0; i < train.size(); ++i) {
    EpochRecord r{i + 1, train[i], std::nullopt};
    if (i < val.size()) r.val = val[i];
    history_.push_back(r);
  }

  optimizer_.set_step_count(ckpt.get_u64("adam/step").at(0));
  optimizer_.moments().clear();
  for (const auto& name : ckpt.names("adam/m/")) {
    const std::string pname = name.substr(7);
    auto& mo = optimizer_.moments()[pname];
    mo.m = ckpt.get_tensor<Real>(name);
    mo.v = ckpt.get_tensor<Real>("adam/v/" + pname);
  }
}

template <typename Real>
PretrainResult pretrain(PretextModel<Real>& model, const std::vector<Matrix>& train, const std::vector<Matrix>& val,
                        const TrainConfig& config) {
  Pretrainer<Real> trainer(model, config, train, val);
  trainer.run();
  trainer.restore_best();
  return {trainer.history(), trainer.best_epoch(), trainer.stopped_early()};
}

#define TIMEDRL_INSTANTIATE_TRAINER(R)                                                                    \
  template Tensor<R> patch_batch<R>(const std::vector<Matrix>&, const PatchConfig&);                      \
  template struct ModelState<R>;                                                                          \
  template ModelState<R> capture_state<R>(const PretextModel<R>&);                                        \
  template void restore_state<R>(PretextModel<R>&, const ModelState<R>&);                                 \
  template void store_model<R>(Checkpoint&, const PretextModel<R>&);                                      \
  template PretextModel<R> load_model<R>(const Checkpoint&);                                              \
  template class Pretrainer<R>;                                                                           \
  template PretrainResult pretrain<R>(PretextModel<R>&, const std::vector<Matrix>&, const std::vector<Matrix>&, \
                                      const TrainConfig&);

TIMEDRL_INSTANTIATE_TRAINER(float)
TIMEDRL_INSTANTIATE_TRAINER(double)

}  // namespace timedrl
