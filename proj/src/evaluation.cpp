#include "timedrl/evaluation.hpp"

#include <initializer_list>

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace timedrl {

TaskKind parse_task_kind(const std::string& name) {
  if (name == "forecasting" || name == "forecast") return TaskKind::Forecasting;
  if (name == "classification" || name == "classify") return TaskKind::Classification;
  fail(ErrorCode::ConfigError, "unknown task '" + name + "' (expected forecasting or classification)");
}

std::string to_string(TaskKind task) { return task == TaskKind::Forecasting ? "forecasting" : "classification"; }

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = to_string(task);
  j["dataset_id"] = dataset_id;
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << config_hash;
  j["config_hash"] = hash.str();
  j["seed"] = seed;
  j["label_fraction"] = label_fraction;
  j["metrics"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) j["metrics"][k] = v;
  if (single_class_warning) j["warnings"] = {"single-class test set: kappa reported as 0"};
  j["notes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : notes) j["notes"][k] = v;
  return j.dump(2) + "\n";
}

std::string MetricsReport::ledger_header() { return "task,dataset_id,config_hash,seed,label_fraction,protocol,init,metrics"; }

std::string MetricsReport::ledger_row() const {
  std::ostringstream os;
  os << std::setprecision(17) << to_string(task) << ',' << dataset_id << ',' << std::hex << std::setw(16)
     << std::setfill('0') << config_hash << std::dec << ',' << seed << ',' << label_fraction << ',';
  const auto note = [&](const char* k) { return notes.count(k) ? notes.at(k) : std::string(); };
  os << note("protocol") << ',' << note("init") << ',';
  bool first = true;
  for (const auto& [k, v] : metrics) {
    os << (first ? "" : ";") << k << '=' << v;
    first = false;
  }
  return os.str();
}

ProbeSet build_probe_set(const std::vector<WindowSample>& samples, const EncoderConfig& config,
                         std::optional<TaskKind> task, bool labelled_only);

ProbeSet encoder_units(const std::vector<WindowSample>& samples, const EncoderConfig& config) {
  return build_probe_set(samples, config, std::nullopt, false);
}

ProbeSet build_probe_set(const std::vector<WindowSample>& samples, const EncoderConfig& config, TaskKind task,
                         bool labelled_only) {
  return build_probe_set(samples, config, std::optional<TaskKind>(task), labelled_only);
}

ProbeSet build_probe_set(const std::vector<WindowSample>& samples, const EncoderConfig& config,
                         std::optional<TaskKind> task, bool labelled_only) {
  ProbeSet set;
  for (const auto& s : samples) {
    if (labelled_only && !s.label_available) continue;
    const std::size_t c = s.x.cols;
    if (set.samples == 0) {
      set.channels = c;
      const bool ci = config.channels == 1 && c > 1;
      require(ci || config.channels == c, ErrorCode::ShapeMismatch,
              "encoder expects " + std::to_string(config.channels) + " channels, data has " + std::to_string(c));
      set.units_per_sample = ci ? c : 1;
      set.horizon = s.y_forecast.rows;
    }
    require(c == set.channels, ErrorCode::ShapeMismatch, "samples with differing channel counts");
    require(s.x.rows == config.window, ErrorCode::ShapeMismatch,
            "window length " + std::to_string(s.x.rows) + " != encoder window " + std::to_string(config.window));
    const Normalized n = instance_normalize(s.x);
    if (set.units_per_sample == 1) {
      set.units.push_back(n.x);
    } else {
      for (std::size_t ch = 0; ch < c; ++ch) {
        Matrix u(n.x.rows, 1);
        for (std::size_t t = 0; t < n.x.rows; ++t) u(t, 0) = n.x(t, ch);
        set.units.push_back(std::move(u));
      }
    }
    if (task == TaskKind::Forecasting) {
      require(s.y_forecast.rows > 0 && s.y_forecast.rows == set.horizon && s.y_forecast.cols == c,
              ErrorCode::TaskMismatch, "forecasting needs windows with a horizon-H target");
      Matrix last(set.horizon, c);
      for (std::size_t h = 0; h < set.horizon; ++h)
        for (std::size_t ch = 0; ch < c; ++ch) last(h, ch) = s.x(s.x.rows - 1, ch);
      set.last_value.push_back(std::move(last));
      set.y_true.push_back(s.y_forecast);
    } else if (task == TaskKind::Classification) {
      require(s.y_class.has_value(), ErrorCode::TaskMismatch, "classification needs class labels");
      set.labels.push_back(*s.y_class);
    }
    set.stats.push_back(n.stats);
    ++set.samples;
  }
  if (task == TaskKind::Forecasting && set.samples > 0) {
    const std::size_t cu = set.channels / set.units_per_sample;
    set.targets = Matrix(set.units.size(), set.horizon * cu);
    for (std::size_t s = 0; s < set.samples; ++s) {
      const auto& y = set.y_true[s];
      const auto& st = set.stats[s];
      for (std::size_t u = 0; u < set.units_per_sample; ++u) {
        const std::size_t row = s * set.units_per_sample + u;
        for (std::size_t h = 0; h < set.horizon; ++h)
          for (std::size_t k = 0; k < cu; ++k) {
            const std::size_t ch = set.units_per_sample == 1 ? k : u;
            set.targets(row, h * cu + k) = (y(h, ch) - st.mean[ch]) / st.std[ch];
          }
      }
    }
  }
  return set;
}

namespace {

template <typename Real>
Tensor<Real> rows_tensor(const Matrix& m, const std::vector<std::size_t>& idx, std::size_t begin, std::size_t end) {
  std::vector<Real> v;
  v.reserve((end - begin) * m.cols);
  for (std::size_t i = begin; i < end; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) v.push_back(static_cast<Real>(m(idx[i], j)));
  return Tensor<Real>({end - begin, m.cols}, std::move(v));
}

template <typename Real>
Matrix to_matrix(const Tensor<Real>& t) {
  const std::size_t cols = t.dim(t.rank() - 1);
  Matrix m(t.numel() / cols, cols);
  for (std::size_t i = 0; i < t.numel(); ++i) m.values[i] = static_cast<double>(t.data()[i]);
  return m;
}

std::vector<std::size_t> iota_index(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<std::size_t> shuffled(std::size_t n, RngStream rng) {
  auto v = iota_index(n);
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return v;
}

std::vector<std::size_t> to_size_labels(const std::vector<int>& y, const std::vector<std::size_t>& idx,
                                        std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(static_cast<std::size_t>(y[idx[i]]));
  return out;
}

template <typename Real>
std::vector<std::vector<Real>> snapshot(const ParameterList<Real>& params) {
  std::vector<std::vector<Real>> out;
  for (const auto& p : params) out.push_back(p.tensor.values());
  return out;
}

template <typename Real>
void restore(const ParameterList<Real>& params, const std::vector<std::vector<Real>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Real> t = params[i].tensor;
    std::copy(values[i].begin(), values[i].end(), t.mutable_data().begin());
  }
}

// Rows of per-unit features regrouped so each sample holds all its units.
Matrix group_units(const Matrix& unit_rows, std::size_t units_per_sample) {
  if (units_per_sample == 1) return unit_rows;
  Matrix out(unit_rows.rows / units_per_sample, unit_rows.cols * units_per_sample);
  out.values = unit_rows.values;
  return out;
}

double regression_loss(const Matrix& pred, const Matrix& target) {
  double s = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double d = pred.values[i] - target.values[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.values.size());
}

double classification_loss(const Matrix& logits, const std::vector<int>& y) {
  double s = 0;
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const double* row = &logits.values[i * logits.cols];
    double mx = row[0];
    for (std::size_t k = 1; k < logits.cols; ++k) mx = std::max(mx, row[k]);
    double z = 0;
    for (std::size_t k = 0; k < logits.cols; ++k) z += std::exp(row[k] - mx);
    s += std::log(z) + mx - row[static_cast<std::size_t>(y[i])];
  }
  return s / static_cast<double>(logits.rows);
}

// Shared probe loop over fixed features. batch_loss builds the differentiable
// loss for a batch of row indices; val_loss scores the current head.
template <typename Real, typename BatchLoss, typename ValLoss>
LinearHead<Real> fit_head(LinearHead<Real> head, std::size_t rows, const ProbeConfig& config, BatchLoss batch_loss,
                          ValLoss val_loss) {
  require(rows > 0, ErrorCode::EmptyDataset, "probe has no training rows");
  AdamW<Real> opt(config.adam);
  const auto params = head.parameters();
  const RngStream root(config.seed);
  auto best = snapshot(params);
  double best_loss = val_loss(head);
  std::size_t bad = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(rows, root.derive("probe-shuffle", epoch));
    for (std::size_t b = 0; b < rows; b += config.batch_size) {
      const std::size_t e = std::min(rows, b + config.batch_size);
      Tape<Real> tape;
      TapeScope<Real> scope(tape);
      const Tensor<Real> loss = batch_loss(head, order, b, e);
      zero_grads(params);
      tape.backward(loss);
      opt.step(params);
    }
    const double v = val_loss(head);
    if (v < best_loss) {
      best_loss = v;
      best = snapshot(params);
      bad = 0;
    } else if (++bad >= config.patience) {
      break;
    }
  }
  zero_grads(params);
  restore(params, best);
  return head;
}

// Per-column z-score with train statistics, applied in place to every set.
// Columns that do not vary on train are only centered.
void standardize_columns(Matrix& train, std::initializer_list<Matrix*> others) {
  const std::size_t n = train.rows, d = train.cols;
  if (n == 0) return;
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += train(i, j);
  for (double& m : mu) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (train(i, j) - mu[j]) * (train(i, j) - mu[j]);
  for (double& s : sd) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-8) s = 1.0;
  }
  auto apply = [&](Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i)
      for (std::size_t j = 0; j < d; ++j) m(i, j) = (m(i, j) - mu[j]) / sd[j];
  };
  apply(train);
  for (Matrix* m : others) apply(*m);
}

}  // namespace

template <typename Real>
Matrix extract_features(const Encoder<Real>& encoder, const ProbeSet& set, TaskKind task, PoolMethod pooling,
                        std::size_t batch) {
  NoGradScope<Real> no_grad;
  RngStream unused(0);
  Matrix rows;
  for (std::size_t b = 0; b < set.units.size(); b += batch) {
    const std::size_t e = std::min(set.units.size(), b + batch);
    const std::vector<Matrix> chunk(set.units.begin() + static_cast<std::ptrdiff_t>(b),
                                    set.units.begin() + static_cast<std::ptrdiff_t>(e));
    const Tensor<Real> x = patch_batch<Real>(chunk, encoder.config().patch());
    const DualEmbedding<Real> emb = split_embeddings(encoder.forward(x, false, unused));
    Tensor<Real> f;
    if (task == TaskKind::Forecasting) {
      f = reshape(emb.z_t, {e - b, emb.z_t.dim(1) * emb.z_t.dim(2)});
    } else {
      f = pooling == PoolMethod::Cls ? emb.z_i : pool(emb.z_t, pooling);
    }
    const Matrix m = to_matrix(f);
    if (rows.rows == 0) rows = Matrix(0, m.cols);
    rows.values.insert(rows.values.end(), m.values.begin(), m.values.end());
    rows.rows += m.rows;
  }
  return task == TaskKind::Classification ? group_units(rows, set.units_per_sample) : rows;
}

template <typename Real>
LinearHead<Real>::LinearHead(std::size_t in, std::size_t out, std::uint64_t seed) {
  RngStream rng = RngStream(seed).derive("init-probe");
  weight = glorot_uniform<Real>(out, in, rng);
  bias = Tensor<Real>::zeros({out}, true);
}

template <typename Real>
Matrix LinearHead<Real>::predict(const Matrix& x) const {
  NoGradScope<Real> no_grad;
  return to_matrix(forward(rows_tensor<Real>(x, iota_index(x.rows), 0, x.rows)));
}

template <typename Real>
LinearHead<Real> train_regression_probe(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
                                        const Matrix& y_val, const ProbeConfig& config) {
  require(x_train.rows == y_train.rows, ErrorCode::ShapeMismatch, "probe features/targets row mismatch");
  auto batch_loss = [&](const LinearHead<Real>& h, const std::vector<std::size_t>& idx, std::size_t b, std::size_t e) {
    return mse_loss(h.forward(rows_tensor<Real>(x_train, idx, b, e)), rows_tensor<Real>(y_train, idx, b, e));
  };
  auto val_loss = [&](const LinearHead<Real>& h) {
    return x_val.rows > 0 ? regression_loss(h.predict(x_val), y_val) : regression_loss(h.predict(x_train), y_train);
  };
  return fit_head(LinearHead<Real>(x_train.cols, y_train.cols, config.seed), x_train.rows, config, batch_loss,
                  val_loss);
}

template <typename Real>
LinearHead<Real> train_classifier_probe(const Matrix& x_train, const std::vector<int>& y_train, const Matrix& x_val,
                                        const std::vector<int>& y_val, std::size_t classes,
                                        const ProbeConfig& config) {
  require(x_train.rows == y_train.size(), ErrorCode::ShapeMismatch, "probe features/labels row mismatch");
  auto batch_loss = [&](const LinearHead<Real>& h, const std::vector<std::size_t>& idx, std::size_t b, std::size_t e) {
    return cross_entropy(h.forward(rows_tensor<Real>(x_train, idx, b, e)), to_size_labels(y_train, idx, b, e));
  };
  auto val_loss = [&](const LinearHead<Real>& h) {
    return x_val.rows > 0 ? classification_loss(h.predict(x_val), y_val)
                          : classification_loss(h.predict(x_train), y_train);
  };
  return fit_head(LinearHead<Real>(x_train.cols, classes, config.seed), x_train.rows, config, batch_loss, val_loss);
}

std::vector<Matrix> denormalize_predictions(const Matrix& unit_pred, const ProbeSet& set) {
  const std::size_t cu = set.channels / set.units_per_sample;
  require(unit_pred.rows == set.samples * set.units_per_sample && unit_pred.cols == set.horizon * cu,
          ErrorCode::ShapeMismatch, "prediction rows do not match the probe set");
  std::vector<Matrix> out;
  for (std::size_t s = 0; s < set.samples; ++s) {
    Matrix y(set.horizon, set.channels);
    for (std::size_t u = 0; u < set.units_per_sample; ++u) {
      const std::size_t row = s * set.units_per_sample + u;
      for (std::size_t h = 0; h < set.horizon; ++h)
        for (std::size_t k = 0; k < cu; ++k) y(h, set.units_per_sample == 1 ? k : u) = unit_pred(row, h * cu + k);
    }
    out.push_back(denormalize(y, set.stats[s]));
  }
  return out;
}

std::vector<int> predict_classes(const Matrix& logits) {
  std::vector<int> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i)
    out[i] = static_cast<int>(argmax(&logits.values[i * logits.cols], logits.cols));
  return out;
}

namespace {

void add_forecast_metrics(MetricsReport& r, const ProbeSet& test, const Matrix& unit_pred) {
  const auto m = compute_forecast_metrics(test.y_true, denormalize_predictions(unit_pred, test));
  const auto naive = compute_forecast_metrics(test.y_true, test.last_value);
  r.metrics["mse"] = m.mse;
  r.metrics["mae"] = m.mae;
  r.metrics["naive_mse"] = naive.mse;
  r.metrics["naive_mae"] = naive.mae;
  r.notes["forecast_input"] = "flattened z_t";
}

void add_class_metrics(MetricsReport& r, const std::vector<int>& y_true, const Matrix& logits, std::size_t classes) {
  const auto m = compute_classification_metrics(y_true, predict_classes(logits), classes);
  r.metrics["accuracy"] = m.accuracy;
  r.metrics["macro_f1"] = m.macro_f1;
  r.metrics["kappa"] = m.kappa;
  r.single_class_warning = m.single_class_test;
}

}  // namespace

template <typename Real>
MetricsReport linear_eval_forecast(const Encoder<Real>* encoder, const EvalData& data, const ProbeConfig& config) {
  if (!encoder) fail(ErrorCode::NotPretrained, "linear evaluation needs a pretrained encoder");
  const auto& cfg = encoder->config();
  const ProbeSet train = build_probe_set(data.train, cfg, TaskKind::Forecasting);
  const ProbeSet val = build_probe_set(data.val, cfg, TaskKind::Forecasting);
  const ProbeSet test = build_probe_set(data.test, cfg, TaskKind::Forecasting);
  require(test.samples > 0, ErrorCode::EmptyDataset, "forecast test split is empty");
  Matrix f_train = extract_features(*encoder, train, TaskKind::Forecasting);
  Matrix f_val = val.samples ? extract_features(*encoder, val, TaskKind::Forecasting) : Matrix();
  Matrix f_test = extract_features(*encoder, test, TaskKind::Forecasting);
  standardize_columns(f_train, {&f_val, &f_test});
  const auto head = train_regression_probe<Real>(f_train, train.targets, f_val, val.targets, config);

  MetricsReport r;
  r.task = TaskKind::Forecasting;
  r.seed = config.seed;
  add_forecast_metrics(r, test, head.predict(f_test));
  r.notes["protocol"] = "linear_probe";
  return r;
}

template <typename Real>
MetricsReport linear_eval_classify(const Encoder<Real>* encoder, const EvalData& data, std::size_t classes,
                                   const ProbeConfig& config, PoolMethod pooling) {
  if (!encoder) fail(ErrorCode::NotPretrained, "linear evaluation needs a pretrained encoder");
  const auto& cfg = encoder->config();
  const ProbeSet train = build_probe_set(data.train, cfg, TaskKind::Classification);
  const ProbeSet val = build_probe_set(data.val, cfg, TaskKind::Classification);
  const ProbeSet test = build_probe_set(data.test, cfg, TaskKind::Classification);
  require(test.samples > 0, ErrorCode::EmptyDataset, "classification test split is empty");
  Matrix f_train = extract_features(*encoder, train, TaskKind::Classification, pooling);
  Matrix f_val = val.samples ? extract_features(*encoder, val, TaskKind::Classification, pooling) : Matrix();
  Matrix f_test = extract_features(*encoder, test, TaskKind::Classification, pooling);
  standardize_columns(f_train, {&f_val, &f_test});
  const auto head = train_classifier_probe<Real>(f_train, train.labels, f_val, val.labels, classes, config);

  MetricsReport r;
  r.task = TaskKind::Classification;
  r.seed = config.seed;
  add_class_metrics(r, test.labels, head.predict(f_test), classes);
  r.notes["protocol"] = "linear_probe";
  r.notes["instance_embedding"] = pooling == PoolMethod::Cls ? "z_i" : "pool(z_t, " + to_string(pooling) + ")";
  return r;
}

template <typename Real>
MetricsReport fine_tune(Encoder<Real> encoder, TaskKind task, const EvalData& data, const FineTuneConfig& config) {
  const auto& cfg = encoder.config();
  const ProbeSet train = build_probe_set(data.train, cfg, task, true);
  if (train.samples == 0) fail(ErrorCode::NoLabeledSamples, "no label-available training samples to fine-tune on");
  const ProbeSet val = build_probe_set(data.val, cfg, task);
  const ProbeSet test = build_probe_set(data.test, cfg, task);
  require(test.samples > 0, ErrorCode::EmptyDataset, "fine-tune test split is empty");

  const bool forecast = task == TaskKind::Forecasting;
  const std::size_t ups = train.units_per_sample;
  const std::size_t in = forecast ? cfg.patches() * cfg.d_model : ups * instance_dim(cfg, config.pooling);
  const std::size_t out = forecast ? train.targets.cols : config.classes;
  LinearHead<Real> head(in, out, config.seed);

  ParameterList<Real> params = encoder.parameters();
  for (const auto& p : head.parameters()) params.push_back(p);
  AdamW<Real> opt(config.adam);
  const RngStream root(config.seed);

  // Differentiable head output for a run of samples.
  auto forward = [&](const std::vector<std::size_t>& samples, bool training, RngStream& rng) {
    std::vector<Matrix> units;
    for (std::size_t s : samples)
      for (std::size_t u = 0; u < ups; ++u) units.push_back(train.units[s * ups + u]);
    const DualEmbedding<Real> emb =
        split_embeddings(encoder.forward(patch_batch<Real>(units, cfg.patch()), training, rng));
    Tensor<Real> f;
    if (forecast) {
      f = reshape(emb.z_t, {units.size(), emb.z_t.dim(1) * emb.z_t.dim(2)});
    } else {
      f = config.pooling == PoolMethod::Cls ? emb.z_i : pool(emb.z_t, config.pooling);
      f = reshape(f, {samples.size(), in});
    }
    return head.forward(f);
  };
  auto score_loss = [&](const ProbeSet& set) {
    const Matrix f = extract_features(encoder, set, task, config.pooling);
    return forecast ? regression_loss(head.predict(f), set.targets) : classification_loss(head.predict(f), set.labels);
  };
  const ProbeSet& select = val.samples ? val : train;

  auto best = snapshot(params);
  double best_loss = score_loss(select);
  std::size_t bad = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(train.samples, root.derive("finetune-shuffle", epoch));
    RngStream drop = root.derive("finetune-dropout", epoch);
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(b),
                                           order.begin() + static_cast<std::ptrdiff_t>(e));
      Tape<Real> tape;
      TapeScope<Real> scope(tape);
      const Tensor<Real> logits = forward(batch, true, drop);
      Tensor<Real> loss;
      if (forecast) {
        std::vector<std::size_t> rows;
        for (std::size_t s : batch)
          for (std::size_t u = 0; u < ups; ++u) rows.push_back(s * ups + u);
        loss = mse_loss(logits, rows_tensor<Real>(train.targets, rows, 0, rows.size()));
      } else {
        loss = cross_entropy(logits, to_size_labels(train.labels, batch, 0, batch.size()));
      }
      if (!std::isfinite(static_cast<double>(loss.item())))
        fail(ErrorCode::NonFiniteLoss, "non-finite fine-tune loss at epoch " + std::to_string(epoch + 1));
      zero_grads(params);
      tape.backward(loss);
      opt.step(params);
    }
    const double v = score_loss(select);
    if (v < best_loss) {
      best_loss = v;
      best = snapshot(params);
      bad = 0;
    } else if (++bad >= config.patience) {
      break;
    }
  }
  zero_grads(params);
  restore(params, best);

  MetricsReport r;
  r.task = task;
  r.seed = config.seed;
  r.label_fraction = config.label_fraction;
  const Matrix f_test = extract_features(encoder, test, task, config.pooling);
  if (forecast) {
    add_forecast_metrics(r, test, head.predict(f_test));
  } else {
    add_class_metrics(r, test.labels, head.predict(f_test), config.classes);
  }
  r.metrics["labeled_samples"] = static_cast<double>(train.samples);
  r.notes["protocol"] = "fine_tune";
  r.notes["init"] = config.pretrained ? "pretrained" : "random";
  return r;
}

#define TIMEDRL_INSTANTIATE_EVAL(R)                                                                                 \
  template Matrix extract_features<R>(const Encoder<R>&, const ProbeSet&, TaskKind, PoolMethod, std::size_t);       \
  template struct LinearHead<R>;                                                                                    \
  template LinearHead<R> train_regression_probe<R>(const Matrix&, const Matrix&, const Matrix&, const Matrix&,      \
                                                   const ProbeConfig&);                                             \
  template LinearHead<R> train_classifier_probe<R>(const Matrix&, const std::vector<int>&, const Matrix&,          \
                                                   const std::vector<int>&, std::size_t, const ProbeConfig&);       \
  template MetricsReport linear_eval_forecast<R>(const Encoder<R>*, const EvalData&, const ProbeConfig&);           \
  template MetricsReport linear_eval_classify<R>(const Encoder<R>*, const EvalData&, std::size_t,                  \
                                                 const ProbeConfig&, PoolMethod);                                   \
  template MetricsReport fine_tune<R>(Encoder<R>, TaskKind, const EvalData&, const FineTuneConfig&);

TIMEDRL_INSTANTIATE_EVAL(float)
TIMEDRL_INSTANTIATE_EVAL(double)

}  // namespace timedrl
