#include "timedrl/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

namespace timedrl {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::ConfigInvalid:
    case ErrorCode::MultipleAxes:
    case ErrorCode::UnknownMethod:
    case ErrorCode::InvalidParam:
    case ErrorCode::InvalidFraction:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidProbability:
    case ErrorCode::TaskMismatch:
      return 2;
    case ErrorCode::ParseError:
    case ErrorCode::EmptyDataset:
    case ErrorCode::TooSmall:
    case ErrorCode::TooShort:
    case ErrorCode::TooFewRows:
    case ErrorCode::TooFewEmbeddings:
    case ErrorCode::LengthMismatch:
    case ErrorCode::LabelOutOfRange:
    case ErrorCode::StatsMismatch:
    case ErrorCode::NoLabeledSamples:
    case ErrorCode::ShapeMismatch:
    case ErrorCode::DegenerateBatch:
      return 3;
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::NonFiniteLoss:
      return 4;
    case ErrorCode::IoError:
    case ErrorCode::VersionMismatch:
    case ErrorCode::CorruptChecksum:
    case ErrorCode::NotPretrained:
      return 5;
    default:
      return 1;
  }
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

void append_ledger(const fs::path& dir, const std::vector<MetricsReport>& reports) {
  const fs::path path = dir / "ledger.csv";
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) fail(ErrorCode::IoError, "cannot append to " + path.string());
  if (fresh) out << MetricsReport::ledger_header() << "\n";
  for (const auto& r : reports) out << r.ledger_row() << "\n";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> metric_names(TaskKind task) {
  if (task == TaskKind::Forecasting) return {"mse", "mae"};
  return {"accuracy", "macro_f1", "kappa"};
}

void stamp(MetricsReport& r, const RunConfig& cfg, const PreparedData& d) {
  r.dataset_id = d.dataset_id;
  r.config_hash = cfg.hash();
  r.seed = cfg.seed;
}

ProbeConfig probe_config(const RunConfig& cfg) {
  ProbeConfig p = cfg.probe;
  p.seed = cfg.seed;
  return p;
}

template <typename Real>
MetricsReport probe(const Encoder<Real>& encoder, PoolMethod pooling, const RunConfig& cfg, const PreparedData& d) {
  MetricsReport r = cfg.task == TaskKind::Forecasting
                        ? linear_eval_forecast(&encoder, d.windows, probe_config(cfg))
                        : linear_eval_classify(&encoder, d.windows, d.classes, probe_config(cfg), pooling);
  stamp(r, cfg, d);
  return r;
}

template <typename Real>
PretextModel<Real> checkpoint_model(const std::optional<fs::path>& checkpoint, const RunConfig& cfg,
                                    const PreparedData& d) {
  if (!checkpoint) fail(ErrorCode::NotPretrained, "this command needs --checkpoint from a pretrain run");
  const Checkpoint ck = load_checkpoint(checkpoint->string());
  if (ck.has("meta/task") && ck.get_text("meta/task") != to_string(cfg.task)) {
    fail(ErrorCode::TaskMismatch, "checkpoint was pretrained for " + ck.get_text("meta/task") + ", config asks for " +
                                      to_string(cfg.task));
  }
  PretextModel<Real> model = load_model<Real>(ck);
  const auto& mc = model.encoder.config();
  require(mc.window == d.encoder.window && mc.channels == d.encoder.channels, ErrorCode::TaskMismatch,
          "checkpoint encoder (window " + std::to_string(mc.window) + ", channels " + std::to_string(mc.channels) +
              ") does not fit the configured data (window " + std::to_string(d.encoder.window) + ", channels " +
              std::to_string(d.encoder.channels) + ")");
  return model;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

std::vector<Matrix> units_of(const std::vector<WindowSample>& samples, const EncoderConfig& enc) {
  if (samples.empty()) return {};
  return encoder_units(samples, enc).units;
}

template <typename Real>
void pretrain_impl(const RunConfig& cfg, const fs::path& out, const PretrainOptions& options) {
  const PreparedData d = prepare_data(cfg);
  PretextModel<Real> model(d.encoder, cfg.seed, cfg.pooling);
  Pretrainer<Real> trainer(model, train_config(cfg), units_of(d.windows.train, d.encoder),
                           units_of(d.windows.val, d.encoder));
  if (options.resume) {
    const Checkpoint prev = load_checkpoint(options.resume->string());
    require(prev.get_text("config/model") == model_config_text(d.encoder, cfg.pooling), ErrorCode::ConfigError,
            "resume checkpoint was written for a different model configuration");
    trainer.load_state(prev);
  }
  trainer.run(options.stop_after);
  if (trainer.done()) trainer.restore_best();

  Checkpoint ck;
  trainer.save_state(ck);
  ck.put_text("config/run", cfg.canonical());
  ck.put_text("meta/task", to_string(cfg.task));
  ck.put_text("meta/dataset_id", d.dataset_id);
  ck.put_text("meta/version", kVersion);
  save_checkpoint((out / "checkpoint.tdrl").string(), ck);
  write_file(out / "loss.csv", loss_csv(trainer.history()));

  ordered_json meta;
  meta["version"] = kVersion;
  meta["config_hash"] = hex64(cfg.hash());
  meta["seed"] = cfg.seed;
  meta["precision"] = cfg.precision;
  meta["dataset_id"] = d.dataset_id;
  meta["split_fingerprint"] = hex64(d.split.fingerprint());
  meta["epochs_completed"] = trainer.history().size();
  meta["finished"] = trainer.done();
  meta["stopped_early"] = trainer.stopped_early();
  meta["best_epoch"] = trainer.best_epoch();
  meta["validation_mode"] = "dropout on for both views; contrastive BatchNorm uses running statistics";
  meta["augmentation_views"] = "applied independently to both views";
  meta["created_at"] = utc_now();
  write_file(out / "run_meta.json", meta.dump(2) + "\n");
}

template <typename Real>
void eval_impl(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& out) {
  const PreparedData d = prepare_data(cfg);
  const PretextModel<Real> model = checkpoint_model<Real>(checkpoint, cfg, d);
  const MetricsReport r = probe(model.encoder, model.pooling, cfg, d);
  write_file(out / "metrics.json", r.to_json());
  append_ledger(out, {r});
}

template <typename Real>
void finetune_impl(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& out) {
  const PreparedData d = prepare_data(cfg);
  std::optional<PretextModel<Real>> model;
  if (checkpoint) model.emplace(checkpoint_model<Real>(checkpoint, cfg, d));

  FineTuneConfig base = cfg.finetune;
  base.seed = cfg.seed;
  base.classes = d.classes;
  base.pooling = model ? model->pooling : cfg.pooling;

  const auto names = metric_names(cfg.task);
  std::string csv = "label_fraction,init";
  for (const auto& n : names) csv += "," + n;
  csv += ",labeled_samples\n";
  std::vector<MetricsReport> reports;
  for (double fraction : cfg.label_fractions) {
    EvalData data = d.windows;
    data.train = label_subsample(d.windows.train, fraction, cfg.seed);
    for (bool pretrained : {true, false}) {
      if (pretrained && !model) continue;
      FineTuneConfig ft = base;
      ft.label_fraction = fraction;
      ft.pretrained = pretrained;
      Encoder<Real> enc = pretrained ? model->encoder.clone() : Encoder<Real>(d.encoder, cfg.seed);
      MetricsReport r = fine_tune(std::move(enc), cfg.task, data, ft);
      stamp(r, cfg, d);
      csv += fmt(fraction) + "," + r.notes["init"];
      for (const auto& n : names) csv += "," + fmt(r.metrics.at(n));
      csv += "," + fmt(r.metrics.at("labeled_samples")) + "\n";
      reports.push_back(std::move(r));
    }
  }
  write_file(out / "finetune.csv", csv);
  append_ledger(out, reports);
}

struct Arm {
  std::string name;
  RunConfig config;
};

std::vector<Arm> ablation_arms(const RunConfig& cfg, AblationAxis axis, std::size_t& control) {
  std::vector<Arm> arms;
  control = 0;
  switch (axis) {
    case AblationAxis::Augmentation:
      for (auto m : {AugmentMethod::None, AugmentMethod::Jitter, AugmentMethod::Scaling, AugmentMethod::Rotation,
                     AugmentMethod::Permutation, AugmentMethod::Masking, AugmentMethod::Cropping}) {
        RunConfig c = cfg;
        c.train.augment = m;
        arms.push_back({to_string(m), c});
      }
      break;
    case AblationAxis::Pooling:
      for (auto p : {PoolMethod::Cls, PoolMethod::Last, PoolMethod::Gap, PoolMethod::All}) {
        RunConfig c = cfg;
        c.pooling = p;
        arms.push_back({to_string(p), c});
      }
      break;
    case AblationAxis::StopGradient:
      for (bool sg : {true, false}) {
        RunConfig c = cfg;
        c.train.stop_gradient = sg;
        arms.push_back({sg ? "stop_gradient_on" : "stop_gradient_off", c});
      }
      break;
    case AblationAxis::Lambda:
      control = cfg.lambda_grid.size();
      for (double l : cfg.lambda_grid) {
        RunConfig c = cfg;
        c.train.lambda = l;
        if (l == 1.0 && control == cfg.lambda_grid.size()) control = arms.size();
        arms.push_back({"lambda=" + fmt(l), c});
      }
      break;
  }
  return arms;
}

template <typename Real>
void ablate_impl(const RunConfig& cfg, const fs::path& out) {
  if (cfg.ablation_axes.size() > 1)
    fail(ErrorCode::MultipleAxes, "ablation.axis lists " + std::to_string(cfg.ablation_axes.size()) +
                                      " axes; run one axis per invocation");
  if (cfg.ablation_axes.empty()) fail(ErrorCode::ConfigError, "ablation.axis: required for ablate");
  const AblationAxis axis = cfg.ablation_axes.front();
  const PreparedData d = prepare_data(cfg);
  const std::vector<Matrix> train_units = units_of(d.windows.train, d.encoder);
  const std::vector<Matrix> val_units = units_of(d.windows.val, d.encoder);

  std::size_t control = 0;
  const auto arms = ablation_arms(cfg, axis, control);
  const auto names = metric_names(cfg.task);
  std::vector<MetricsReport> reports;
  for (const auto& arm : arms) {
    PretextModel<Real> model(d.encoder, cfg.seed, arm.config.pooling);
    pretrain(model, train_units, val_units, train_config(arm.config));
    reports.push_back(probe(model.encoder, model.pooling, arm.config, d));
  }

  std::string csv = "axis,arm,control,split_fingerprint";
  for (const auto& n : names) csv += "," + n;
  for (const auto& n : names) csv += ",delta_" + n;
  csv += "\n";
  const std::string fp = hex64(d.split.fingerprint());
  for (std::size_t i = 0; i < arms.size(); ++i) {
    csv += to_string(axis) + "," + arms[i].name + "," + (i == control ? "true" : "false") + "," + fp;
    for (const auto& n : names) csv += "," + fmt(reports[i].metrics.at(n));
    for (const auto& n : names)
      csv += "," + (control < arms.size() ? fmt(reports[i].metrics.at(n) - reports[control].metrics.at(n)) : "");
    csv += "\n";
  }
  write_file(out / "ablation.csv", csv);
}

template <typename Real>
void export_impl(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& out,
                 bool with_timestamps) {
  const PreparedData d = prepare_data(cfg);
  const PretextModel<Real> model = checkpoint_model<Real>(checkpoint, cfg, d);
  std::vector<WindowSample> all;
  std::vector<std::string> split_of;
  for (const auto& [name, part] : {std::pair{"train", &d.windows.train}, std::pair{"val", &d.windows.val},
                                   std::pair{"test", &d.windows.test}}) {
    for (const auto& s : *part) {
      all.push_back(s);
      split_of.push_back(name);
    }
  }
  const ProbeSet set = encoder_units(all, model.encoder.config());
  const Matrix zi = extract_features(model.encoder, set, TaskKind::Classification, PoolMethod::Cls);
  Matrix zt;
  if (with_timestamps) {
    const Matrix per_unit = extract_features(model.encoder, set, TaskKind::Forecasting);
    zt = Matrix(set.samples, per_unit.cols * set.units_per_sample, per_unit.values);
  }

  std::string csv = "sample,split";
  for (std::size_t j = 0; j < zi.cols; ++j) csv += ",z_i_" + std::to_string(j);
  for (std::size_t j = 0; j < zt.cols; ++j) csv += ",z_t_" + std::to_string(j);
  csv += "\n";
  for (std::size_t i = 0; i < zi.rows; ++i) {
    csv += std::to_string(i) + "," + split_of[i];
    for (std::size_t j = 0; j < zi.cols; ++j) csv += "," + fmt(zi(i, j));
    for (std::size_t j = 0; j < zt.cols; ++j) csv += "," + fmt(zt(i, j));
    csv += "\n";
  }
  write_file(out / "embeddings.csv", csv);

  ordered_json summary;
  summary["samples"] = zi.rows;
  summary["z_i_dims"] = zi.cols;
  summary["config_hash"] = hex64(cfg.hash());
  summary["dataset_id"] = d.dataset_id;
  for (auto p : {PoolMethod::Cls, PoolMethod::Last, PoolMethod::Gap, PoolMethod::All}) {
    const Matrix f = extract_features(model.encoder, set, TaskKind::Classification, p);
    summary["anisotropy"][to_string(p)] = anisotropy_score(f);
  }
  write_file(out / "embedding_summary.json", summary.dump(2) + "\n");
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData d;
  if (cfg.data_source == "synthetic") {
    d.dataset = generate_synthetic(cfg.synthetic);
    d.dataset_id = "synthetic-" + to_string(cfg.synthetic.generator);
  } else {
    CsvSchema schema;
    schema.has_header = cfg.data_has_header;
    if (!cfg.data_timestamp_column.empty()) schema.timestamp_column = cfg.data_timestamp_column;
    if (!cfg.data_label_column.empty()) schema.label_column = cfg.data_label_column;
    d.dataset = load_csv(cfg.data_path, schema);
    if (cfg.data_instance_length > 0) d.dataset = group_instances(d.dataset, cfg.data_instance_length);
    d.dataset_id = fs::path(cfg.data_path).stem().string();
  }
  if (!cfg.dataset_id.empty()) d.dataset_id = cfg.dataset_id;

  const bool instances = d.dataset.instance_length > 0;
  if (cfg.task == TaskKind::Classification) {
    if (!instances || !d.dataset.labels)
      fail(ErrorCode::ConfigError, "run.task: classification needs labelled fixed-length instances");
  } else if (instances) {
    fail(ErrorCode::ConfigError, "run.task: forecasting needs a continuous series, not instances");
  }

  d.split = split_train_val_test(d.dataset, cfg.split, cfg.seed);
  auto windows = [&](const TimeSeriesDataset& part) {
    if (part.values.rows == 0) return std::vector<WindowSample>{};
    return make_windows(part, cfg.window, cfg.task == TaskKind::Forecasting ? cfg.horizon : 0, cfg.window_stride);
  };
  d.windows.train = windows(d.split.train);
  d.windows.val = windows(d.split.val);
  d.windows.test = windows(d.split.test);

  d.encoder = cfg.encoder;
  d.encoder.window = instances ? d.dataset.instance_length : cfg.window;
  d.encoder.channels = cfg.channel_independence ? 1 : d.dataset.channels();
  try {
    d.encoder.validate();
  } catch (const Error& e) {
    fail(ErrorCode::ConfigError, std::string("encoder: ") + e.what());
  }

  if (cfg.task == TaskKind::Classification) {
    int top = 0;
    for (int y : *d.dataset.labels) top = std::max(top, y);
    d.classes = cfg.classes > 0 ? cfg.classes : static_cast<std::size_t>(top) + 1;
    require(static_cast<std::size_t>(top) < d.classes, ErrorCode::LabelOutOfRange,
            "eval.classes is smaller than the largest label + 1");
  }
  return d;
}

std::string loss_csv(const std::vector<EpochRecord>& history) {
  std::string s = "epoch,L_P1,L_P2,L_P,L_C1,L_C2,L_C,total,split\n";
  auto row = [&](std::size_t epoch, const LossValues& v, const char* split) {
    s += std::to_string(epoch) + "," + fmt(v.l_p1) + "," + fmt(v.l_p2) + "," + fmt(v.l_p) + "," + fmt(v.l_c1) + "," +
         fmt(v.l_c2) + "," + fmt(v.l_c) + "," + fmt(v.total) + "," + split + "\n";
  };
  for (const auto& r : history) {
    row(r.epoch, r.train, "train");
    if (r.val) row(r.epoch, *r.val, "val");
  }
  return s;
}

void cmd_pretrain(const RunConfig& config, const fs::path& out, const PretrainOptions& options) {
  fs::create_directories(out);
  if (config.precision == "f32") pretrain_impl<float>(config, out, options);
  else pretrain_impl<double>(config, out, options);
}

void cmd_eval(const RunConfig& config, const std::optional<fs::path>& checkpoint, const fs::path& out) {
  fs::create_directories(out);
  if (config.precision == "f32") eval_impl<float>(config, checkpoint, out);
  else eval_impl<double>(config, checkpoint, out);
}

void cmd_finetune(const RunConfig& config, const std::optional<fs::path>& checkpoint, const fs::path& out) {
  fs::create_directories(out);
  if (config.precision == "f32") finetune_impl<float>(config, checkpoint, out);
  else finetune_impl<double>(config, checkpoint, out);
}

void cmd_ablate(const RunConfig& config, const fs::path& out) {
  fs::create_directories(out);
  if (config.precision == "f32") ablate_impl<float>(config, out);
  else ablate_impl<double>(config, out);
}

void cmd_export_embeddings(const RunConfig& config, const std::optional<fs::path>& checkpoint, const fs::path& out,
                           bool with_timestamps) {
  fs::create_directories(out);
  if (config.precision == "f32") export_impl<float>(config, checkpoint, out, with_timestamps);
  else export_impl<double>(config, checkpoint, out, with_timestamps);
}

void cmd_gen_data(const RunConfig& config, const fs::path& out) {
  if (config.data_source != "synthetic") fail(ErrorCode::ConfigError, "data.source: gen-data needs synthetic");
  fs::create_directories(out);
  write_csv(out / "data.csv", generate_synthetic(config.synthetic));
}

}  // namespace timedrl
