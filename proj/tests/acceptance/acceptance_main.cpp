// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/metrics_oracle.hpp"
#include "../support/objective_oracle.hpp"
#include "../support/primitive_cases.hpp"
#include "nlohmann/json.hpp"
#include "timedrl/checkpoint.hpp"
#include "timedrl/commands.hpp"
#include "timedrl/config.hpp"
#include "timedrl/synthetic.hpp"
#include "timedrl/trainer.hpp"

using namespace timedrl;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(TIMEDRL_TEST_TMP) / "acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    rows.push_back(f);
  }
  return rows;
}

// ---------------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  double prim_worst = 0;
  std::string prim_name;
  const auto cases = testutil::primitive_cases();
  for (const auto& c : cases)
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const double e = testutil::primitive_max_error(c, seed);
      if (e > prim_worst) {
        prim_worst = e;
        prim_name = c.name;
      }
    }
  testutil::ObjectiveSetup s;  // 2 blocks, D=16, T_p=6, batch 4, stop-gradient on
  double comp_worst = 0;
  std::size_t coords = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = testutil::check_objective_gradient(seed, s);
    comp_worst = std::max(comp_worst, r.max_rel_error);
    coords += r.coordinates;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = prim_worst < 1e-4 && comp_worst < 1e-4 && secs < 120;
  o.detail = std::to_string(cases.size()) + " primitives x 20 seeds max rel-err " + num(prim_worst) + " (" +
             prim_name + "); composite 20 seeds, " + std::to_string(coords) + " coordinates, max rel-err " +
             num(comp_worst) + "; " + num(secs, 3) + " s";
  return o;
}

Outcome routing() {
  testutil::ObjectiveSetup s;
  const auto cfg = testutil::objective_encoder(s);
  std::size_t zero_cls = 0, trials = 0, isolated = 0, live = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ++trials;
    PretextModel<double> model(cfg, seed);
    RngStream rng(seed + 100);
    const auto x = testutil::randn({4, s.patches, s.patch_len}, rng, false);
    {
      model.encoder.cls_token().zero_grad();
      Tape<double> tape;
      TapeScope<double> scope(tape);
      auto [e1, e2] = two_view_forward(x, model.encoder, rng);
      const auto l_p = scale(add(predictive_loss(e1.z_t, x, model.predictive),
                                 predictive_loss(e2.z_t, x, model.predictive)),
                             0.5);
      tape.backward(l_p);
      const auto g = model.encoder.cls_token().grad();
      zero_cls += std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; });
    }
    // each contrastive branch: zero gradient into its detached argument, nonzero into the other
    for (int branch = 0; branch < 2; ++branch) {
      auto z1 = testutil::randn({4, s.d_model}, rng, true);
      auto z2 = testutil::randn({4, s.d_model}, rng, true);
      Tape<double> tape;
      {
        TapeScope<double> scope(tape);
        const auto t = contrastive_loss(z1, z2, model.contrastive, true, true);
        tape.backward(branch == 0 ? t.l_c1 : t.l_c2);
      }
      const auto g_detached = branch == 0 ? z2.grad() : z1.grad();
      const auto g_live = branch == 0 ? z1.grad() : z2.grad();
      isolated += std::all_of(g_detached.begin(), g_detached.end(), [](double v) { return v == 0.0; });
      live += std::any_of(g_live.begin(), g_live.end(), [](double v) { return v != 0.0; });
    }
  }
  Outcome o;
  o.pass = zero_cls == trials && isolated == 2 * trials && live == 2 * trials;
  o.detail = "dL_P/dcls exactly 0 in " + std::to_string(zero_cls) + "/" + std::to_string(trials) +
             " seeds; detached branch grad exactly 0 in " + std::to_string(isolated) + "/" +
             std::to_string(2 * trials) + ", live branch nonzero in " + std::to_string(live) + "/" +
             std::to_string(2 * trials);
  return o;
}

Outcome patch_counts() {
  // brute force: pad by repeating the last row S times, slide a P-row window at stride S
  std::size_t configs = 0, mismatches = 0;
  for (std::size_t t = 1; t <= 64; ++t) {
    Matrix x(t, 1);
    for (std::size_t i = 0; i < t; ++i) x(i, 0) = static_cast<double>(i);
    for (std::size_t p = 1; p <= t; ++p)
      for (std::size_t s = 1; s <= p; ++s) {
        ++configs;
        std::vector<double> padded(x.values);
        for (std::size_t k = 0; k < s; ++k) padded.push_back(x(t - 1, 0));
        std::vector<std::vector<double>> windows;
        for (std::size_t start = 0; start + p <= padded.size(); start += s)
          windows.emplace_back(padded.begin() + static_cast<std::ptrdiff_t>(start),
                               padded.begin() + static_cast<std::ptrdiff_t>(start + p));
        const Matrix got = patch(x, {p, s});
        bool ok = patch_count(t, {p, s}) == windows.size() && got.rows == windows.size() && got.cols == p;
        for (std::size_t w = 0; ok && w < windows.size(); ++w)
          ok = std::equal(windows[w].begin(), windows[w].end(), got.values.begin() + static_cast<std::ptrdiff_t>(w * p));
        mismatches += !ok;
      }
  }
  EncoderConfig big;
  big.window = 512;
  big.patch_len = 16;
  big.patch_stride = 8;
  const bool headline = patch_count(512, {16, 8}) == 64 && big.tokens() == 65;
  Outcome o;
  o.pass = mismatches == 0 && headline;
  o.detail = "(512,16,8) -> " + std::to_string(patch_count(512, {16, 8})) + " patches, " +
             std::to_string(big.tokens()) + " tokens; brute force agrees on " +
             std::to_string(configs - mismatches) + "/" + std::to_string(configs) + " geometries";
  return o;
}

Outcome two_views() {
  EncoderConfig cfg;
  cfg.d_model = 16;
  cfg.blocks = 2;
  cfg.heads = 2;
  cfg.d_ff = 32;
  cfg.patch_len = cfg.patch_stride = 8;
  cfg.window = 32;
  cfg.dropout_embed = cfg.dropout_attn = cfg.dropout_ff = 0.1;
  auto no_drop = cfg;
  no_drop.dropout_embed = no_drop.dropout_attn = no_drop.dropout_ff = 0.0;
  Encoder<double> enc(cfg, 1), plain(no_drop, 1);
  NoGradScope<double> no_grad;
  std::size_t differ = 0, same_plain = 0, same_eval = 0;
  const std::size_t trials = 1000;
  for (std::size_t i = 0; i < trials; ++i) {
    RngStream rng = RngStream(7).derive("trial", i);
    const auto x = testutil::randn({1, cfg.patches(), 8}, rng, false);
    auto [a, b] = two_view_forward(x, enc, rng);
    differ += a.z_i.values() != b.z_i.values() || a.z_t.values() != b.z_t.values();
    auto [c, d] = two_view_forward(x, plain, rng);
    same_plain += c.z_i.values() == d.z_i.values() && c.z_t.values() == d.z_t.values();
    RngStream r1 = rng.derive("a"), r2 = rng.derive("b");
    same_eval += enc.forward(x, false, r1).values() == enc.forward(x, false, r2).values();
  }
  Outcome o;
  o.pass = differ * 100 >= 99 * trials && same_plain == trials && same_eval == trials;
  o.detail = "dropout 0.1 views differ in " + std::to_string(differ) + "/1000; dropout 0 identical in " +
             std::to_string(same_plain) + "/1000; eval mode identical in " + std::to_string(same_eval) + "/1000";
  return o;
}

Outcome metric_oracles() {
  RngStream rng(2024);
  std::size_t agree = 0, total = 0;
  for (int k : {2, 3, 5})
    for (int trial = 0; trial < 200; ++trial) {
      const auto [t, p] = testutil::random_labels(rng, k);
      const auto got = compute_classification_metrics(t, p, static_cast<std::size_t>(k));
      const auto want = testutil::oracle_metrics(t, p, k);
      ++total;
      agree += got.accuracy == want.accuracy && got.macro_f1 == want.macro_f1 && got.kappa == want.kappa;
    }
  std::vector<int> t, p;
  auto push = [&](int a, int b, int n) {
    t.insert(t.end(), n, a);
    p.insert(p.end(), n, b);
  };
  push(1, 1, 40);
  push(0, 0, 40);
  push(0, 1, 10);
  push(1, 0, 10);
  const auto fixed = compute_classification_metrics(t, p, 2);
  Outcome o;
  o.pass = agree == total && fixed.kappa == 0.6 && fixed.accuracy == 0.8;
  o.detail = "exact agreement on " + std::to_string(agree) + "/" + std::to_string(total) +
             " random cases (K=2,3,5); fixed binary case kappa = " + num(fixed.kappa, 17);
  return o;
}

Matrix eval_zi(const Encoder<double>& enc, const Tensor<double>& x) {
  NoGradScope<double> no_grad;
  RngStream r(0);
  const auto z = split_embeddings(enc.forward(x, false, r)).z_i;
  return Matrix(z.dim(0), z.dim(1), z.values());
}

double mean_column_std(const Matrix& m) {
  double total = 0;
  for (std::size_t j = 0; j < m.cols; ++j) {
    double mu = 0, ss = 0;
    for (std::size_t i = 0; i < m.rows; ++i) mu += m(i, j);
    mu /= static_cast<double>(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) ss += (m(i, j) - mu) * (m(i, j) - mu);
    total += std::sqrt(ss / static_cast<double>(m.rows));
  }
  return total / static_cast<double>(m.cols);
}

Outcome collapse_probe() {
  const auto t0 = Clock::now();
  SyntheticSpec spec;
  spec.generator = SyntheticGenerator::ClassFrequency;
  spec.instances = 64;
  spec.instance_length = 32;
  spec.noise = 0.3;
  const auto ds = generate_synthetic(spec);
  std::vector<Matrix> windows;
  for (std::size_t i = 0; i < ds.instance_count(); ++i) windows.push_back(instance_normalize(ds.instance(i)).x);
  EncoderConfig cfg;
  cfg.d_model = 32;
  cfg.blocks = 2;
  cfg.heads = 4;
  cfg.d_ff = 64;
  cfg.patch_len = cfg.patch_stride = 8;
  cfg.window = 32;
  const auto x = patch_batch<double>(windows, cfg.patch());

  double ratio[2] = {0, 0}, aniso[2] = {0, 0};
  for (int arm = 0; arm < 2; ++arm) {
    PretextModel<double> model(cfg, 1);
    const double std0 = mean_column_std(eval_zi(model.encoder, x));
    AdamW<double> opt({1e-3, 1e-4, 0.9, 0.999, 1e-8});
    const auto params = model.parameters();
    RngStream rng(5);
    for (int step = 0; step < 200; ++step) {
      Tape<double> tape;
      TapeScope<double> scope(tape);
      Tensor<double> loss;
      if (arm == 0) {
        loss = pretext_objective(model, x, x, PretextOptions{}, rng).objective;
      } else {
        // no prediction head, no stop-gradient: align the two views directly
        auto [r1, r2] = fork_view_streams(rng);
        const auto e1 = split_embeddings(model.encoder.forward(x, true, r1));
        const auto e2 = split_embeddings(model.encoder.forward(x, true, r2));
        loss = scale(mean(cosine_similarity(e1.z_i, e2.z_i)), -1.0);
      }
      zero_grads(params);
      tape.backward(loss);
      clip_grad_norm(params, 5.0);
      opt.step(params);
    }
    const Matrix z = eval_zi(model.encoder, x);
    ratio[arm] = mean_column_std(z) / std0;
    aniso[arm] = anisotropy_score(z);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ratio[0] > 0.1 && aniso[1] > 0.99 && secs < 60;
  o.detail = "intact: z_i std " + num(100 * ratio[0], 3) + "% of initial (anisotropy " + num(aniso[0], 3) +
             "); naive: std " + num(100 * ratio[1], 3) + "% of initial, anisotropy " + num(aniso[1], 5) + "; " +
             num(secs, 3) + " s";
  return o;
}

const char* kClassifyConfig = R"(run.task = classification
synthetic.generator = class-frequency
synthetic.classes = 2
synthetic.instances = 400
synthetic.instance_length = 64
synthetic.channels = 1
synthetic.noise = 0.3
patch.length = 8
patch.stride = 8
train.epochs = 50
eval.label_fractions = 0.1
)";

const char* kForecastConfig = R"(run.task = forecasting
synthetic.generator = ar-process
synthetic.length = 2000
synthetic.noise = 0.3
window.length = 64
window.horizon = 16
window.stride = 4
patch.length = 8
patch.stride = 8
train.epochs = 20
)";

RunConfig seeded(const char* text, std::uint64_t seed) {
  RunConfig cfg = parse_config(std::string(text) + "run.seed = " + std::to_string(seed) +
                               "\nsynthetic.seed = " + std::to_string(seed) + "\n");
  cfg.validate();
  return cfg;
}

double metric(const fs::path& metrics_json, const std::string& key) {
  return nlohmann::json::parse(slurp(metrics_json))["metrics"][key].get<double>();
}

struct ClassRuns {
  std::vector<double> probe_acc;
  std::vector<std::pair<double, double>> finetune;  // pretrained, random
  double secs_pretrain_probe = 0, secs_finetune = 0;
};

ClassRuns run_classification_seeds() {
  ClassRuns out;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t0 = Clock::now();
    const RunConfig cfg = seeded(kClassifyConfig, seed);
    const fs::path dir = scratch("classify-" + std::to_string(seed));
    cmd_pretrain(cfg, dir);
    const fs::path ck = dir / "checkpoint.tdrl";
    cmd_eval(cfg, ck, dir);
    out.probe_acc.push_back(metric(dir / "metrics.json", "accuracy"));
    out.secs_pretrain_probe += seconds_since(t0);

    const auto t1 = Clock::now();
    cmd_finetune(cfg, ck, dir);
    double pre = -1, rnd = -1;
    const auto rows = read_csv(dir / "finetune.csv");
    const auto acc_col = std::find(rows[0].begin(), rows[0].end(), "accuracy") - rows[0].begin();
    for (std::size_t i = 1; i < rows.size(); ++i) (rows[i][1] == "pretrained" ? pre : rnd) = std::stod(rows[i][acc_col]);
    out.finetune.emplace_back(pre, rnd);
    out.secs_finetune += seconds_since(t1);
  }
  return out;
}

Outcome e2e_classification(const ClassRuns& runs) {
  std::size_t hits = 0;
  std::string accs;
  for (double a : runs.probe_acc) {
    hits += a >= 0.95;
    accs += (accs.empty() ? "" : " ") + num(a, 3);
  }
  Outcome o;
  o.pass = hits >= 4 && runs.secs_pretrain_probe < 600;
  o.detail = "probe accuracy per seed [" + accs + "], " + std::to_string(hits) + "/5 >= 0.95; " +
             num(runs.secs_pretrain_probe, 3) + " s";
  return o;
}

Outcome semi_supervised(const ClassRuns& runs) {
  std::size_t hits = 0;
  std::string pairs;
  for (const auto& [pre, rnd] : runs.finetune) {
    hits += pre >= rnd;
    pairs += (pairs.empty() ? "" : " ") + num(pre, 3) + "/" + num(rnd, 3);
  }
  Outcome o;
  o.pass = hits >= 4;
  o.detail = "fraction 0.1 accuracy pretrained/random [" + pairs + "], pretrained >= random in " +
             std::to_string(hits) + "/5; " + num(runs.secs_finetune, 3) + " s";
  return o;
}

Outcome e2e_forecasting() {
  const auto t0 = Clock::now();
  std::size_t hits = 0;
  std::string pairs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const RunConfig cfg = seeded(kForecastConfig, seed);
    const fs::path dir = scratch("forecast-" + std::to_string(seed));
    cmd_pretrain(cfg, dir);
    cmd_eval(cfg, dir / "checkpoint.tdrl", dir);
    const double mse = metric(dir / "metrics.json", "mse"), naive = metric(dir / "metrics.json", "naive_mse");
    hits += mse < naive;
    pairs += (pairs.empty() ? "" : " ") + num(mse, 3) + "/" + num(naive, 3);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = hits >= 4 && secs < 600;
  o.detail = "test MSE probe/last-value [" + pairs + "], probe better in " + std::to_string(hits) + "/5; " +
             num(secs, 3) + " s";
  return o;
}

const char* kSmallForecast = R"(run.task = forecasting
run.seed = 11
run.precision = f64
synthetic.generator = sinusoid-mix
synthetic.length = 400
window.length = 32
window.horizon = 4
window.stride = 4
patch.length = 8
patch.stride = 8
encoder.d_model = 16
encoder.blocks = 1
encoder.heads = 2
encoder.d_ff = 32
train.epochs = 3
train.batch_size = 8
eval.probe_epochs = 3
)";

Outcome determinism() {
  const RunConfig cfg = parse_config(kSmallForecast);
  const fs::path a = scratch("determinism-a"), b = scratch("determinism-b");
  cmd_pretrain(cfg, a);
  cmd_pretrain(cfg, b);
  const bool csv_same = slurp(a / "loss.csv") == slurp(b / "loss.csv") && !slurp(a / "loss.csv").empty();
  const std::string file = slurp(a / "checkpoint.tdrl");
  const bool ckpt_same = file == slurp(b / "checkpoint.tdrl");

  const Checkpoint ck = load_checkpoint((a / "checkpoint.tdrl").string());  // verifies the CRC
  const auto bytes = serialize_checkpoint(ck);
  const bool reserialized = std::string(bytes.begin(), bytes.end()) == file;
  const auto model = load_model<double>(ck);
  bool params_bitwise = true;
  for (const auto& p : model.parameters())
    params_bitwise = params_bitwise && ck.get_tensor<double>("model/" + p.name) == p.tensor.values();
  auto corrupt = bytes;
  corrupt[corrupt.size() / 3] ^= 1;
  bool crc_catches = false;
  try {
    deserialize_checkpoint(corrupt);
  } catch (const Error& e) {
    crc_catches = e.code() == ErrorCode::CorruptChecksum;
  }
  Outcome o;
  o.pass = csv_same && ckpt_same && reserialized && params_bitwise && crc_catches;
  o.detail = std::string("loss CSVs ") + (csv_same ? "byte-identical" : "DIFFER") + ", checkpoints " +
             (ckpt_same ? "byte-identical" : "DIFFER") + ", load+save " + (reserialized ? "lossless" : "CHANGED") +
             ", parameters " + (params_bitwise ? "bitwise equal" : "DIFFER") + ", flipped bit " +
             (crc_catches ? "rejected by CRC" : "NOT detected");
  return o;
}

Outcome ablation_shape() {
  const char* base = R"(run.task = classification
run.seed = 4
synthetic.generator = class-frequency
synthetic.instances = 40
synthetic.instance_length = 32
patch.length = 8
patch.stride = 8
encoder.d_model = 16
encoder.blocks = 1
encoder.heads = 2
encoder.d_ff = 32
train.epochs = 1
train.batch_size = 8
eval.probe_epochs = 2
)";
  const std::vector<std::pair<std::string, std::size_t>> axes{
      {"augmentation", 7}, {"pooling", 4}, {"stop_gradient", 2}, {"lambda", 7}};
  bool ok = true;
  std::string counts;
  std::set<std::string> fingerprints;
  for (const auto& [axis, expected] : axes) {
    const RunConfig cfg = parse_config(std::string(base) + "ablation.axis = " + axis + "\n");
    const fs::path dir = scratch("ablate-" + axis);
    cmd_ablate(cfg, dir);
    const auto rows = read_csv(dir / "ablation.csv");
    const std::size_t arms = rows.size() - 1;
    ok = ok && arms == expected;
    for (std::size_t i = 1; i < rows.size(); ++i) fingerprints.insert(rows[i][3]);
    counts += (counts.empty() ? "" : " / ") + std::to_string(arms);
  }
  Outcome o;
  o.pass = ok && fingerprints.size() == 1;
  o.detail = "arms augmentation/pooling/stop-gradient/lambda = " + counts + "; " +
             std::to_string(fingerprints.size()) + " distinct split fingerprint(s)";
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%s] %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  };

  report("gradient-oracle", gradient_oracle);
  report("routing", routing);
  report("patch-count", patch_counts);
  report("two-view", two_views);
  report("metric-oracles", metric_oracles);
  report("collapse-probe", collapse_probe);
  ClassRuns runs;
  std::string class_error;
  try {
    runs = run_classification_seeds();
  } catch (const std::exception& e) {
    class_error = e.what();
  }
  auto guarded = [&](Outcome (*fn)(const ClassRuns&)) {
    return [&, fn]() -> Outcome {
      if (!class_error.empty()) return {false, "exception: " + class_error};
      return fn(runs);
    };
  };
  report("e2e-classification", guarded(e2e_classification));
  report("e2e-forecasting", e2e_forecasting);
  report("semi-supervised", guarded(semi_supervised));
  report("determinism", determinism);
  report("ablation-shape", ablation_shape);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
