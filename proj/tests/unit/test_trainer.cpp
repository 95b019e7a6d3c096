#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include "doctest.h"
#include "timedrl/checkpoint.hpp"
#include "timedrl/error.hpp"
#include "timedrl/optim.hpp"
#include "timedrl/synthetic.hpp"
#include "timedrl/trainer.hpp"

using namespace timedrl;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

void set_grad(Tensor<double>& t, const std::vector<double>& g) {
  t.zero_grad();
  t.node()->accumulate_grad(g);
}

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.d_model = 16;
  c.blocks = 1;
  c.heads = 2;
  c.d_ff = 32;
  c.patch_len = 8;
  c.patch_stride = 8;
  c.window = 32;
  return c;
}

std::vector<Matrix> sinusoid_windows(std::size_t length, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.length = length;
  spec.seed = seed;
  const auto windows = make_windows(generate_synthetic(spec), 32, 0, 4);
  std::vector<Matrix> out;
  for (const auto& w : windows) out.push_back(instance_normalize(w.x).x);
  return out;
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 8;
  t.seed = 17;
  return t;
}

fs::path tmp_dir() {
  fs::path p = fs::path(TIMEDRL_TEST_TMP) / "trainer";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("one AdamW step on a scalar matches hand arithmetic") {
  const double theta = 0.75, g = -0.3, lr = 0.01, wd = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Tensor<double> p({1}, {theta}, true);
  set_grad(p, {g});
  AdamW<double> opt({lr, wd, b1, b2, eps});
  opt.step({{"p", p, true}});
  const double m_hat = ((1 - b1) * g) / (1 - b1);
  const double v_hat = ((1 - b2) * g * g) / (1 - b2);
  const double expect = theta * (1 - lr * wd) - lr * m_hat / (std::sqrt(v_hat) + eps);
  CHECK(std::abs(p.values()[0] - expect) < 1e-12);
  CHECK(opt.step_count() == 1);

  // second step with a new gradient
  set_grad(p, {0.2});
  opt.step({{"p", p, true}});
  const double m2 = b1 * (1 - b1) * g + (1 - b1) * 0.2;
  const double v2 = b2 * (1 - b2) * g * g + (1 - b2) * 0.04;
  const double expect2 = expect * (1 - lr * wd) - lr * (m2 / (1 - b1 * b1)) / (std::sqrt(v2 / (1 - b2 * b2)) + eps);
  CHECK(std::abs(p.values()[0] - expect2) < 1e-12);
}

TEST_CASE("AdamW decay is decoupled and skips exempt parameters") {
  Tensor<double> w({2}, {1.0, -2.0}, true), b({2}, {1.0, -2.0}, true);
  set_grad(w, {0, 0});
  set_grad(b, {0, 0});
  AdamW<double> opt({0.1, 0.01, 0.9, 0.999, 1e-8});
  opt.step({{"w", w, true}, {"b", b, false}});
  CHECK(w.values()[0] == 1.0 * (1 - 0.1 * 0.01));
  CHECK(w.values()[1] == -2.0 * (1 - 0.1 * 0.01));
  CHECK(b.values() == std::vector<double>{1.0, -2.0});

  Tensor<double> q({1}, {3.0}, true);
  set_grad(q, {0});
  AdamW<double> none({0.1, 0.0, 0.9, 0.999, 1e-8});
  none.step({{"q", q, true}});
  CHECK(q.values()[0] == 3.0);
}

TEST_CASE("AdamW rejects non-finite gradients before touching state") {
  Tensor<double> a({1}, {1.0}, true), b({1}, {2.0}, true);
  set_grad(a, {0.5});
  set_grad(b, {std::numeric_limits<double>::quiet_NaN()});
  AdamW<double> opt;
  try {
    opt.step({{"a", a, true}, {"bad.weight", b, true}});
    FAIL("expected NonFiniteGradient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteGradient);
    CHECK(std::string(e.what()).find("bad.weight") != std::string::npos);
  }
  CHECK(a.values()[0] == 1.0);
  CHECK(opt.step_count() == 0);
  CHECK(opt.moments().empty());
}

TEST_CASE("gradient clipping bounds the global norm") {
  Tensor<double> a({2}, {0, 0}, true);
  set_grad(a, {3.0, 4.0});
  const ParameterList<double> ps{{"a", a, true}};
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(grad_norm(ps) == doctest::Approx(1.0));
  CHECK(clip_grad_norm(ps, 0.0) == doctest::Approx(1.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
}

TEST_CASE("checkpoint round trip, canonical bytes and error paths") {
  Checkpoint c;
  c.put_tensor<double>("b/double", {2, 2}, {1.0, -0.0, 1e-300, 3.5});
  c.put_tensor<float>("a/float", {3}, {1.5f, -2.25f, 7.0f});
  c.put_u64("c/ints", {1, 2, 1ull << 60});
  c.put_text("d/text", "key=value\nother=1");
  const auto bytes = serialize_checkpoint(c);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.get_tensor<double>("b/double") == std::vector<double>{1.0, -0.0, 1e-300, 3.5});
  CHECK(std::signbit(back.get_tensor<double>("b/double")[1]));
  CHECK(back.get_tensor<float>("a/float") == std::vector<float>{1.5f, -2.25f, 7.0f});
  CHECK(back.get_u64("c/ints") == std::vector<std::uint64_t>{1, 2, 1ull << 60});
  CHECK(back.get_text("d/text") == "key=value\nother=1");
  CHECK(back.shape("b/double") == std::vector<std::uint64_t>{2, 2});
  CHECK(serialize_checkpoint(back) == bytes);

  const std::uint8_t digits[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
  CHECK(crc32_of(digits, 9) == 0xCBF43926u);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 7);
  CHECK(code_of([&] { deserialize_checkpoint(truncated); }) == ErrorCode::CorruptChecksum);
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK(code_of([&] { deserialize_checkpoint(flipped); }) == ErrorCode::CorruptChecksum);
  Checkpoint newer = c;
  newer.format_version = kCheckpointVersion + 1;
  CHECK(code_of([&] { deserialize_checkpoint(serialize_checkpoint(newer)); }) == ErrorCode::VersionMismatch);
  CHECK(code_of([] { load_checkpoint((tmp_dir() / "missing.tdrl").string()); }) == ErrorCode::IoError);

  const auto path = (tmp_dir() / "rt.tdrl").string();
  save_checkpoint(path, c);
  const auto path2 = (tmp_dir() / "rt2.tdrl").string();
  save_checkpoint(path2, load_checkpoint(path));
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);

  std::ofstream(path, std::ios::binary | std::ios::trunc).write(s1.data(), 20);
  CHECK(code_of([&] { load_checkpoint(path); }) == ErrorCode::CorruptChecksum);
}

TEST_CASE("model parameters survive a checkpoint bitwise") {
  PretextModel<double> model(tiny_encoder(), 5, PoolMethod::Gap);
  model.contrastive.bn_stats.running_mean[0] = 0.25;
  Checkpoint c;
  store_model(c, model);
  const auto loaded = load_model<double>(deserialize_checkpoint(serialize_checkpoint(c)));
  CHECK(loaded.pooling == PoolMethod::Gap);
  const auto a = model.parameters(), b = loaded.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tensor.values() == b[i].tensor.values());
  CHECK(loaded.contrastive.bn_stats.running_mean[0] == 0.25);
}

TEST_CASE("pretraining is deterministic for a fixed seed") {
  const auto train = sinusoid_windows(300, 1), val = sinusoid_windows(120, 2);
  auto run = [&] {
    PretextModel<double> model(tiny_encoder(), 3);
    Pretrainer<double> t(model, quick_train(2), train, val);
    t.run();
    return std::make_pair(t.history(), capture_state(model).params);
  };
  const auto [h1, p1] = run();
  const auto [h2, p2] = run();
  REQUIRE(h1.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    CHECK(h1[e].train.total == h2[e].train.total);
    CHECK(h1[e].train.l_p == h2[e].train.l_p);
    CHECK(h1[e].val->total == h2[e].val->total);
  }
  CHECK(p1 == p2);
}

TEST_CASE("resuming from a checkpoint continues the uninterrupted run exactly") {
  const auto train = sinusoid_windows(300, 1), val = sinusoid_windows(120, 2);
  PretextModel<double> full(tiny_encoder(), 3);
  Pretrainer<double> straight(full, quick_train(4), train, val);
  straight.run();

  PretextModel<double> first(tiny_encoder(), 3);
  Pretrainer<double> half(first, quick_train(4), train, val);
  half.run(2);
  CHECK(half.history().size() == 2);
  Checkpoint c;
  half.save_state(c);
  const Checkpoint restored = deserialize_checkpoint(serialize_checkpoint(c));

  PretextModel<double> second(tiny_encoder(), 99);  // different init, overwritten by the load
  Pretrainer<double> resumed(second, quick_train(4), train, val);
  resumed.load_state(restored);
  resumed.run();
  REQUIRE(resumed.history().size() == 4);
  for (std::size_t e = 0; e < 4; ++e) {
    CAPTURE(e);
    CHECK(resumed.history()[e].train.total == straight.history()[e].train.total);
    CHECK(resumed.history()[e].val->total == straight.history()[e].val->total);
  }
  CHECK(capture_state(second).params == capture_state(full).params);
  CHECK(resumed.best_epoch() == straight.best_epoch());
}

TEST_CASE("lambda zero leaves the [CLS] token unchanged") {
  const auto train = sinusoid_windows(300, 1);
  PretextModel<double> model(tiny_encoder(), 3);
  const auto before = model.encoder.cls_token().values();
  const auto w_before = model.encoder.token_weight().values();
  auto cfg = quick_train(2);
  cfg.lambda = 0.0;
  Pretrainer<double> t(model, cfg, train, {});
  t.run();
  CHECK(model.encoder.cls_token().values() == before);
  CHECK(model.encoder.token_weight().values() != w_before);
}

TEST_CASE("predictive loss halves within 30 epochs on sinusoids") {
  const auto train = sinusoid_windows(400, 4);
  PretextModel<double> model(tiny_encoder(), 8);
  Pretrainer<double> t(model, quick_train(30), train, {});
  const double initial = t.evaluate(train).l_p;
  t.run();
  REQUIRE(t.history().size() == 30);
  const double final_lp = t.history().back().train.l_p;
  MESSAGE("initial L_P " << initial << ", final train L_P " << final_lp);
  CHECK(final_lp < 0.5 * initial);
}

TEST_CASE("early stopping keeps the best validation state") {
  const auto train = sinusoid_windows(300, 1), val = sinusoid_windows(120, 2);
  PretextModel<double> model(tiny_encoder(), 3);
  auto cfg = quick_train(12);
  cfg.patience = 1;
  cfg.adam.lr = 0.05;  // noisy enough to trigger a stop
  const auto result = pretrain(model, train, val, cfg);
  CHECK(result.history.size() <= 12);
  double best = result.history[0].val->total;
  for (const auto& r : result.history) best = std::min(best, r.val->total);
  CHECK(result.history[result.best_epoch - 1].val->total == best);
  if (result.stopped_early) CHECK(result.history.size() < 12);
}

TEST_CASE("pretrainer guards") {
  PretextModel<double> model(tiny_encoder(), 3);
  CHECK(code_of([&] { Pretrainer<double>(model, quick_train(1), {}, {}); }) == ErrorCode::EmptyDataset);
  CHECK(code_of([&] { Pretrainer<double>(model, quick_train(1), {Matrix(32, 1)}, {}); }) ==
        ErrorCode::DegenerateBatch);
  auto train = sinusoid_windows(300, 1);
  train[0].values[0] = std::numeric_limits<double>::infinity();
  auto cfg = quick_train(1);
  cfg.batch_size = static_cast<std::size_t>(train.size());
  Pretrainer<double> t(model, cfg, train, {});
  CHECK(code_of([&] { t.run(); }) == ErrorCode::NonFiniteLoss);
}
