#include <chrono>
#include <cmath>
#include <functional>

#include "doctest.h"
#include "../support/objective_oracle.hpp"
#include "timedrl/error.hpp"
#include "timedrl/pretext.hpp"

using namespace timedrl;
using testutil::randn;

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

}  // namespace

TEST_CASE("predictive loss is the element mean of squared error") {
  PredictiveHead<double> head(4, 3, 1);
  RngStream rng(2);
  const auto z = randn({2, 5, 4}, rng, false);
  const auto x = randn({2, 5, 3}, rng, false);
  const double got = predictive_loss(z, x, head).item();
  const auto& w = head.weight.values();
  double expect = 0;
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t o = 0; o < 3; ++o) {
      double y = head.bias.values()[o];
      for (std::size_t k = 0; k < 4; ++k) y += w[o * 4 + k] * z.values()[r * 4 + k];
      const double d = y - x.values()[r * 3 + o];
      expect += d * d;
    }
  CHECK(got == doctest::Approx(expect / 30).epsilon(1e-12));
  CHECK(code_of([&] { predictive_loss(z, randn({2, 5, 2}, rng, false), head); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("two views differ only through dropout") {
  auto cfg = testutil::objective_encoder({});
  Encoder<double> enc(cfg, 3);
  RngStream data(4);
  const auto x = randn({4, 6, 4}, data, false);
  RngStream rng(5);
  const auto [a, b] = two_view_forward(x, enc, rng);
  CHECK(a.z_i.values() != b.z_i.values());

  cfg.dropout_embed = cfg.dropout_attn = cfg.dropout_ff = 0;
  Encoder<double> plain(cfg, 3);
  const auto [c, d] = two_view_forward(x, plain, rng);
  CHECK(c.z_i.values() == d.z_i.values());
  CHECK(c.z_t.values() == d.z_t.values());
}

TEST_CASE("loss combination") {
  const auto v = combine_losses(1.0, 3.0, -0.5, -0.7, 2.0);
  CHECK(v.l_p == 2.0);
  CHECK(v.l_c == doctest::Approx(-0.6));
  CHECK(v.total == doctest::Approx(0.8));
  CHECK(combine_losses(1.0, 3.0, -0.5, -0.7, 0.0).total == 2.0);
  CHECK(code_of([] { combine_losses(1, 1, 1, 1, -1); }) == ErrorCode::InvalidParam);
}

TEST_CASE("stop-gradient isolates the target branch") {
  ContrastiveHead<double> head(16, 1);
  RngStream rng(7);
  for (bool sg : {true, false}) {
    CAPTURE(sg);
    auto z1 = randn({4, 16}, rng, true);
    auto z2 = randn({4, 16}, rng, true);
    Tape<double> tape;
    {
      TapeScope<double> scope(tape);
      tape.backward(contrastive_loss(z1, z2, head, true, sg).l_c1);
    }
    double g1 = 0, g2 = 0;
    for (double g : z1.grad()) g1 += std::abs(g);
    for (double g : z2.grad()) g2 += std::abs(g);
    CHECK(g1 > 0);
    if (sg)
      CHECK(g2 == 0.0);
    else
      CHECK(g2 > 0);
  }
}

TEST_CASE("contrastive loss value and guards") {
  ContrastiveHead<double> head(16, 2);
  RngStream rng(8);
  const auto z1 = randn({5, 16}, rng, false);
  const auto z2 = randn({5, 16}, rng, false);
  const auto t = contrastive_loss(z1, z2, head, true, true);
  CHECK(t.l_c.item() == doctest::Approx(0.5 * (t.l_c1.item() + t.l_c2.item())));
  CHECK(t.l_c1.item() >= -1.0);
  CHECK(t.l_c1.item() <= 1.0);
  CHECK(code_of([&] { contrastive_loss(randn({1, 16}, rng, false), randn({1, 16}, rng, false), head, true); }) ==
        ErrorCode::DegenerateBatch);
  CHECK(code_of([&] { contrastive_loss(z1, randn({5, 8}, rng, false), head, true); }) == ErrorCode::ShapeMismatch);
  CHECK(head.bottleneck() == 8);
  CHECK(ContrastiveHead<double>(64, 1).bottleneck() == 16);
  CHECK(code_of([] { ContrastiveHead<double>(8, 1); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("pooled instance embedding feeds a matching head") {
  const auto cfg = testutil::objective_encoder({});
  CHECK(instance_dim(cfg, PoolMethod::Cls) == 16);
  CHECK(instance_dim(cfg, PoolMethod::All) == 96);
  for (auto m : {PoolMethod::Cls, PoolMethod::Last, PoolMethod::Gap, PoolMethod::All}) {
    PretextModel<double> model(cfg, 1, m);
    RngStream rng(2);
    const auto x = randn({4, 6, 4}, rng, false);
    PretextOptions opt;
    CHECK(std::isfinite(pretext_objective(model, x, x, opt, rng).values.total));
  }
}

TEST_CASE("lambda zero leaves the [CLS] token without gradient") {
  PretextModel<double> model(testutil::objective_encoder({}), 3);
  RngStream rng(4);
  const auto x = randn({4, 6, 4}, rng, false);
  PretextOptions opt;
  opt.lambda = 0.0;
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    const auto loss = pretext_objective(model, x, x, opt, rng);
    CHECK(loss.values.total == loss.values.l_p);
    tape.backward(loss.objective);
  }
  for (double g : model.encoder.cls_token().grad()) CHECK(g == 0.0);
}

TEST_CASE("objective gradient matches finite differences") {
  for (bool sg : {true, false}) {
    CAPTURE(sg);
    testutil::ObjectiveSetup s;
    s.stop_gradient = sg;
    s.lambda = 0.7;
    const auto r = testutil::check_objective_gradient(11, s, 3);
    CHECK(r.analytic_value == doctest::Approx(r.reference_value).epsilon(1e-12));
    CHECK(r.coordinates > 500);
    CHECK(r.max_rel_error < 1e-4);
  }
}
