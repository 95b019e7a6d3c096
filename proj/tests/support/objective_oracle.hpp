#pragma once

// Gradient check of the full pretext objective against central differences.
// With the stop-gradient on, the reference function holds the detached
// targets at their base values and is rebuilt here from public pieces, so
// the library's contrastive_loss is not its own oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "test_util.hpp"
#include "timedrl/optim.hpp"
#include "timedrl/pretext.hpp"

namespace testutil {

struct ObjectiveSetup {
  std::size_t d_model = 16;
  std::size_t blocks = 2;
  std::size_t patches = 6;
  std::size_t batch = 4;
  std::size_t patch_len = 4;
  std::size_t channels = 1;
  double lambda = 1.0;
  bool stop_gradient = true;
  bool dropout = true;
};

inline timedrl::EncoderConfig objective_encoder(const ObjectiveSetup& s) {
  timedrl::EncoderConfig c;
  c.d_model = s.d_model;
  c.blocks = s.blocks;
  c.heads = 2;
  c.d_ff = 2 * s.d_model;
  c.dropout_embed = c.dropout_attn = c.dropout_ff = 0.1;
  c.patch_len = c.patch_stride = s.patch_len;
  c.channels = s.channels;
  c.window = (s.patches - 1) * s.patch_len;  // floor((T-P)/S) + 2 = patches
  return c;
}

// Reference objective: L_P + lambda * L_C with fixed dropout streams. When
// `targets` is non-null they replace the stop-gradient branches.
inline double reference_objective(timedrl::PretextModel<double>& model, const Tensor<double>& view,
                                  const RngStream& base_rng, const ObjectiveSetup& s,
                                  const std::vector<Tensor<double>>* targets,
                                  std::vector<Tensor<double>>* z_out = nullptr) {
  using namespace timedrl;
  RngStream rng = base_rng;
  auto [r1, r2] = fork_view_streams(rng);
  const auto e1 = split_embeddings(model.encoder.forward(view, s.dropout, r1));
  const auto e2 = split_embeddings(model.encoder.forward(view, s.dropout, r2));
  auto mse = [&](const Tensor<double>& z_t) {
    const Tensor<double> d = sub(model.predictive.forward(z_t), view);
    return mean(mul(d, d)).item();
  };
  const double l_p = 0.5 * (mse(e1.z_t) + mse(e2.z_t));
  if (z_out) *z_out = {e1.z_i, e2.z_i};
  const Tensor<double> p1 = model.contrastive.forward(e1.z_i, true);
  const Tensor<double> p2 = model.contrastive.forward(e2.z_i, true);
  const Tensor<double>& t2 = targets ? (*targets)[1] : e2.z_i;
  const Tensor<double>& t1 = targets ? (*targets)[0] : e1.z_i;
  // cosine computed by hand: sum(a*b) / (|a| |b|) per row
  auto neg_cos = [](const Tensor<double>& a, const Tensor<double>& b) {
    const std::size_t n = a.dim(0), d = a.dim(1);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0, na = 0, nb = 0;
      for (std::size_t j = 0; j < d; ++j) {
        const double x = a.values()[i * d + j], y = b.values()[i * d + j];
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
      total += dot / std::max(std::sqrt(na) * std::sqrt(nb), 1e-8);
    }
    return -total / static_cast<double>(n);
  };
  const double l_c = 0.5 * (neg_cos(p1, t2) + neg_cos(p2, t1));
  return l_p + s.lambda * l_c;
}

struct ObjectiveCheck {
  double max_rel_error = 0;
  double analytic_value = 0;
  double reference_value = 0;
  std::size_t coordinates = 0;
};

// Compares analytic gradients of every parameter with central differences.
// stride > 1 samples every stride-th coordinate of each parameter.
inline ObjectiveCheck check_objective_gradient(std::uint64_t seed, const ObjectiveSetup& s, std::size_t stride = 1,
                                               double h = 1e-6) {
  using namespace timedrl;
  PretextModel<double> model(objective_encoder(s), seed);
  RngStream data_rng = RngStream(seed).derive("oracle-data");
  const Tensor<double> view =
      randn({s.batch, s.patches, s.channels * s.patch_len}, data_rng, false);
  const RngStream base = RngStream(seed).derive("oracle-dropout");

  ObjectiveCheck out;
  const auto params = model.parameters();
  zero_grads(params);
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    RngStream rng = base;
    PretextOptions opt;
    opt.lambda = s.lambda;
    opt.stop_gradient = s.stop_gradient;
    opt.dropout = s.dropout;
    const auto loss = pretext_objective(model, view, view, opt, rng);
    out.analytic_value = loss.values.total;
    tape.backward(loss.objective);
  }

  NoGradScope<double> no_grad;
  std::vector<Tensor<double>> frozen;
  out.reference_value = reference_objective(model, view, base, s, nullptr, &frozen);
  for (auto& t : frozen) t = Tensor<double>(t.shape(), t.values(), false);
  const std::vector<Tensor<double>>* targets = s.stop_gradient ? &frozen : nullptr;

  for (const auto& p : params) {
    Tensor<double> leaf = p.tensor;
    const std::vector<double> g = leaf.grad();
    auto f = [&] { return reference_objective(model, view, base, s, targets); };
    auto data = leaf.mutable_data();
    for (std::size_t i = 0; i < g.size(); i += stride) {
      const double x0 = data[i];
      data[i] = x0 + h;
      const double fp = f();
      data[i] = x0 - h;
      const double fm = f();
      data[i] = x0;
      const double fd = (fp - fm) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(g[i]), 1e-3});
      out.max_rel_error = std::max(out.max_rel_error, std::abs(fd - g[i]) / denom);
      ++out.coordinates;
    }
  }
  return out;
}

}  // namespace testutil
