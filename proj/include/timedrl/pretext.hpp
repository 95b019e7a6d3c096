#pragma once

#include <cstdint>
#include <utility>

#include "timedrl/encoder.hpp"
#include "timedrl/ops.hpp"

namespace timedrl {

// p_theta: a single linear map D -> C*P, no activation.
template <typename Real>
class PredictiveHead {
 public:
  PredictiveHead(std::size_t d_model, std::size_t token_width, std::uint64_t seed);

  Tensor<Real> forward(const Tensor<Real>& z_t) const { return linear(z_t, weight, bias); }
  ParameterList<Real> parameters() const;

  Tensor<Real> weight;  // [C*P, D]
  Tensor<Real> bias;    // [C*P]
};

// c_theta: linear(D -> D_b) -> BatchNorm -> ReLU -> linear(D_b -> D).
template <typename Real>
class ContrastiveHead {
 public:
  // bottleneck == 0 selects max(8, D/4); it must stay below D.
  ContrastiveHead(std::size_t d_model, std::uint64_t seed, std::size_t bottleneck = 0);

  // training selects batch statistics (and updates the running ones).
  Tensor<Real> forward(const Tensor<Real>& z_i, bool training);
  ParameterList<Real> parameters() const;
  std::size_t bottleneck() const { return w1.dim(0); }

  Tensor<Real> w1;  // [D_b, D]
  Tensor<Real> bn_gamma, bn_beta;
  BatchNormStats bn_stats;
  Tensor<Real> w2;  // [D, D_b]
};

// pooling selects the instance embedding fed to the contrastive head: the
// [CLS] row by default, or a pooling of z_t (ablation). All-pooling widens the
// contrastive head input to T_p * D.
template <typename Real>
struct PretextModel {
  Encoder<Real> encoder;
  PredictiveHead<Real> predictive;
  ContrastiveHead<Real> contrastive;
  PoolMethod pooling = PoolMethod::Cls;

  PretextModel(const EncoderConfig& config, std::uint64_t seed, PoolMethod pooling = PoolMethod::Cls);
  ParameterList<Real> parameters() const;
  Tensor<Real> instance_embedding(const DualEmbedding<Real>& e) const {
    return pooling == PoolMethod::Cls ? e.z_i : pool(e.z_t, pooling);
  }
};

std::size_t instance_dim(const EncoderConfig& config, PoolMethod pooling);

// MSE between p_theta(z_t) and the patched input, averaged over elements.
template <typename Real>
Tensor<Real> predictive_loss(const Tensor<Real>& z_t, const Tensor<Real>& x_patched, const PredictiveHead<Real>& head);

// Two training-mode passes of the same input; each draws fresh dropout masks.
// The single-stream form forks one child stream per pass from `rng`.
template <typename Real>
std::pair<DualEmbedding<Real>, DualEmbedding<Real>> two_view_forward(const Tensor<Real>& x_patched,
                                                                     const Encoder<Real>& encoder, RngStream& rng);
template <typename Real>
std::pair<DualEmbedding<Real>, DualEmbedding<Real>> two_view_forward(const Tensor<Real>& x_patched,
                                                                     const Encoder<Real>& encoder,
                                                                     RngStream& view1_rng, RngStream& view2_rng);

// Child streams for the two passes of one step.
std::pair<RngStream, RngStream> fork_view_streams(RngStream& rng);

template <typename Real>
struct ContrastiveTerms {
  Tensor<Real> l_c1, l_c2, l_c;
};

// L_C1 = -cos(c(z1_i), sg(z2_i)), L_C2 = -cos(c(z2_i), sg(z1_i)), batch-mean,
// L_C = (L_C1 + L_C2) / 2. stop_gradient=false drops the sg() for ablation.
template <typename Real>
ContrastiveTerms<Real> contrastive_loss(const Tensor<Real>& z1_i, const Tensor<Real>& z2_i,
                                        ContrastiveHead<Real>& head, bool training, bool stop_gradient = true);

struct LossValues {
  double l_p1 = 0, l_p2 = 0, l_p = 0, l_c1 = 0, l_c2 = 0, l_c = 0, total = 0;
};

// L_P = (L_P1 + L_P2)/2, L_C = (L_C1 + L_C2)/2, total = L_P + lambda * L_C.
LossValues combine_losses(double l_p1, double l_p2, double l_c1, double l_c2, double lambda);

template <typename Real>
struct LossBreakdown {
  LossValues values;
  double lambda = 1.0;
  Tensor<Real> objective;  // differentiable total
};

template <typename Real>
LossBreakdown<Real> total_loss(const Tensor<Real>& l_p1, const Tensor<Real>& l_p2, const ContrastiveTerms<Real>& c,
                               double lambda);

struct PretextOptions {
  double lambda = 1.0;
  bool stop_gradient = true;
  bool dropout = true;      // dropout inside the encoder passes
  bool batch_stats = true;  // contrastive-head BatchNorm mode
};

// Full objective for one batch. view1/view2 are the patched inputs of the
// two passes (identical unless an augmentation ablation perturbs them); each
// view reconstructs its own input through the shared predictive head.
template <typename Real>
LossBreakdown<Real> pretext_objective(PretextModel<Real>& model, const Tensor<Real>& view1, const Tensor<Real>& view2,
                                      const PretextOptions& options, RngStream& rng);

}  // namespace timedrl
