#pragma once

#include <cstddef>
#include <vector>

#include "timedrl/rng.hpp"
#include "timedrl/tensor.hpp"

// Differentiable primitives. Each op checks shapes, computes its forward
// value, and, when a tape is active and an input requires grad, records the
// matching vector-Jacobian product.
//
// Broadcasting is limited to "suffix" broadcasting: in add/sub/mul the second
// operand may have the trailing shape of the first (e.g. a bias [D] against
// activations [B, N, D]); its gradient is summed over the leading extents.

namespace timedrl {

template <typename Real> Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> scale(const Tensor<Real>& a, Real factor);
template <typename Real> Tensor<Real> relu(const Tensor<Real>& a);
// Exact (erf) GELU.
template <typename Real> Tensor<Real> gelu(const Tensor<Real>& a);

// a [..., m, k] x b [..., k, n]. Leading extents must match, or b may be a
// plain matrix shared across a's batch.
template <typename Real> Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b);

// x [..., in] * weight[out, in]^T + bias[out]; bias may be undefined.
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& weight, const Tensor<Real>& bias);

template <typename Real> Tensor<Real> transpose(const Tensor<Real>& x, std::size_t axis0, std::size_t axis1);
template <typename Real> Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);
template <typename Real> Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, std::size_t axis);
// Half-open range [begin, end) along one axis.
template <typename Real>
Tensor<Real> slice(const Tensor<Real>& x, std::size_t axis, std::size_t begin, std::size_t end);

template <typename Real> Tensor<Real> sum(const Tensor<Real>& x);
template <typename Real> Tensor<Real> sum(const Tensor<Real>& x, std::size_t axis);
template <typename Real> Tensor<Real> mean(const Tensor<Real>& x);
template <typename Real> Tensor<Real> mean(const Tensor<Real>& x, std::size_t axis);

template <typename Real> Tensor<Real> softmax(const Tensor<Real>& x, std::size_t axis);

// Normalizes over the last axis; eps sits inside the square root.
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                        Real eps = static_cast<Real>(Epsilons::layer_norm));

struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;

  static BatchNormStats identity(std::size_t features) {
    return {std::vector<double>(features, 0.0), std::vector<double>(features, 1.0), 0.1};
  }
};

// x [B, F]. Training normalizes with the (biased) batch variance and folds
// the unbiased variance into the running estimate:
//   running <- (1 - momentum) * running + momentum * batch.
// Evaluation normalizes with the running estimates.
template <typename Real>
Tensor<Real> batch_norm_1d(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta,
                           BatchNormStats& stats, bool training,
                           Real eps = static_cast<Real>(Epsilons::batch_norm));

// Inverted dropout: survivors are scaled by 1/(1-p). Identity (same node,
// no draws) when p == 0 or training is false.
template <typename Real>
Tensor<Real> dropout(const Tensor<Real>& x, double p, bool training, RngStream& rng);

// Cosine similarity along the last axis: [..., D] x [..., D] -> [...].
template <typename Real>
Tensor<Real> cosine_similarity(const Tensor<Real>& a, const Tensor<Real>& b,
                               Real eps = static_cast<Real>(Epsilons::cosine));

// Value copy cut off from the tape.
template <typename Real> Tensor<Real> detach(const Tensor<Real>& x);

// Mean softmax cross-entropy of logits [B, K] against class ids.
template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<std::size_t>& labels);

// Mean of squared differences over every element.
template <typename Real> Tensor<Real> mse_loss(const Tensor<Real>& prediction, const Tensor<Real>& target);

}  // namespace timedrl
