#include "timedrl/optim.hpp"

#include <cmath>

namespace timedrl {

void AdamWConfig::validate() const {
  require(lr > 0, ErrorCode::InvalidParam, "lr must be > 0");
  require(weight_decay >= 0, ErrorCode::InvalidParam, "weight_decay must be >= 0");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, ErrorCode::InvalidParam, "betas must lie in [0, 1)");
  require(eps > 0, ErrorCode::InvalidParam, "adam_eps must be > 0");
}

template <typename Real>
AdamW<Real>::AdamW(AdamWConfig config) : config_(config) {
  config_.validate();
}

template <typename Real>
void AdamW<Real>::step(const ParameterList<Real>& params) {
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (Real g : p.tensor.node()->grad) {
      if (!std::isfinite(static_cast<double>(g))) fail(ErrorCode::NonFiniteGradient, "non-finite gradient in " + p.name);
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = config_.lr;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    Tensor<Real> t = p.tensor;
    auto data = t.mutable_data();
    const auto& grad = t.node()->grad;
    auto& mo = moments_[p.name];
    if (mo.m.size() != data.size()) {
      mo.m.assign(data.size(), Real(0));
      mo.v.assign(data.size(), Real(0));
    }
    const double decay = p.decay ? lr * config_.weight_decay : 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      const double m = b1 * mo.m[i] + (1.0 - b1) * g;
      const double v = b2 * mo.v[i] + (1.0 - b2) * g * g;
      mo.m[i] = static_cast<Real>(m);
      mo.v[i] = static_cast<Real>(v);
      double theta = data[i];
      theta -= decay * theta;
      theta -= lr * (m / c1) / (std::sqrt(v / c2) + config_.eps);
      data[i] = static_cast<Real>(theta);
    }
  }
}

template <typename Real>
double grad_norm(const ParameterList<Real>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (Real g : p.tensor.node()->grad) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

template <typename Real>
double clip_grad_norm(const ParameterList<Real>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (max_norm <= 0 || !(norm > max_norm)) return norm;
  const double s = max_norm / norm;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (Real& g : p.tensor.node()->grad) g = static_cast<Real>(g * s);
  }
  return norm;
}

template <typename Real>
void zero_grads(const ParameterList<Real>& params) {
  for (const auto& p : params) {
    Tensor<Real> t = p.tensor;
    t.zero_grad();
  }
}

#define TIMEDRL_INSTANTIATE_OPTIM(R)                                 \
  template class AdamW<R>;                                           \
  template double grad_norm<R>(const ParameterList<R>&);             \
  template double clip_grad_norm<R>(const ParameterList<R>&, double); \
  template void zero_grads<R>(const ParameterList<R>&);

TIMEDRL_INSTANTIATE_OPTIM(float)
TIMEDRL_INSTANTIATE_OPTIM(double)

}  // namespace timedrl
