#include "timedrl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace timedrl {

template <typename Real>
Tensor<Real> finite_difference_grad(const std::function<Real(const Tensor<Real>&)>& f, const Tensor<Real>& x,
                                    Real h) {
  NoGradScope<Real> no_grad;
  std::vector<Real> base = x.values();
  std::vector<Real> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<Real> plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    const Real fp = f(Tensor<Real>(x.shape(), std::move(plus)));
    const Real fm = f(Tensor<Real>(x.shape(), std::move(minus)));
    out[i] = (fp - fm) / (Real(2) * h);
  }
  return Tensor<Real>(x.shape(), std::move(out));
}

template <typename Real>
std::vector<Real> finite_difference_grad_inplace(const std::function<Real()>& f, Tensor<Real>& leaf, Real h) {
  NoGradScope<Real> no_grad;
  auto data = leaf.mutable_data();
  std::vector<Real> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Real saved = data[i];
    data[i] = saved + h;
    const Real fp = f();
    data[i] = saved - h;
    const Real fm = f();
    data[i] = saved;
    out[i] = (fp - fm) / (Real(2) * h);
  }
  return out;
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double worst = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  if (a.size() != b.size()) return INFINITY;
  return worst;
}

template Tensor<float> finite_difference_grad(const std::function<float(const Tensor<float>&)>&, const Tensor<float>&,
                                              float);
template Tensor<double> finite_difference_grad(const std::function<double(const Tensor<double>&)>&,
                                               const Tensor<double>&, double);
template std::vector<float> finite_difference_grad_inplace(const std::function<float()>&, Tensor<float>&, float);
template std::vector<double> finite_difference_grad_inplace(const std::function<double()>&, Tensor<double>&, double);

}  // namespace timedrl
