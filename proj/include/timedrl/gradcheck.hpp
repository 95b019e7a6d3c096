#pragma once

#include <functional>
#include <vector>

#include "timedrl/tensor.hpp"

namespace timedrl {

// Central-difference gradient of a scalar function:
//   (f(x + h e_i) - f(x - h e_i)) / 2h   for every coordinate i.
// f receives a fresh, tape-free tensor per evaluation. Any stochastic layer
// inside f must be frozen (eval mode or a re-seeded stream per call).
template <typename Real>
Tensor<Real> finite_difference_grad(const std::function<Real(const Tensor<Real>&)>& f, const Tensor<Real>& x,
                                    Real h);

// Same estimate, perturbing a leaf (typically a parameter) in place and
// restoring it afterwards; f closes over the model that owns the leaf.
template <typename Real>
std::vector<Real> finite_difference_grad_inplace(const std::function<Real()>& f, Tensor<Real>& leaf, Real h);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps coordinates
// whose true derivative is ~0 from dominating.
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-3);

}  // namespace timedrl
