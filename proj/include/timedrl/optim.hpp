#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "timedrl/encoder.hpp"

namespace timedrl {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Decoupled AdamW. Moments are keyed by parameter name; a parameter without
// an accumulated gradient is skipped for that step (no decay, no moment
// update), so only parameters the loss reached can move.
template <typename Real>
class AdamW {
 public:
  struct Moments {
    std::vector<Real> m, v;
  };

  explicit AdamW(AdamWConfig config = {});

  // Throws NonFiniteGradient naming the parameter before touching any state.
  void step(const ParameterList<Real>& params);

  const AdamWConfig& config() const { return config_; }
  std::uint64_t step_count() const { return t_; }
  void set_step_count(std::uint64_t t) { t_ = t; }
  std::map<std::string, Moments>& moments() { return moments_; }
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  AdamWConfig config_;
  std::uint64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

// Global L2 norm over all accumulated gradients.
template <typename Real>
double grad_norm(const ParameterList<Real>& params);

// Rescales gradients so the global norm is at most max_norm; max_norm <= 0
// disables clipping. Returns the norm before clipping.
template <typename Real>
double clip_grad_norm(const ParameterList<Real>& params, double max_norm);

template <typename Real>
void zero_grads(const ParameterList<Real>& params);

}  // namespace timedrl
