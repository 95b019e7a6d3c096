#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "timedrl/data.hpp"

namespace timedrl {

enum class SyntheticGenerator { SinusoidMix, ArProcess, ClassFrequency };

SyntheticGenerator parse_generator(const std::string& name);
std::string to_string(SyntheticGenerator generator);

struct SyntheticSpec {
  SyntheticGenerator generator = SyntheticGenerator::SinusoidMix;
  std::size_t length = 2000;         // T_total for the forecasting generators
  std::size_t channels = 1;
  std::size_t classes = 2;           // class-frequency only
  std::size_t instances = 400;       // class-frequency only
  std::size_t instance_length = 64;  // class-frequency only
  double noise = 0.1;
  std::uint64_t seed = 1;
  double ar_coefficient = 0.8;       // ar-process: x_t = phi * x_{t-1} + e_t
  std::size_t period = 24;           // ar-process seasonal period
  double seasonal_amplitude = 1.0;   // ar-process seasonal amplitude

  void validate() const;
};

// sinusoid-mix: per channel, three sinusoids with seeded integer periods in
//   [8, 64], amplitudes and phases, plus N(0, noise^2). Phases are evaluated
//   on t mod period, so noise-free channels repeat exactly.
// ar-process: per channel, seasonal_amplitude * sin(2 pi t / period + phase)
//   plus an AR(1) component with innovations N(0, noise^2).
// class-frequency: `instances` rows blocks of instance_length steps; class k
//   oscillates at (2 + 3k) cycles per instance with random phase and
//   amplitude in [0.5, 1.5], plus N(0, noise^2). Classes are balanced.
TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace timedrl
