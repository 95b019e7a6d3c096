#include "timedrl/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "timedrl/rng.hpp"

namespace timedrl {

SyntheticGenerator parse_generator(const std::string& name) {
  if (name == "sinusoid-mix") return SyntheticGenerator::SinusoidMix;
  if (name == "ar-process") return SyntheticGenerator::ArProcess;
  if (name == "class-frequency") return SyntheticGenerator::ClassFrequency;
  fail(ErrorCode::InvalidSpec, "unknown synthetic generator '" + name + "'");
}

std::string to_string(SyntheticGenerator generator) {
  switch (generator) {
    case SyntheticGenerator::SinusoidMix: return "sinusoid-mix";
    case SyntheticGenerator::ArProcess: return "ar-process";
    case SyntheticGenerator::ClassFrequency: return "class-frequency";
  }
  return "sinusoid-mix";
}

void SyntheticSpec::validate() const {
  if (channels == 0) fail(ErrorCode::InvalidSpec, "channels must be >= 1");
  if (!(noise >= 0)) fail(ErrorCode::InvalidSpec, "noise must be >= 0");
  switch (generator) {
    case SyntheticGenerator::SinusoidMix:
      if (length == 0) fail(ErrorCode::InvalidSpec, "length must be >= 1");
      break;
    case SyntheticGenerator::ArProcess:
      if (length == 0) fail(ErrorCode::InvalidSpec, "length must be >= 1");
      if (!(std::abs(ar_coefficient) < 1)) fail(ErrorCode::InvalidSpec, "AR coefficient must satisfy |phi| < 1");
      if (period == 0) fail(ErrorCode::InvalidSpec, "period must be >= 1");
      break;
    case SyntheticGenerator::ClassFrequency:
      if (classes < 2) fail(ErrorCode::InvalidSpec, "class-frequency needs at least 2 classes");
      if (instances < classes) fail(ErrorCode::InvalidSpec, "fewer instances than classes");
      if (2 * (2 + 3 * (classes - 1)) >= instance_length)
        fail(ErrorCode::InvalidSpec, "highest class frequency exceeds Nyquist for instance length " +
                                         std::to_string(instance_length));
      break;
  }
}

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  constexpr double two_pi = 2.0 * std::numbers::pi;
  RngStream root(spec.seed);
  TimeSeriesDataset ds;
  for (std::size_t c = 0; c < spec.channels; ++c) ds.feature_names.push_back("c" + std::to_string(c));
  ds.frequency_note = to_string(spec.generator);

  switch (spec.generator) {
    case SyntheticGenerator::SinusoidMix: {
      ds.values = Matrix(spec.length, spec.channels);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        RngStream shape = root.derive("sinusoid-shape", c);
        RngStream noise = root.derive("sinusoid-noise", c);
        std::size_t periods[3];
        double amps[3], phases[3];
        for (int k = 0; k < 3; ++k) {
          periods[k] = 8 + shape.below(57);
          amps[k] = shape.uniform(0.3, 1.0);
          phases[k] = shape.uniform();
        }
        for (std::size_t t = 0; t < spec.length; ++t) {
          double v = 0;
          for (int k = 0; k < 3; ++k)
            v += amps[k] * std::sin(two_pi * (static_cast<double>(t % periods[k]) / static_cast<double>(periods[k]) +
                                              phases[k]));
          ds.values(t, c) = spec.noise > 0 ? v + noise.normal(0.0, spec.noise) : v;
        }
      }
      break;
    }
    case SyntheticGenerator::ArProcess: {
      ds.values = Matrix(spec.length, spec.channels);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        RngStream draws = root.derive("ar", c);
        const double phase = draws.uniform();
        double ar = 0;
        for (std::size_t t = 0; t < spec.length; ++t) {
          ar = spec.ar_coefficient * ar + (spec.noise > 0 ? draws.normal(0.0, spec.noise) : 0.0);
          const double season =
              spec.seasonal_amplitude *
              std::sin(two_pi * (static_cast<double>(t % spec.period) / static_cast<double>(spec.period) + phase));
          ds.values(t, c) = season + ar;
        }
      }
      break;
    }
    case SyntheticGenerator::ClassFrequency: {
      const std::size_t len = spec.instance_length;
      ds.instance_length = len;
      ds.values = Matrix(spec.instances * len, spec.channels);
      std::vector<int> labels(spec.instances);
      RngStream draws = root.derive("class-frequency");
      for (std::size_t i = 0; i < spec.instances; ++i) {
        const auto k = static_cast<int>(i % spec.classes);
        labels[i] = k;
        const double cycles = 2.0 + 3.0 * k;
        for (std::size_t c = 0; c < spec.channels; ++c) {
          const double phase = draws.uniform();
          const double amp = draws.uniform(0.5, 1.5);
          for (std::size_t t = 0; t < len; ++t) {
            double v = amp * std::sin(two_pi * (cycles * static_cast<double>(t) / static_cast<double>(len) + phase));
            if (spec.noise > 0) v += draws.normal(0.0, spec.noise);
            ds.values(i * len + t, c) = v;
          }
        }
      }
      ds.labels = std::move(labels);
      break;
    }
  }
  return ds;
}

}  // namespace timedrl
