#pragma once

// Every differentiable primitive wrapped as a scalar function of its inputs,
// for finite-difference checks. Multi-output ops are reduced with a fixed
// random weighting so every output coordinate matters.

#include <functional>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace testutil {

struct PrimitiveCase {
  std::string name;
  std::vector<Shape> shapes;
  std::function<Tensor<double>(const std::vector<Tensor<double>>&)> fn;
  double input_offset = 0.0;  // shift inputs away from kinks (relu)
};

inline Tensor<double> weighted_sum(const Tensor<double>& y, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor<double> w = randn(y.shape(), rng, false);
  return timedrl::sum(timedrl::mul(y, w));
}

inline std::vector<PrimitiveCase> primitive_cases() {
  using namespace timedrl;
  using V = std::vector<Tensor<double>>;
  std::vector<PrimitiveCase> cases;
  cases.push_back({"add", {{2, 3, 4}, {2, 3, 4}}, [](const V& v) { return weighted_sum(add(v[0], v[1]), 1); }});
  cases.push_back({"add_broadcast", {{2, 3, 4}, {4}}, [](const V& v) { return weighted_sum(add(v[0], v[1]), 2); }});
  cases.push_back({"sub", {{3, 4}, {3, 4}}, [](const V& v) { return weighted_sum(sub(v[0], v[1]), 3); }});
  cases.push_back({"mul", {{3, 4}, {3, 4}}, [](const V& v) { return weighted_sum(mul(v[0], v[1]), 4); }});
  cases.push_back({"mul_broadcast", {{2, 3, 4}, {3, 4}}, [](const V& v) { return weighted_sum(mul(v[0], v[1]), 5); }});
  cases.push_back({"scale", {{5}}, [](const V& v) { return weighted_sum(scale(v[0], 0.37), 6); }});
  cases.push_back({"relu", {{4, 5}}, [](const V& v) { return weighted_sum(relu(v[0]), 7); }, 0.0});
  cases.push_back({"gelu", {{4, 5}}, [](const V& v) { return weighted_sum(gelu(v[0]), 8); }});
  cases.push_back({"matmul", {{3, 4}, {4, 5}}, [](const V& v) { return weighted_sum(matmul(v[0], v[1]), 9); }});
  cases.push_back(
      {"matmul_batched", {{2, 3, 4}, {2, 4, 2}}, [](const V& v) { return weighted_sum(matmul(v[0], v[1]), 10); }});
  cases.push_back(
      {"matmul_shared_rhs", {{2, 3, 4}, {4, 2}}, [](const V& v) { return weighted_sum(matmul(v[0], v[1]), 11); }});
  cases.push_back({"linear", {{2, 3, 4}, {5, 4}, {5}},
                   [](const V& v) { return weighted_sum(linear(v[0], v[1], v[2]), 12); }});
  cases.push_back({"linear_nobias", {{3, 4}, {2, 4}},
                   [](const V& v) { return weighted_sum(linear(v[0], v[1], Tensor<double>()), 13); }});
  cases.push_back({"transpose", {{2, 3, 4}}, [](const V& v) { return weighted_sum(transpose(v[0], 0, 2), 14); }});
  cases.push_back({"reshape", {{2, 6}}, [](const V& v) { return weighted_sum(reshape(v[0], {3, 4}), 15); }});
  cases.push_back({"concat", {{2, 3}, {2, 2}}, [](const V& v) { return weighted_sum(concat(V{v[0], v[1]}, 1), 16); }});
  cases.push_back({"slice", {{4, 3}}, [](const V& v) { return weighted_sum(slice(v[0], 0, 1, 3), 17); }});
  cases.push_back({"sum", {{3, 4}}, [](const V& v) { return scale(sum(v[0]), 1.3); }});
  cases.push_back({"sum_axis", {{2, 3, 4}}, [](const V& v) { return weighted_sum(sum(v[0], 1), 18); }});
  cases.push_back({"mean", {{3, 4}}, [](const V& v) { return scale(mean(v[0]), 2.1); }});
  cases.push_back({"mean_axis", {{2, 3, 4}}, [](const V& v) { return weighted_sum(mean(v[0], 2), 19); }});
  cases.push_back({"softmax_last", {{3, 5}}, [](const V& v) { return weighted_sum(softmax(v[0], 1), 20); }});
  cases.push_back({"softmax_middle", {{2, 4, 3}}, [](const V& v) { return weighted_sum(softmax(v[0], 1), 21); }});
  cases.push_back({"layer_norm", {{3, 6}, {6}, {6}},
                   [](const V& v) { return weighted_sum(layer_norm(v[0], v[1], v[2]), 22); }});
  cases.push_back({"batch_norm_train", {{5, 3}, {3}, {3}}, [](const V& v) {
                     auto stats = BatchNormStats::identity(3);
                     return weighted_sum(batch_norm_1d(v[0], v[1], v[2], stats, true), 23);
                   }});
  cases.push_back({"batch_norm_eval", {{5, 3}, {3}, {3}}, [](const V& v) {
                     BatchNormStats stats{{0.1, -0.2, 0.3}, {1.5, 0.7, 2.0}, 0.1};
                     return weighted_sum(batch_norm_1d(v[0], v[1], v[2], stats, false), 24);
                   }});
  cases.push_back({"dropout", {{4, 6}}, [](const V& v) {
                     RngStream rng(99);
                     return weighted_sum(dropout(v[0], 0.3, true, rng), 25);
                   }});
  cases.push_back(
      {"cosine_similarity", {{3, 5}, {3, 5}}, [](const V& v) { return weighted_sum(cosine_similarity(v[0], v[1]), 26); }});
  cases.push_back({"cross_entropy", {{4, 3}}, [](const V& v) { return cross_entropy(v[0], {0, 2, 1, 2}); }});
  cases.push_back({"mse_loss", {{3, 4}, {3, 4}}, [](const V& v) { return mse_loss(v[0], v[1]); }});
  cases.push_back({"detach_mixed", {{3, 4}}, [](const V& v) {
                     // Only the live factor carries gradient: d/dx sum(w * x * sg(x)) = w * sg(x).
                     return weighted_sum(mul(v[0], detach(v[0])), 27);
                   }});
  return cases;
}

// Tape gradient vs central differences for every input of one case.
// detach_mixed is compared against its live-path derivative w * x instead,
// since finite differences would also see the detached path.
inline double primitive_max_error(const PrimitiveCase& c, std::uint64_t seed, double h = 1e-6) {
  RngStream rng(seed);
  std::vector<Tensor<double>> inputs;
  for (const auto& s : c.shapes) {
    Tensor<double> t = randn(s, rng, true);
    if (c.name == "relu") {
      // keep every coordinate at least 0.1 away from the kink
      for (double& x : t.mutable_data()) x = x >= 0 ? x + 0.1 : x - 0.1;
    }
    inputs.push_back(t);
  }
  timedrl::Tape<double> tape;
  {
    timedrl::TapeScope<double> scope(tape);
    tape.backward(c.fn(inputs));
  }
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> numeric;
    if (c.name == "detach_mixed") {
      RngStream wrng(27);
      const Tensor<double> w = randn(inputs[k].shape(), wrng, false);
      numeric = inputs[k].values();
      for (std::size_t i = 0; i < numeric.size(); ++i) numeric[i] *= w.data()[i];
    } else {
      const auto fd = timedrl::finite_difference_grad<double>(
          [&](const Tensor<double>& p) {
            auto args = inputs;
            args[k] = p;
            return c.fn(args).item();
          },
          inputs[k], h);
      numeric = fd.values();
    }
    worst = std::max(worst, timedrl::max_relative_error(inputs[k].grad(), numeric));
  }
  return worst;
}

}  // namespace testutil
