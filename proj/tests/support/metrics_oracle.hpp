#pragma once

// Brute-force classification metrics: every per-class count comes from a
// direct pass over the label vectors, without a confusion matrix.

#include <cstdint>
#include <set>
#include <vector>

#include "timedrl/metrics.hpp"
#include "timedrl/rng.hpp"

namespace testutil {

struct OracleMetrics {
  double accuracy = 0, macro_f1 = 0, kappa = 0;
};

inline OracleMetrics oracle_metrics(const std::vector<int>& t, const std::vector<int>& p, int k_classes) {
  const auto n = static_cast<std::int64_t>(t.size());
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < t.size(); ++i) correct += t[i] == p[i];
  OracleMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  double f1_sum = 0;
  std::int64_t chance = 0;
  for (int k = 0; k < k_classes; ++k) {
    std::int64_t tp = 0, fp = 0, fn = 0, true_k = 0, pred_k = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      tp += t[i] == k && p[i] == k;
      fp += t[i] != k && p[i] == k;
      fn += t[i] == k && p[i] != k;
      true_k += t[i] == k;
      pred_k += p[i] == k;
    }
    if (2 * tp + fp + fn > 0) f1_sum += static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
    chance += true_k * pred_k;
  }
  m.macro_f1 = f1_sum / k_classes;
  if (std::set<int>(t.begin(), t.end()).size() < 2) {
    m.kappa = 0;  // single-class test set convention
  } else {
    m.kappa = static_cast<double>(n * correct - chance) / static_cast<double>(n * n - chance);
  }
  return m;
}

// Random label pair; n in [1, 60], labels in [0, K).
inline std::pair<std::vector<int>, std::vector<int>> random_labels(timedrl::RngStream& rng, int k_classes) {
  const std::size_t n = 1 + rng.below(60);
  std::vector<int> t(n), p(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k_classes)));
    p[i] = rng.uniform() < 0.5 ? t[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(k_classes)));
  }
  return {t, p};
}

}  // namespace testutil
