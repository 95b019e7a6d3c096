#pragma once

#include <cstdint>
#include <vector>

#include "timedrl/data.hpp"

namespace timedrl {

struct ClassificationMetrics {
  double accuracy = 0;
  double macro_f1 = 0;
  double kappa = 0;
  bool single_class_test = false;  // y_true holds one class; kappa forced to 0
  std::vector<std::vector<std::int64_t>> confusion;  // [true][pred]
};

// Macro F1 averages one-vs-rest F1 = 2TP / (2TP + FP + FN) over all K
// classes; a class absent from both vectors contributes 0. Kappa uses integer
// counts: (N * diag - sum_k r_k c_k) / (N^2 - sum_k r_k c_k).
ClassificationMetrics compute_classification_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                                     std::size_t classes);

struct ForecastMetrics {
  double mse = 0;
  double mae = 0;
};

ForecastMetrics compute_forecast_metrics(const std::vector<double>& y_true, const std::vector<double>& y_pred);
// Per-sample [H x C] matrices; shapes must agree pairwise.
ForecastMetrics compute_forecast_metrics(const std::vector<Matrix>& y_true, const std::vector<Matrix>& y_pred);

// Index of the largest entry; ties resolve to the lowest index.
std::size_t argmax(const double* values, std::size_t n);

}  // namespace timedrl
