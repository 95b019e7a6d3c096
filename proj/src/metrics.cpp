#include "timedrl/metrics.hpp"

#include <cmath>

#include "timedrl/error.hpp"

namespace timedrl {

ClassificationMetrics compute_classification_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                                     std::size_t classes) {
  require(y_true.size() == y_pred.size(), ErrorCode::LengthMismatch,
          "y_true has " + std::to_string(y_true.size()) + " labels, y_pred " + std::to_string(y_pred.size()));
  require(!y_true.empty(), ErrorCode::LengthMismatch, "no labels to score");
  const auto k = static_cast<int>(classes);
  ClassificationMetrics m;
  m.confusion.assign(classes, std::vector<std::int64_t>(classes, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= k || y_pred[i] < 0 || y_pred[i] >= k)
      fail(ErrorCode::LabelOutOfRange, "label out of [0, " + std::to_string(classes) + ") at index " + std::to_string(i));
    ++m.confusion[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])];
  }

  const auto n = static_cast<std::int64_t>(y_true.size());
  std::int64_t diag = 0, chance = 0;
  std::size_t present = 0;
  double f1_sum = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::int64_t row = 0, col = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      row += m.confusion[c][j];
      col += m.confusion[j][c];
    }
    const std::int64_t tp = m.confusion[c][c];
    diag += tp;
    chance += row * col;
    if (row > 0) ++present;
    const std::int64_t denom = row + col;  // 2TP + FP + FN
    if (denom > 0) f1_sum += static_cast<double>(2 * tp) / static_cast<double>(denom);
  }
  m.accuracy = static_cast<double>(diag) / static_cast<double>(n);
  m.macro_f1 = f1_sum / static_cast<double>(classes);
  m.single_class_test = present <= 1;
  const std::int64_t kd = n * n - chance;
  m.kappa = (m.single_class_test || kd == 0) ? 0.0 : static_cast<double>(n * diag - chance) / static_cast<double>(kd);
  return m;
}

ForecastMetrics compute_forecast_metrics(const std::vector<double>& y_true, const std::vector<double>& y_pred) {
  require(y_true.size() == y_pred.size(), ErrorCode::ShapeMismatch,
          "forecast sizes differ: " + std::to_string(y_true.size()) + " vs " + std::to_string(y_pred.size()));
  require(!y_true.empty(), ErrorCode::ShapeMismatch, "empty forecast");
  double se = 0, ae = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_pred[i] - y_true[i];
    se += d * d;
    ae += std::abs(d);
  }
  const auto n = static_cast<double>(y_true.size());
  return {se / n, ae / n};
}

ForecastMetrics compute_forecast_metrics(const std::vector<Matrix>& y_true, const std::vector<Matrix>& y_pred) {
  require(y_true.size() == y_pred.size(), ErrorCode::ShapeMismatch, "forecast sample counts differ");
  std::vector<double> t, p;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    require(y_true[i].rows == y_pred[i].rows && y_true[i].cols == y_pred[i].cols, ErrorCode::ShapeMismatch,
            "forecast shapes differ at sample " + std::to_string(i));
    t.insert(t.end(), y_true[i].values.begin(), y_true[i].values.end());
    p.insert(p.end(), y_pred[i].values.begin(), y_pred[i].values.end());
  }
  return compute_forecast_metrics(t, p);
}

std::size_t argmax(const double* values, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace timedrl
