#include "mstl/metrics.hpp"

#include <cmath>

#include "mstl/errors.hpp"

namespace mstl {

namespace {

void check_lengths(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual, Eigen::Index min_len,
                   const char* name) {
  if (pred.size() != actual.size()) {
    throw MetricError(std::string(name) + ": length mismatch " + std::to_string(pred.size()) +
                      " vs " + std::to_string(actual.size()));
  }
  if (pred.size() < min_len) {
    throw MetricError(std::string(name) + ": need at least " + std::to_string(min_len) + " values");
  }
}

}  // namespace

double mape(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  check_lengths(pred, actual, 1, "mape");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < actual.size(); ++i) {
    if (actual(i) == 0.0) throw MetricError("mape: actual value is zero at index " + std::to_string(i));
    sum += std::abs(pred(i) - actual(i)) / std::abs(actual(i));
  }
  return 100.0 * sum / static_cast<double>(actual.size());
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  check_lengths(pred, actual, 1, "rmse");
  return std::sqrt((pred - actual).squaredNorm() / static_cast<double>(actual.size()));
}

double r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  check_lengths(pred, actual, 2, "r2");
  const double ss_tot = (actual.array() - actual.mean()).square().sum();
  if (ss_tot == 0.0) throw MetricError("r2: actual values are constant");
  return 1.0 - (actual - pred).squaredNorm() / ss_tot;
}

EvalReport evaluate(const Eigen::VectorXd& pred_scaled, const Eigen::VectorXd& actual_scaled,
                    const ScalingParams& scaling) {
  if (!(scaling.hi > scaling.lo)) throw ScaleError("invalid scaling parameters (lo >= hi)");
  const auto pred = inverse_scale_all(pred_scaled, scaling);
  const auto actual = inverse_scale_all(actual_scaled, scaling);
  return {mape(pred, actual), rmse(pred, actual), r2(pred, actual)};
}

}  // namespace mstl
