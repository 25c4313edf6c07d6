#pragma once

#include <Eigen/Dense>

#include "mstl/data.hpp"

namespace mstl {

// 100 * mean(|pred - actual| / |actual|). Throws on a zero actual value.
double mape(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);
double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);
// 1 - SS_res / SS_tot. Needs >= 2 points and a non-constant actual.
double r2(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);

struct EvalReport {
  double mape = 0.0;  // percent
  double rmse = 0.0;  // price units
  double r2 = 0.0;
};

// Inverse-scales both vectors to prices, then scores them.
EvalReport evaluate(const Eigen::VectorXd& pred_scaled, const Eigen::VectorXd& actual_scaled,
                    const ScalingParams& scaling);

}  // namespace mstl
