#pragma once

// Combiners over a pool's predictions. A PoolPredictions matrix has one row
// per pool model and one column per evaluation sample.

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "mstl/tpe.hpp"

namespace mstl {

using PoolPredictions = Eigen::MatrixXd;

// Column-wise mean.
Eigen::VectorXd average_ensemble(const PoolPredictions& p);

// Column-wise sum of w_i * row_i.
Eigen::VectorXd waetl(const PoolPredictions& p, const std::vector<double>& weights);

// sum_i lambda_i * row_i / sum_i lambda_i. Throws on an all-zero lambda.
Eigen::VectorXd combine_lambda(const PoolPredictions& p, const std::vector<double>& lambda);

struct FesResult {
  // Pool indices in selection order; repeats allowed.
  std::vector<std::size_t> selection;
  // MSE of the multiset average after each accepted selection.
  std::vector<double> mse_history;

  // Per-model multiplicity, usable as lambda coefficients.
  std::vector<double> counts(std::size_t n_models) const;
};

inline constexpr std::size_t kDefaultFesIterations = 50;

// Greedy forward selection with replacement, starting from the best single
// model. Stops when no addition strictly lowers the MSE or the multiset
// reaches max_iters members.
FesResult fes(const PoolPredictions& validation, const Eigen::VectorXd& targets,
              std::size_t max_iters = kDefaultFesIterations);

// Multiset average of the rows named in `selection`.
Eigen::VectorXd apply_selection(const PoolPredictions& p, const std::vector<std::size_t>& selection);

struct TpeesResult {
  std::vector<double> lambda;
  double validation_mse = 0.0;
  TrialHistory history;

  Eigen::VectorXd combine(const PoolPredictions& p) const { return combine_lambda(p, lambda); }
};

// TPE over per-model lambda in {0, .25, .5, .75, 1}; objective is the
// validation MSE of combine_lambda, with all-zero lambda marked failed.
TpeesResult tpees(const PoolPredictions& validation, const Eigen::VectorXd& targets,
                  const TpeConfig& cfg);

// Validation MSE of combine_lambda, or +inf for all-zero lambda.
double lambda_objective(const PoolPredictions& validation, const Eigen::VectorXd& targets,
                        const std::vector<double>& lambda);

}  // namespace mstl
