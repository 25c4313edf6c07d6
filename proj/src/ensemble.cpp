#include "mstl/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mstl/errors.hpp"
#include "mstl/nn.hpp"

namespace mstl {

namespace {

void require_models(const PoolPredictions& p) {
  if (p.rows() == 0) throw EnsembleError("pool predictions have no models");
}

void require_length(const PoolPredictions& p, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(p.rows()) != n) {
    throw EnsembleError(std::string(what) + " has length " + std::to_string(n) + ", pool has " +
                        std::to_string(p.rows()) + " models");
  }
}

}  // namespace

Eigen::VectorXd average_ensemble(const PoolPredictions& p) {
  require_models(p);
  return p.colwise().mean().transpose();
}

Eigen::VectorXd waetl(const PoolPredictions& p, const std::vector<double>& weights) {
  require_models(p);
  require_length(p, weights.size(), "weight vector");
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  return p.transpose() * w;
}

Eigen::VectorXd combine_lambda(const PoolPredictions& p, const std::vector<double>& lambda) {
  require_models(p);
  require_length(p, lambda.size(), "lambda");
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  if (!(total > 0.0)) throw EnsembleError("lambda must not be all zero");
  const Eigen::Map<const Eigen::VectorXd> l(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
  return (p.transpose() * l) / total;
}

std::vector<double> FesResult::counts(std::size_t n_models) const {
  std::vector<double> c(n_models, 0.0);
  for (auto i : selection) c.at(i) += 1.0;
  return c;
}

Eigen::VectorXd apply_selection(const PoolPredictions& p, const std::vector<std::size_t>& selection) {
  if (selection.empty()) throw EnsembleError("empty selection");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.cols());
  for (auto i : selection) {
    if (static_cast<Eigen::Index>(i) >= p.rows()) throw EnsembleError("selection index out of range");
    sum += p.row(static_cast<Eigen::Index>(i)).transpose();
  }
  return sum / static_cast<double>(selection.size());
}

FesResult fes(const PoolPredictions& validation, const Eigen::VectorXd& targets,
              std::size_t max_iters) {
  require_models(validation);
  if (validation.cols() != targets.size()) throw EnsembleError("fes: sample count mismatch");
  if (max_iters == 0) throw EnsembleError("fes: max_iters must be positive");

  const Eigen::Index n = validation.rows();
  FesResult out;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(validation.cols());
  double current = std::numeric_limits<double>::infinity();
  while (out.selection.size() < max_iters) {
    const double k = static_cast<double>(out.selection.size() + 1);
    Eigen::Index best = -1;
    double best_mse = current;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::VectorXd avg = (sum + validation.row(i).transpose()) / k;
      const double mse = mse_loss(avg, targets);
      if (mse < best_mse) {
        best = i;
        best_mse = mse;
      }
    }
    if (best < 0) break;
    sum += validation.row(best).transpose();
    out.selection.push_back(static_cast<std::size_t>(best));
    out.mse_history.push_back(best_mse);
    current = best_mse;
  }
  // Every row tied at +inf MSE is impossible for finite predictions; keep the
  // contract of a nonempty result anyway.
  if (out.selection.empty()) {
    out.selection.push_back(0);
    out.mse_history.push_back(mse_loss(validation.row(0).transpose(), targets));
  }
  return out;
}

double lambda_objective(const PoolPredictions& validation, const Eigen::VectorXd& targets,
                        const std::vector<double>& lambda) {
  if (std::all_of(lambda.begin(), lambda.end(), [](double l) { return l == 0.0; })) {
    return std::numeric_limits<double>::infinity();
  }
  return mse_loss(combine_lambda(validation, lambda), targets);
}

TpeesResult tpees(const PoolPredictions& validation, const Eigen::VectorXd& targets,
                  const TpeConfig& cfg) {
  require_models(validation);
  if (validation.cols() != targets.size()) throw EnsembleError("tpees: sample count mismatch");
  const auto space =
      SearchSpace::uniform_grid(static_cast<std::size_t>(validation.rows()), kDefaultLevels);
  auto result = optimize(
      [&](const std::vector<double>& lambda) { return lambda_objective(validation, targets, lambda); },
      space, cfg);
  if (!std::isfinite(result.best.loss)) {
    // Only reachable when every trial drew the all-zero point; fall back to
    // the plain average.
    result.best.lambda.assign(static_cast<std::size_t>(validation.rows()), 1.0);
    result.best.loss = lambda_objective(validation, targets, result.best.lambda);
  }
  return {result.best.lambda, result.best.loss, std::move(result.history)};
}

}  // namespace mstl
