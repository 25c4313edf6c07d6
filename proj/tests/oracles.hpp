#pragma once

// Reference implementations used only by tests. Each one takes a different
// route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

// Minimum over every monotone warping path (steps (1,0), (0,1), (1,1)),
// enumerated recursively without memoization.
inline double dtw_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += std::abs(a[i] - b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
// with potentials, O(n^3)).
inline double assignment_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
  return total;
}

// Optimal-transport LP between uniform empirical measures. With integer
// masses (n per a-point, m per b-point) the transportation polytope has
// integral vertices, so the LP optimum equals an assignment over unit
// copies; divide by the total mass m*n.
inline double wasserstein_lp(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<double> left, right;
  for (double x : a) left.insert(left.end(), n, x);
  for (double y : b) right.insert(right.end(), m, y);
  std::vector<std::vector<double>> cost(m * n, std::vector<double>(m * n));
  for (std::size_t i = 0; i < m * n; ++i) {
    for (std::size_t j = 0; j < m * n; ++j) cost[i][j] = std::abs(left[i] - right[j]);
  }
  return assignment_cost(cost) / static_cast<double>(m * n);
}

// Sample covariance by explicit loops.
inline std::vector<std::vector<double>> covariance_loops(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size(), d = rows[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += r[k] / static_cast<double>(n);
  }
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& r : rows) {
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = 0; q < d; ++q) c[p][q] += (r[p] - mean[p]) * (r[q] - mean[q]) / static_cast<double>(n - 1);
    }
  }
  return c;
}

inline double coral_loops(const std::vector<std::vector<double>>& s, const std::vector<std::vector<double>>& t) {
  const auto cs = covariance_loops(s), ct = covariance_loops(t);
  const std::size_t d = cs.size();
  double sum = 0.0;
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t q = 0; q < d; ++q) sum += (cs[p][q] - ct[p][q]) * (cs[p][q] - ct[p][q]);
  }
  return sum / (4.0 * static_cast<double>(d * d));
}

// Enumerates every point of levels^n in lexicographic order.
inline void for_each_grid_point(std::size_t n, const std::vector<double>& levels,
                                const std::function<void(const std::vector<double>&)>& fn) {
  std::vector<std::size_t> idx(n, 0);
  std::vector<double> point(n);
  while (true) {
    for (std::size_t d = 0; d < n; ++d) point[d] = levels[idx[d]];
    fn(point);
    std::size_t d = 0;
    while (d < n && ++idx[d] == levels.size()) idx[d++] = 0;
    if (d == n) return;
  }
}

// Exhaustive minimum of the lambda-weighted combination MSE over the lambda grid,
// computed with plain loops. All-zero lambda is skipped.
inline double best_lambda_mse(const Eigen::MatrixXd& preds, const Eigen::VectorXd& targets,
                              const std::vector<double>& levels) {
  double best = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(preds.rows());
  for_each_grid_point(n, levels, [&](const std::vector<double>& lambda) {
    const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    if (total == 0.0) return;
    double sse = 0.0;
    for (Eigen::Index c = 0; c < preds.cols(); ++c) {
      double out = 0.0;
      for (std::size_t i = 0; i < n; ++i) out += lambda[i] * preds(static_cast<Eigen::Index>(i), c);
      out /= total;
      sse += (out - targets(c)) * (out - targets(c));
    }
    best = std::min(best, sse / static_cast<double>(preds.cols()));
  });
  return best;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -5.0, double hi = 5.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace oracle
