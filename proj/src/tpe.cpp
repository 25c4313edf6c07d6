#include "mstl/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"
#include "mstl/errors.hpp"

namespace mstl {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Inverse-CDF draw from unnormalized nonnegative weights.
std::size_t draw_index(const std::vector<double>& weights, std::mt19937_64& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = unit_uniform(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

std::size_t finite_count(const TrialHistory& h) {
  return static_cast<std::size_t>(std::count_if(h.trials.begin(), h.trials.end(),
                                                [](const Trial& t) { return std::isfinite(t.loss); }));
}

}  // namespace

SearchSpace SearchSpace::uniform_grid(std::size_t n, std::vector<double> levels) {
  SearchSpace s;
  s.dims.assign(n, std::move(levels));
  return s;
}

void SearchSpace::validate() const {
  if (dims.empty()) throw OptimizerError("search space has no dimensions");
  for (const auto& d : dims) {
    if (d.empty()) throw OptimizerError("search space dimension has no levels");
    auto sorted = d;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw OptimizerError("search space dimension has repeated levels");
    }
  }
}

std::size_t SearchSpace::level_index(std::size_t dim, double level) const {
  const auto& d = dims.at(dim);
  const auto it = std::find(d.begin(), d.end(), level);
  if (it == d.end()) throw OptimizerError("level is not part of dimension " + std::to_string(dim));
  return static_cast<std::size_t>(it - d.begin());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw OptimizerError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

HistorySplit split_history(const TrialHistory& h) {
  std::vector<const Trial*> finite;
  for (const auto& t : h.trials) {
    if (std::isfinite(t.loss)) finite.push_back(&t);
  }
  if (finite.size() < 2) {
    throw OptimizerError("split_history needs at least 2 finite trials, got " +
                         std::to_string(finite.size()));
  }
  std::vector<double> losses;
  for (const auto* t : finite) losses.push_back(t->loss);

  HistorySplit out;
  out.y_star = quantile(losses, h.gamma);
  std::size_t best = 0;
  for (std::size_t i = 0; i < finite.size(); ++i) {
    if (finite[i]->loss < finite[best]->loss) best = i;
  }
  const bool any_good = std::any_of(finite.begin(), finite.end(),
                                    [&](const Trial* t) { return t->loss < out.y_star; });
  for (std::size_t i = 0; i < finite.size(); ++i) {
    const bool good = any_good ? finite[i]->loss < out.y_star : i == best;
    (good ? out.good : out.bad).push_back(*finite[i]);
  }
  return out;
}

double density(const SearchSpace& space, double level, const std::vector<Trial>& trials,
               std::size_t dim) {
  const std::size_t k = space.dims.at(dim).size();
  const auto count = std::count_if(trials.begin(), trials.end(),
                                   [&](const Trial& t) { return t.lambda.at(dim) == level; });
  return (static_cast<double>(count) + 1.0) / static_cast<double>(trials.size() + k);
}

double ei_score(const SearchSpace& space, const std::vector<double>& candidate,
                const HistorySplit& split) {
  double score = 1.0;
  for (std::size_t d = 0; d < space.size(); ++d) {
    score *= density(space, candidate[d], split.good, d) / density(space, candidate[d], split.bad, d);
  }
  return score;
}

double ei_score(const SearchSpace& space, const std::vector<double>& candidate,
                const TrialHistory& h) {
  return ei_score(space, candidate, split_history(h));
}

std::vector<double> sample_uniform(const SearchSpace& space, std::mt19937_64& rng) {
  std::vector<double> point;
  point.reserve(space.size());
  for (const auto& d : space.dims) point.push_back(d[static_cast<std::size_t>(rng() % d.size())]);
  return point;
}

namespace {

std::vector<double> suggest_impl(const SearchSpace& space, const TrialHistory& h,
                                 std::size_t n_candidates, std::mt19937_64& rng,
                                 const std::set<std::vector<double>>* evaluated) {
  if (n_candidates == 0) throw OptimizerError("suggest needs at least one candidate");
  if (finite_count(h) < 2) return sample_uniform(space, rng);

  const auto split = split_history(h);
  // Per-dimension l densities over the level grid.
  std::vector<std::vector<double>> good_density(space.size());
  for (std::size_t d = 0; d < space.size(); ++d) {
    for (double level : space.dims[d]) good_density[d].push_back(density(space, level, split.good, d));
  }

  struct Pick {
    std::vector<double> point;
    double score = -1.0;
    double sum = 0.0;
    void offer(const std::vector<double>& cand, double s, double level_sum) {
      if (point.empty() || s > score || (s == score && level_sum < sum)) {
        point = cand;
        score = s;
        sum = level_sum;
      }
    }
  };
  Pick any, fresh;
  for (std::size_t c = 0; c < n_candidates; ++c) {
    std::vector<double> cand(space.size());
    for (std::size_t d = 0; d < space.size(); ++d) {
      cand[d] = space.dims[d][draw_index(good_density[d], rng)];
    }
    const double score = ei_score(space, cand, split);
    const double sum = std::accumulate(cand.begin(), cand.end(), 0.0);
    any.offer(cand, score, sum);
    if (evaluated && !evaluated->contains(cand)) fresh.offer(cand, score, sum);
  }
  return fresh.point.empty() ? any.point : fresh.point;
}

}  // namespace

std::vector<double> suggest(const SearchSpace& space, const TrialHistory& h,
                            std::size_t n_candidates, std::mt19937_64& rng) {
  return suggest_impl(space, h, n_candidates, rng, nullptr);
}

std::vector<double> suggest(const SearchSpace& space, const TrialHistory& h,
                            std::size_t n_candidates, std::mt19937_64& rng,
                            const std::set<std::vector<double>>& evaluated) {
  return suggest_impl(space, h, n_candidates, rng, &evaluated);
}

std::vector<double> suggest(const SearchSpace& space, const TrialHistory& h,
                            std::size_t n_candidates, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return suggest(space, h, n_candidates, rng);
}

void TpeConfig::validate() const {
  if (n_trials == 0) throw OptimizerError("n_trials must be positive");
  if (n_candidates == 0) throw OptimizerError("n_candidates must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw OptimizerError("gamma must lie in (0, 1)");
}

OptimizeResult optimize(const Objective& objective, const SearchSpace& space,
                        const TpeConfig& cfg) {
  space.validate();
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  OptimizeResult result;
  result.history.gamma = cfg.gamma;
  std::set<std::vector<double>> evaluated;
  for (std::size_t i = 0; i < cfg.n_trials; ++i) {
    std::vector<double> lambda;
    if (i < cfg.n_startup) {
      lambda = sample_uniform(space, rng);
    } else if (cfg.avoid_repeats) {
      lambda = suggest(space, result.history, cfg.n_candidates, rng, evaluated);
    } else {
      lambda = suggest(space, result.history, cfg.n_candidates, rng);
    }
    evaluated.insert(lambda);
    double loss = objective(lambda);
    if (!std::isfinite(loss)) loss = kFailedTrialLoss;
    result.history.trials.push_back({std::move(lambda), loss});
  }
  const auto& trials = result.history.trials;
  for (std::size_t i = 1; i < trials.size(); ++i) {
    if (trials[i].loss < trials[result.best_index].loss) result.best_index = i;
  }
  result.best = trials[result.best_index];
  return result;
}

void write_trial_log(std::ostream& out, const TrialHistory& h) {
  for (std::size_t i = 0; i < h.trials.size(); ++i) {
    nlohmann::json rec{{"trial", i}, {"lambda", h.trials[i].lambda}};
    if (std::isfinite(h.trials[i].loss)) {
      rec["loss"] = h.trials[i].loss;
    } else {
      rec["loss"] = nullptr;
    }
    out << rec.dump() << '\n';
  }
}

}  // namespace mstl
