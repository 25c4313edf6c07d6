#pragma once

// Tree-structured Parzen Estimator over categorical grids.
//
// Observed trials are split at the gamma-quantile y* of their losses into a
// "good" set (loss < y*) and a "bad" set. Each dimension gets an add-one
// smoothed categorical density per set, l(x) from good and g(x) from bad,
// and candidates sampled from l are ranked by prod l / prod g. Expected
// improvement is monotone in that ratio, so its argmax is the EI argmax.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <random>
#include <set>
#include <vector>

namespace mstl {

struct SearchSpace {
  std::vector<std::vector<double>> dims;

  // n dimensions, each over the same level set.
  static SearchSpace uniform_grid(std::size_t n, std::vector<double> levels);
  std::size_t size() const noexcept { return dims.size(); }
  void validate() const;
  // Position of `level` within dimension `dim`; throws if absent.
  std::size_t level_index(std::size_t dim, double level) const;
};

inline const std::vector<double> kDefaultLevels = {0.0, 0.25, 0.5, 0.75, 1.0};

inline constexpr double kFailedTrialLoss = std::numeric_limits<double>::infinity();

struct Trial {
  std::vector<double> lambda;
  double loss = 0.0;
};

struct TrialHistory {
  std::vector<Trial> trials;
  double gamma = 0.25;
};

struct HistorySplit {
  std::vector<Trial> good;
  std::vector<Trial> bad;
  double y_star = 0.0;
};

// Linear-interpolation quantile (q in [0, 1]) of unsorted values.
double quantile(std::vector<double> values, double q);

// Only finite-loss trials take part. Needs at least 2 of them. If no trial
// falls strictly below y*, the first trial with the lowest loss is moved to
// the good set.
HistorySplit split_history(const TrialHistory& h);

// (count of `level` at `dim` among trials + 1) / (|trials| + K).
double density(const SearchSpace& space, double level, const std::vector<Trial>& trials,
               std::size_t dim);

// prod_d l_d(candidate_d) / prod_d g_d(candidate_d).
double ei_score(const SearchSpace& space, const std::vector<double>& candidate,
                const HistorySplit& split);
double ei_score(const SearchSpace& space, const std::vector<double>& candidate,
                const TrialHistory& h);

std::vector<double> sample_uniform(const SearchSpace& space, std::mt19937_64& rng);

// Draws n_candidates points from l and returns the best-scoring one. Ties go
// to the lowest level sum, then to the earliest draw. With fewer than two
// finite trials it returns a uniform random point instead.
std::vector<double> suggest(const SearchSpace& space, const TrialHistory& h,
                            std::size_t n_candidates, std::mt19937_64& rng);
std::vector<double> suggest(const SearchSpace& space, const TrialHistory& h,
                            std::size_t n_candidates, std::uint64_t seed);

// As above, but the best-scoring candidate not in `evaluated` wins; the
// plain argmax is the fallback when every draw was already evaluated.
std::vector<double> suggest(const SearchSpace& space, const TrialHistory& h,
                            std::size_t n_candidates, std::mt19937_64& rng,
                            const std::set<std::vector<double>>& evaluated);

struct TpeConfig {
  std::size_t n_trials = 200;
  std::size_t n_startup = 20;
  std::size_t n_candidates = 24;
  double gamma = 0.25;
  std::uint64_t seed = 0;
  // Steer suggestions away from points already in the history. Off gives
  // the plain argmax rule on every step.
  bool avoid_repeats = true;

  void validate() const;
};

struct OptimizeResult {
  Trial best;
  std::size_t best_index = 0;
  TrialHistory history;
};

using Objective = std::function<double(const std::vector<double>&)>;

// Non-finite objective values are stored as kFailedTrialLoss. The best trial
// is the first one with the minimum loss.
OptimizeResult optimize(const Objective& objective, const SearchSpace& space,
                        const TpeConfig& cfg);

// One JSON object per line: {"trial": i, "lambda": [...], "loss": y}.
// Failed trials carry "loss": null.
void write_trial_log(std::ostream& out, const TrialHistory& h);

}  // namespace mstl
