#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mstl/errors.hpp"
#include "mstl/tpe.hpp"
#include "oracles.hpp"

using namespace mstl;

namespace {

TrialHistory history_of(const std::vector<std::pair<std::vector<double>, double>>& trials, double gamma) {
  TrialHistory h;
  h.gamma = gamma;
  for (const auto& [l, y] : trials) h.trials.push_back({l, y});
  return h;
}

}  // namespace

TEST_CASE("quantile interpolates linearly") {
  CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({0, 10}, 0.5) == doctest::Approx(5.0));
  CHECK(quantile({7}, 0.9) == 7.0);
}

TEST_CASE("split_history") {
  SUBCASE("four losses, gamma 0.25") {
    const auto s = split_history(history_of({{{0}, 1}, {{0.25}, 2}, {{0.5}, 3}, {{0.75}, 4}}, 0.25));
    CHECK(s.y_star == doctest::Approx(1.75));
    REQUIRE(s.good.size() == 1);
    CHECK(s.good[0].loss == 1.0);
    CHECK(s.bad.size() == 3);
  }
  SUBCASE("all losses equal falls back to the first best trial") {
    const auto s = split_history(history_of({{{0.5}, 2}, {{1.0}, 2}, {{0.0}, 2}}, 0.25));
    REQUIRE(s.good.size() == 1);
    CHECK(s.good[0].lambda[0] == 0.5);
    CHECK(s.bad.size() == 2);
  }
  SUBCASE("two losses, gamma 0.5") {
    const auto s = split_history(history_of({{{1.0}, 10}, {{0.0}, 0}}, 0.5));
    REQUIRE(s.good.size() == 1);
    CHECK(s.good[0].loss == 0.0);
    REQUIRE(s.bad.size() == 1);
    CHECK(s.bad[0].loss == 10.0);
  }
  SUBCASE("failed trials are excluded") {
    const auto s = split_history(history_of({{{0}, kFailedTrialLoss}, {{1}, 1}, {{0.5}, 2}, {{0.25}, 3}}, 0.25));
    CHECK(s.good.size() + s.bad.size() == 3);
  }
  SUBCASE("fewer than two trials") {
    CHECK_THROWS_AS(split_history(history_of({{{0}, 1}}, 0.25)), OptimizerError);
    CHECK_THROWS_AS(split_history(history_of({{{0}, 1}, {{1}, kFailedTrialLoss}}, 0.25)), OptimizerError);
  }
}

TEST_CASE("split_history partitions the finite trials") {
  std::mt19937_64 rng(2);
  const auto space = SearchSpace::uniform_grid(2, kDefaultLevels);
  std::uniform_real_distribution<double> loss(0, 1);
  for (int i = 0; i < 100; ++i) {
    TrialHistory h;
    h.gamma = 0.1 + 0.8 * loss(rng);
    const int n = 2 + i % 20;
    std::size_t finite = 0;
    for (int k = 0; k < n; ++k) {
      const double y = k % 7 == 3 ? kFailedTrialLoss : std::round(loss(rng) * 4) / 4;
      finite += std::isfinite(y);
      h.trials.push_back({sample_uniform(space, rng), y});
    }
    if (finite < 2) continue;
    const auto s = split_history(h);
    CHECK(s.good.size() + s.bad.size() == finite);
    CHECK_FALSE(s.good.empty());
    double worst_good = 0, best_bad = 1e9;
    for (const auto& t : s.good) worst_good = std::max(worst_good, t.loss);
    for (const auto& t : s.bad) best_bad = std::min(best_bad, t.loss);
    CHECK(worst_good <= best_bad);
  }
}

TEST_CASE("density is add-one smoothed and normalized") {
  const auto space = SearchSpace::uniform_grid(1, kDefaultLevels);
  for (double level : kDefaultLevels) CHECK(density(space, level, {}, 0) == doctest::Approx(0.2));
  const std::vector<Trial> zeros{{{0.0}, 1}, {{0.0}, 2}, {{0.0}, 3}};
  CHECK(density(space, 0.0, zeros, 0) == doctest::Approx(0.5));

  std::mt19937_64 rng(9);
  const auto space3 = SearchSpace::uniform_grid(3, kDefaultLevels);
  for (int i = 0; i < 50; ++i) {
    std::vector<Trial> trials(static_cast<std::size_t>(i));
    for (auto& t : trials) t.lambda = sample_uniform(space3, rng);
    for (std::size_t d = 0; d < 3; ++d) {
      double sum = 0;
      for (double level : kDefaultLevels) sum += density(space3, level, trials, d);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("ei_score") {
  const auto space = SearchSpace::uniform_grid(1, kDefaultLevels);
  SUBCASE("hand-computed ratio") {
    // gamma 0.5 puts the three 1.0 trials (loss 0) in the good set.
    const auto h = history_of({{{1.0}, 0}, {{1.0}, 0}, {{1.0}, 0}, {{0.0}, 1}, {{0.0}, 1}, {{0.0}, 1}}, 0.5);
    CHECK(ei_score(space, {1.0}, h) == doctest::Approx(4.0));
    CHECK(ei_score(space, {0.0}, h) == doctest::Approx(0.25));
  }
  SUBCASE("unique good trial scores above one") {
    const auto h = history_of({{{0.75}, 0}, {{0.0}, 5}, {{0.25}, 5}, {{1.0}, 5}}, 0.25);
    CHECK(ei_score(space, {0.75}, h) > 1.0);
  }
  SUBCASE("empty good and bad sets give score one") {
    CHECK(ei_score(space, {0.5}, HistorySplit{}) == doctest::Approx(1.0));
  }
}

TEST_CASE("suggest") {
  const auto space = SearchSpace::uniform_grid(2, kDefaultLevels);
  SUBCASE("empty history: deterministic uniform draw") {
    const auto a = suggest(space, TrialHistory{}, 24, std::uint64_t{7});
    CHECK(a == suggest(space, TrialHistory{}, 24, std::uint64_t{7}));
    for (std::size_t d = 0; d < 2; ++d) CHECK_NOTHROW(space.level_index(d, a[d]));
  }
  SUBCASE("strong corner preference: argmax of an exhaustive score table") {
    TrialHistory h;
    h.gamma = 0.25;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 6; ++i) h.trials.push_back({{1.0, 0.0}, 0.01 * i});
    for (int i = 0; i < 30; ++i) {
      auto p = sample_uniform(space, rng);
      if (p == std::vector<double>{1.0, 0.0}) continue;
      h.trials.push_back({p, 1.0 + i});
    }
    // Oracle: score every grid point by counting directly.
    const auto split = split_history(h);
    std::vector<double> best_point;
    double best = -1;
    oracle::for_each_grid_point(2, kDefaultLevels, [&](const std::vector<double>& p) {
      double ratio = 1.0;
      for (std::size_t d = 0; d < 2; ++d) {
        auto count = [&](const std::vector<Trial>& ts) {
          return double(std::count_if(ts.begin(), ts.end(), [&](const Trial& t) { return t.lambda[d] == p[d]; }));
        };
        ratio *= ((count(split.good) + 1) / (split.good.size() + 5.0)) / ((count(split.bad) + 1) / (split.bad.size() + 5.0));
      }
      if (ratio > best) {
        best = ratio;
        best_point = p;
      }
    });
    CHECK(best_point == std::vector<double>{1.0, 0.0});
    CHECK(suggest(space, h, 400, std::uint64_t{3}) == best_point);
  }
  SUBCASE("one candidate returns the single draw from l") {
    const auto h = history_of({{{1.0, 1.0}, 0}, {{0.0, 0.0}, 1}, {{0.5, 0.5}, 2}}, 0.25);
    const auto s = suggest(space, h, 1, std::uint64_t{4});
    REQUIRE(s.size() == 2);
    for (std::size_t d = 0; d < 2; ++d) CHECK_NOTHROW(space.level_index(d, s[d]));
  }
  SUBCASE("never proposes an off-grid level") {
    std::mt19937_64 rng(6);
    TrialHistory h;
    for (int i = 0; i < 40; ++i) {
      h.trials.push_back({sample_uniform(space, rng), double(i % 9)});
      const auto s = suggest(space, h, 24, rng);
      for (std::size_t d = 0; d < 2; ++d) CHECK_NOTHROW(space.level_index(d, s[d]));
    }
  }
}

TEST_CASE("optimize finds grid optima") {
  const auto space1 = SearchSpace::uniform_grid(1, kDefaultLevels);
  auto quad = [](const std::vector<double>& x) { return (x[0] - 0.5) * (x[0] - 0.5); };
  const auto r = optimize(quad, space1, TpeConfig{50, 20, 24, 0.25, 1});
  CHECK(r.best.lambda[0] == 0.5);
  CHECK(r.history.trials.size() == 50);

  const auto space2 = SearchSpace::uniform_grid(2, kDefaultLevels);
  auto sum = [](const std::vector<double>& x) { return x[0] + x[1]; };
  const auto r2 = optimize(sum, space2, TpeConfig{100, 20, 24, 0.25, 2});
  CHECK(r2.best.lambda == std::vector<double>{0.0, 0.0});
}

TEST_CASE("optimize with n_trials == n_startup is random search") {
  const auto space = SearchSpace::uniform_grid(3, kDefaultLevels);
  auto f = [](const std::vector<double>& x) { return x[0] - x[1] + 2 * x[2]; };
  const auto r = optimize(f, space, TpeConfig{15, 15, 24, 0.25, 8});
  double best = 1e9;
  std::mt19937_64 rng(8);
  for (const auto& t : r.history.trials) {
    CHECK(t.lambda == sample_uniform(space, rng));
    best = std::min(best, t.loss);
  }
  CHECK(r.best.loss == best);
}

TEST_CASE("optimize is deterministic and records failures") {
  const auto space = SearchSpace::uniform_grid(2, kDefaultLevels);
  auto f = [](const std::vector<double>& x) {
    return x[0] == 0.0 ? std::numeric_limits<double>::quiet_NaN() : std::abs(x[0] - x[1]);
  };
  const auto a = optimize(f, space, TpeConfig{60, 10, 24, 0.25, 3});
  const auto b = optimize(f, space, TpeConfig{60, 10, 24, 0.25, 3});
  REQUIRE(a.history.trials.size() == b.history.trials.size());
  bool saw_failure = false;
  for (std::size_t i = 0; i < a.history.trials.size(); ++i) {
    CHECK(a.history.trials[i].lambda == b.history.trials[i].lambda);
    CHECK(a.history.trials[i].loss == b.history.trials[i].loss);
    if (a.history.trials[i].lambda[0] == 0.0) {
      CHECK(a.history.trials[i].loss == kFailedTrialLoss);
      saw_failure = true;
    }
  }
  CHECK(saw_failure);
  CHECK(std::isfinite(a.best.loss));

  std::ostringstream log;
  write_trial_log(log, a.history);
  std::istringstream lines(log.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    const auto rec = nlohmann::json::parse(line);
    CHECK(rec.at("trial").get<std::size_t>() == count);
    CHECK(rec.at("lambda").size() == 2);
    CHECK(rec.at("loss").is_null() == (a.history.trials[count].loss == kFailedTrialLoss));
    ++count;
  }
  CHECK(count == 60);
}

TEST_CASE("avoid_repeats only changes which unevaluated point is chosen") {
  const auto space = SearchSpace::uniform_grid(2, kDefaultLevels);
  auto f = [](const std::vector<double>& x) { return (x[0] - 0.25) * (x[0] - 0.25) + std::abs(x[1] - 0.75); };

  // Off: the history is exactly the plain suggest sequence.
  TpeConfig plain{40, 10, 24, 0.25, 5};
  plain.avoid_repeats = false;
  const auto a = optimize(f, space, plain);
  std::mt19937_64 rng(5);
  TrialHistory h;
  h.gamma = 0.25;
  for (std::size_t i = 0; i < 40; ++i) {
    auto x = i < 10 ? sample_uniform(space, rng) : suggest(space, h, 24, rng);
    h.trials.push_back({x, f(x)});
    CHECK(a.history.trials[i].lambda == x);
  }

  // On: repeats only happen when every candidate drawn was already seen, so
  // the number of distinct points can only grow relative to plain.
  const auto b = optimize(f, space, TpeConfig{40, 10, 24, 0.25, 5});
  std::set<std::vector<double>> da, db;
  for (const auto& t : a.history.trials) da.insert(t.lambda);
  for (const auto& t : b.history.trials) db.insert(t.lambda);
  CHECK(db.size() >= da.size());
  CHECK(b.best.lambda == std::vector<double>{0.25, 0.75});

  // With evaluated empty the variant matches plain suggest.
  const auto hist = history_of({{{1.0, 1.0}, 0}, {{0.0, 0.0}, 1}, {{0.5, 0.5}, 2}}, 0.25);
  std::mt19937_64 r1(3), r2(3);
  CHECK(suggest(space, hist, 24, r1) == suggest(space, hist, 24, r2, {}));
  // Excluding the plain argmax forces a different point when one was drawn.
  std::mt19937_64 r3(3), r4(3);
  const auto top = suggest(space, hist, 24, r3);
  const auto other = suggest(space, hist, 24, r4, {top});
  CHECK(other != top);
}

TEST_CASE("optimize reaches the 3-D separable optimum in 200 trials for at least 95 of 100 seeds") {
  const auto space = SearchSpace::uniform_grid(3, kDefaultLevels);
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::vector<double> c{kDefaultLevels[seed % 5], kDefaultLevels[(seed / 5) % 5], kDefaultLevels[(seed / 25) % 5]};
    auto f = [&](const std::vector<double>& x) {
      return (x[0] - c[0]) * (x[0] - c[0]) + std::abs(x[1] - c[1]) + 2 * (x[2] - c[2]) * (x[2] - c[2]);
    };
    hits += optimize(f, space, TpeConfig{200, 20, 24, 0.25, seed}).best.lambda == c;
  }
  CHECK(hits >= 95);
}

TEST_CASE("config and space validation") {
  CHECK_THROWS_AS(SearchSpace{}.validate(), OptimizerError);
  CHECK_THROWS_AS((SearchSpace{{{0.0, 0.0}}}.validate()), OptimizerError);
  CHECK_THROWS_AS((TpeConfig{10, 5, 24, 1.0, 0}.validate()), OptimizerError);
  CHECK_THROWS_AS((TpeConfig{0, 5, 24, 0.25, 0}.validate()), OptimizerError);
}
