// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "mstl/ensemble.hpp"
#include "mstl/experiment.hpp"
#include "mstl/metrics.hpp"
#include "mstl/nn.hpp"
#include "mstl/similarity.hpp"
#include "mstl/synthetic.hpp"
#include "mstl/tpe.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace mstl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

NetworkSpec mlp_22_4_1() {
  return {22, {{LayerKind::dense, 4, Activation::tanh}, {LayerKind::dense, 1, Activation::linear}}};
}

NetworkSpec lstm_3_1() {
  return {22, {{LayerKind::lstm, 3, Activation::tanh}, {LayerKind::dense, 1, Activation::linear}}};
}

Outcome gradient_correctness() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Eigen::MatrixXd x(6, 22);
    Eigen::VectorXd y(6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = u(rng);
    for (const auto& spec : {mlp_22_4_1(), lstm_3_1()}) {
      Network net = init_network(spec, seed);
      // Move biases off zero so every parameter path is exercised.
      for (auto& p : net.parameters()) p += 0.1 * u(rng);
      worst = std::max(worst, gradient_check(net, x, y, 1e-5));
    }
  }
  return {worst < 1e-4, "max relative error " + std::to_string(worst)};
}

Outcome training_sanity() {
  std::vector<double> raw(222);
  for (std::size_t t = 0; t < raw.size(); ++t) raw[t] = std::sin(0.2 * static_cast<double>(t));
  const auto data = make_windows(raw, 22, 1, ScalingParams{-1.0, 1.0});
  const TrainConfig cfg{500, 1e-3, 64, OptimizerKind::adam, 0};
  const auto r = train(init_network(canonical_mlp(), 0), data, cfg);
  const double mse = mse_loss(r.network.forward(data.inputs), data.targets);
  return {data.size() == 200 && mse < 1e-3, "training MSE after 500 epochs " + std::to_string(mse)};
}

Outcome distance_oracles() {
  std::mt19937_64 rng(42);
  std::size_t dtw_bad = 0, w1_bad = 0;
  for (int i = 0; i < 200; ++i) {
    const auto a = oracle::random_vector(rng, 1 + rng() % 6), b = oracle::random_vector(rng, 1 + rng() % 6);
    dtw_bad += dtw_distance(a, b) != oracle::dtw_brute_force(a, b);
    const auto c = oracle::random_vector(rng, 1 + rng() % 6), d = oracle::random_vector(rng, 1 + rng() % 6);
    w1_bad += std::abs(wasserstein_1d(c, d) - oracle::wasserstein_lp(c, d)) > 1e-9;
  }
  const Eigen::MatrixXd s = Eigen::MatrixXd::Random(30, 5);
  Eigen::MatrixXd perm = s.colwise().reverse();
  std::vector<Eigen::Index> idx(30);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (Eigen::Index i = 0; i < 30; ++i) perm.row(i) = s.row(idx[static_cast<std::size_t>(i)]);
  const double coral = coral_distance(s, perm);
  const auto a = oracle::random_vector(rng, 40);
  std::vector<double> b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = 2 * a[i] + 1;
  const double r = pcc(a, b);
  const bool pass = dtw_bad == 0 && w1_bad == 0 && std::abs(coral) < 1e-12 && std::abs(r - 1.0) < 1e-12;
  std::ostringstream out;
  out << "dtw mismatches " << dtw_bad << "/200, w1 mismatches " << w1_bad << "/200, coral(perm) " << coral
      << ", pcc(a,2a+1) " << r;
  return {pass, out.str()};
}

Outcome combiner_identities() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100);
  double ae_gap = 0, scale_gap = 0, first_gap = 0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 8);
    const PoolPredictions p = PoolPredictions::Random(n, 20);
    std::vector<double> uniform(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n));
    ae_gap = std::max(ae_gap, (waetl(p, uniform) - average_ensemble(p)).cwiseAbs().maxCoeff());
    std::vector<double> lambda(static_cast<std::size_t>(n)), scaled(lambda.size());
    for (auto& l : lambda) l = kDefaultLevels[rng() % 5];
    lambda[0] = 0.75;
    const double c = scale(rng);
    for (std::size_t k = 0; k < lambda.size(); ++k) scaled[k] = c * lambda[k];
    scale_gap = std::max(scale_gap, (combine_lambda(p, lambda) - combine_lambda(p, scaled)).cwiseAbs().maxCoeff());
    std::vector<double> first(static_cast<std::size_t>(n), 0.0);
    first[0] = 1.0;
    first_gap = std::max(first_gap, (combine_lambda(p, first) - p.row(0).transpose()).cwiseAbs().maxCoeff());
  }
  std::ostringstream out;
  out << "|WAETL(uniform)-AE| " << ae_gap << ", |comb(l)-comb(cl)| " << scale_gap << ", |comb(e0)-model0| "
      << first_gap;
  return {ae_gap <= 1e-12 && scale_gap <= 1e-12 && first_gap == 0.0, out.str()};
}

Outcome tpe_optimizer() {
  const auto grid1 = SearchSpace::uniform_grid(1, kDefaultLevels);
  const auto grid2 = SearchSpace::uniform_grid(2, kDefaultLevels);
  int hits1 = 0, hits2 = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r1 = optimize([](const std::vector<double>& x) { return (x[0] - 0.5) * (x[0] - 0.5); }, grid1,
                             TpeConfig{50, 20, 24, 0.25, seed});
    hits1 += r1.best.lambda[0] == 0.5;
    // A different separable objective per seed, optimum at a grid point.
    const double cx = kDefaultLevels[seed % 5], cy = kDefaultLevels[(seed / 5) % 5];
    const auto r2 = optimize(
        [&](const std::vector<double>& x) { return (x[0] - cx) * (x[0] - cx) + std::abs(x[1] - cy); }, grid2,
        TpeConfig{100, 20, 24, 0.25, seed});
    hits2 += r2.best.lambda == std::vector<double>{cx, cy};
  }
  return {hits1 >= 95 && hits2 >= 95,
          "1-D optimum found " + std::to_string(hits1) + "/100, 2-D optimum found " + std::to_string(hits2) + "/100"};
}

Outcome tpees_vs_exhaustive() {
  // Hand-built pools: model i = truth + bias_i + wiggle_i, so the best
  // combination needs to cancel biases against each other.
  const Eigen::Index m = 40;
  const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(m, 0, 6).array().sin();
  const std::vector<std::vector<double>> biases{
      {0.4, -0.2}, {0.3, -0.1, 0.5}, {0.6, -0.3, 0.2, -0.5}, {0.1, 0.2, -0.4, 0.3}};
  int ok = 0;
  double worst_ratio = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto& b = biases[seed % biases.size()];
    PoolPredictions p(static_cast<Eigen::Index>(b.size()), m);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      for (Eigen::Index c = 0; c < m; ++c) {
        p(i, c) = t(c) + b[static_cast<std::size_t>(i)] + 0.05 * std::cos(static_cast<double>((i + 2) * c));
      }
    }
    const double best = oracle::best_lambda_mse(p, t, kDefaultLevels);
    const auto r = tpees(p, t, TpeConfig{200, 20, 24, 0.25, seed});
    const double ratio = r.validation_mse / best;
    worst_ratio = std::max(worst_ratio, ratio);
    ok += ratio <= 1.05;
  }
  return {ok >= 90, "within 5% of the grid optimum in " + std::to_string(ok) + "/100 seeds (worst ratio " +
                        std::to_string(worst_ratio) + ")"};
}

Outcome fes_contract() {
  std::mt19937_64 rng(99);
  int ok = 0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 10);
    const PoolPredictions p = PoolPredictions::Random(n, 30);
    const Eigen::VectorXd t = Eigen::VectorXd::Random(30);
    const auto f = fes(p, t);
    bool good = true;
    for (std::size_t k = 1; k < f.mse_history.size(); ++k) good &= f.mse_history[k] <= f.mse_history[k - 1];
    double single = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < n; ++r) single = std::min(single, mse_loss(p.row(r).transpose(), t));
    good &= mse_loss(apply_selection(p, f.selection), t) <= single;
    ok += good;
  }
  return {ok == 100, std::to_string(ok) + "/100 pools satisfy the contract"};
}

ExperimentConfig synthetic_config(const testutil::TempDir& dir, std::uint64_t seed,
                                  const std::vector<Method>& methods) {
  SyntheticFamilyConfig fam;
  fam.seed = seed;
  const auto f = synthetic_family(fam);
  ExperimentConfig cfg;
  write_yahoo_csv(f.target, dir.path() / "TGT.csv");
  cfg.target = {"TGT", dir.path() / "TGT.csv"};
  for (const auto& s : f.sources) {
    write_yahoo_csv(s, dir.path() / (s.symbol() + ".csv"));
    cfg.sources.push_back({s.symbol(), dir.path() / (s.symbol() + ".csv")});
  }
  cfg.networks = {NetworkKind::mlp};
  cfg.methods = methods;
  cfg.seed = seed;
  cfg.output = dir.path() / "out";
  return cfg;
}

Outcome directional_transfer() {
  int wins = 0;
  std::ostringstream out;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    testutil::TempDir dir("mstl_accept_dir");
    const auto r = run_experiment(synthetic_config(dir, seed, {Method::wtl, Method::tpees}));
    const double wtl = r.rows.at(0).metrics.rmse, tpees = r.rows.at(1).metrics.rmse;
    wins += tpees <= wtl;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.3f/%.3f", seed ? " " : "", tpees, wtl);
    out << buf;
  }
  return {wins >= 7, "TPEES-MLP <= WTL-MLP test RMSE in " + std::to_string(wins) + "/10 seeds (" + out.str() + ")"};
}

Outcome metrics_examples() {
  auto v = [](std::initializer_list<double> x) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(x.begin(), static_cast<Eigen::Index>(x.size())));
  };
  const double m = mape(v({90, 121}), v({100, 110}));
  const double e = rmse(v({2, 4}), v({1, 3}));
  const double q = r2(v({1, 2, 4}), v({1, 2, 3}));
  const ScalingParams sc{12.5, 40.0};
  const Eigen::VectorXd a = v({-0.8, -0.1, 0.3, 0.9}), p = v({-0.7, -0.3, 0.35, 0.6});
  const double ratio = evaluate(p, a, sc).rmse / std::sqrt(mse_loss(p, a));
  const bool pass = std::abs(m - 10.0) <= 1e-12 && std::abs(e - 1.0) <= 1e-12 && std::abs(q - 0.5) <= 1e-12 &&
                    std::abs(ratio - (sc.hi - sc.lo) / 2) <= 1e-12;
  std::ostringstream out;
  out.precision(15);
  out << "mape " << m << ", rmse " << e << ", r2 " << q << ", rmse ratio " << ratio << " vs "
      << (sc.hi - sc.lo) / 2;
  return {pass, out.str()};
}

Outcome end_to_end_determinism() {
  testutil::TempDir dir("mstl_accept_det");
  auto cfg = synthetic_config(dir, 3, {std::begin(kAllMethods), std::end(kAllMethods)});
  cfg.pretrain.epochs = 30;
  cfg.finetune.epochs = 15;
  cfg.output = dir.path() / "a";
  run_experiment(cfg);
  cfg.output = dir.path() / "b";
  run_experiment(cfg);
  const auto a = testutil::read_file(dir.path() / "a" / "report.json");
  const auto b = testutil::read_file(dir.path() / "b" / "report.json");
  return {!a.empty() && a == b, "two runs, " + std::to_string(a.size()) + " byte reports, identical: " +
                                    (a == b ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", 30, gradient_correctness},
      {2, "training sanity", 60, training_sanity},
      {3, "distance oracles", 0, distance_oracles},
      {4, "combiner identities", 0, combiner_identities},
      {5, "TPE optimizer", 30, tpe_optimizer},
      {6, "TPEES vs exhaustive grid", 120, tpees_vs_exhaustive},
      {7, "FES contract", 0, fes_contract},
      {8, "directional transfer", 900, directional_transfer},
      {9, "metrics", 0, metrics_examples},
      {10, "end-to-end determinism", 0, end_to_end_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += " (over the " + std::to_string(static_cast<int>(c.budget_s)) + " s budget)";
    }
    failed += !o.pass;
    std::printf("criterion %2d %-26s %s  %.1fs  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
