#pragma once

// Experiment runner: configures a target and its sources, runs the requested
// method families for each network type and reports test-split metrics in
// the Category / Model / MAPE / RMSE / R2 layout.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mstl/metrics.hpp"
#include "mstl/nn.hpp"
#include "mstl/similarity.hpp"
#include "mstl/tpe.hpp"
#include "mstl/transfer.hpp"

namespace mstl {

enum class NetworkKind { mlp, lstm };
std::string to_string(NetworkKind k);

enum class Method { wtl, sb, mtl, ae, waetl, fes, tpees };
inline constexpr Method kAllMethods[] = {Method::wtl, Method::sb,    Method::mtl,  Method::ae,
                                         Method::waetl, Method::fes, Method::tpees};
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct SeriesRef {
  std::string symbol;
  std::filesystem::path csv;
};

struct ExperimentConfig {
  SeriesRef target;
  std::vector<SeriesRef> sources;
  std::string column = "Close";
  std::vector<NetworkKind> networks{NetworkKind::mlp, NetworkKind::lstm};
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  SimilarityKind similarity = SimilarityKind::wasserstein;
  std::size_t lookback = kDefaultLookback;
  std::size_t horizon = kDefaultHorizon;
  TrainConfig pretrain{200, 1e-3, 64, OptimizerKind::adam, 0};
  TrainConfig finetune{100, 1e-3, 64, OptimizerKind::adam, 0};
  TpeConfig tpe{};
  std::size_t fes_max_iters = kDefaultFesIterations;
  std::optional<NetworkSpec> mlp_spec;   // defaults to the canonical MLP
  std::optional<NetworkSpec> lstm_spec;  // defaults to the canonical LSTM
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  bool save_pools = false;

  bool wants(Method m) const;
  NetworkSpec spec_for(NetworkKind k) const;
  void validate() const;
};

// Relative csv paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

struct ReportRow {
  std::string category;  // WTL, SB, MSM, MSL
  std::string model;     // MLP, LSTM, MTL, AE, WAETL, FES, TPEES
  NetworkKind network = NetworkKind::mlp;
  EvalReport metrics;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  nlohmann::json report;  // full artifact, including rows and selections
};

// Rows expected for a (methods, networks) setting, in report order.
std::size_t expected_row_count(const ExperimentConfig& cfg);

// Runs everything; writes report.json, report.txt and per-network TPEES
// trial logs into cfg.output. On a stage failure the partial report is
// written with status "failed" and the error is rethrown as
// Error("<stage>: <cause>").
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct DistanceRow {
  NetworkKind network = NetworkKind::mlp;
  SimilarityKind kind = SimilarityKind::coral;
  std::vector<double> values;
  std::vector<double> weights;
  EvalReport metrics;
  std::uint64_t pool_fingerprint = 0;
};

struct DistanceComparison {
  std::vector<DistanceRow> rows;  // networks x the four kinds
  nlohmann::json report;
};

// WAETL under all four similarity kinds on one shared pool per network.
// Writes compare.json and compare.txt into cfg.output.
DistanceComparison compare_distances(const ExperimentConfig& cfg);

// Plain-text renderers for report.json / compare.json documents.
std::string render_report_table(const nlohmann::json& report);
std::string render_distance_table(const nlohmann::json& report);

// Loaded, symbol-renamed series for the target and sources of a config.
struct LoadedSeries {
  PriceSeries target;
  std::vector<PriceSeries> sources;
};
LoadedSeries load_series(const ExperimentConfig& cfg);

}  // namespace mstl
