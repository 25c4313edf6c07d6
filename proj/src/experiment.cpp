#include "mstl/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mstl/errors.hpp"
#include "mstl/nn_io.hpp"

namespace mstl {

using nlohmann::json;

namespace {

// Offsets that give each trained artifact its own seed stream.
constexpr std::uint64_t kFinetuneSeedOffset = 101;
constexpr std::uint64_t kNoTransferSeedOffset = 202;
constexpr std::uint64_t kMtlSeedOffset = 303;
constexpr std::uint64_t kMtlFinetuneSeedOffset = 404;
constexpr std::uint64_t kTpeSeedOffset = 505;

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string category_for(NetworkKind k) { return k == NetworkKind::mlp ? "MSM" : "MSL"; }

json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"optimizer", to_string(c.optimizer)}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
  if (j.contains("epochs")) base.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("learning_rate")) base.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("batch_size")) base.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("optimizer")) base.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  base.validate();
  return base;
}

json row_json(const ReportRow& r) {
  return {{"category", r.category}, {"model", r.model}, {"network", to_string(r.network)},
          {"mape", r.metrics.mape}, {"rmse", r.metrics.rmse}, {"r2", r.metrics.r2}};
}

json series_summary(const PriceSeries& s) {
  return {{"symbol", s.symbol()},
          {"length", s.size()},
          {"first_date", format_date(s.observations().front().date)},
          {"last_date", format_date(s.observations().back().date)}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string fingerprint_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Eigen::VectorXd row_of(const PoolPredictions& p, std::size_t i) {
  return p.row(static_cast<Eigen::Index>(i)).transpose();
}

// Prepared inputs shared by every network type in a run.
struct PreparedRun {
  LoadedSeries series;
  PreparedTarget target;
  std::vector<PreparedSource> sources;

  std::vector<SourceWindows> source_windows() const {
    std::vector<SourceWindows> out;
    for (const auto& s : sources) out.push_back({s.id, s.windows});
    return out;
  }
};

PreparedRun prepare_run(const ExperimentConfig& cfg, std::string& stage) {
  stage = "ingest";
  auto series = load_series(cfg);
  stage = "prepare";
  auto target = prepare_target(series.target, cfg.lookback, cfg.horizon);
  std::vector<PreparedSource> sources;
  for (const auto& s : series.sources) sources.push_back(prepare_source(s, cfg.lookback, cfg.horizon));
  return {std::move(series), std::move(target), std::move(sources)};
}

struct PoolRun {
  ModelPool pool;
  PoolPredictions validation;
  PoolPredictions test;
};

PoolRun run_pool(const ExperimentConfig& cfg, const PreparedRun& run, NetworkKind kind) {
  TrainConfig pre = cfg.pretrain;
  pre.seed = cfg.seed;
  TrainConfig fine = cfg.finetune;
  fine.seed = cfg.seed + kFinetuneSeedOffset;
  const auto& split = run.target.split;
  PoolRun out{build_pool(cfg.spec_for(kind), run.source_windows(), cfg.target.symbol, split.train,
                         pre, fine),
              {}, {}};
  out.validation = out.pool.predict(split.validation.inputs);
  out.test = out.pool.predict(split.test.inputs);
  if (cfg.save_pools) save_pool(out.pool, cfg.output / ("pool_" + to_string(kind)), pre, fine);
  return out;
}

// Similarity of each source to the target training segment.
std::vector<double> similarity_values(const PreparedRun& run, SimilarityKind kind) {
  const SimilarityInput target{run.target.scaled_train_values, run.target.split.train.inputs};
  std::vector<double> values;
  for (const auto& s : run.sources) values.push_back(measure(kind, {s.scaled_values, s.windows.inputs}, target));
  return values;
}

void write_report_files(const ExperimentConfig& cfg, const json& report) {
  std::filesystem::create_directories(cfg.output);
  write_text(cfg.output / "report.json", report.dump(2) + "\n");
  write_text(cfg.output / "report.txt", render_report_table(report));
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string to_string(NetworkKind k) { return k == NetworkKind::mlp ? "mlp" : "lstm"; }

std::string to_string(Method m) {
  switch (m) {
    case Method::wtl:
      return "wtl";
    case Method::sb:
      return "sb";
    case Method::mtl:
      return "mtl";
    case Method::ae:
      return "ae";
    case Method::waetl:
      return "waetl";
    case Method::fes:
      return "fes";
    case Method::tpees:
      return "tpees";
  }
  return "wtl";
}

Method parse_method(const std::string& s) {
  for (auto m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown method '" + s + "'");
}

bool ExperimentConfig::wants(Method m) const {
  return std::find(methods.begin(), methods.end(), m) != methods.end();
}

NetworkSpec ExperimentConfig::spec_for(NetworkKind k) const {
  if (k == NetworkKind::mlp) return mlp_spec ? *mlp_spec : canonical_mlp(lookback);
  return lstm_spec ? *lstm_spec : canonical_lstm(lookback);
}

void ExperimentConfig::validate() const {
  if (target.symbol.empty()) throw ConfigError("target symbol is empty");
  if (methods.empty()) throw ConfigError("no methods selected");
  if (networks.empty()) throw ConfigError("no network selected");
  std::set<std::string> ids;
  for (const auto& s : sources) {
    if (s.symbol == target.symbol) throw ConfigError("source '" + s.symbol + "' is also the target");
    if (!ids.insert(s.symbol).second) throw ConfigError("duplicate source symbol '" + s.symbol + "'");
  }
  const bool needs_sources = std::any_of(methods.begin(), methods.end(),
                                         [](Method m) { return m != Method::wtl; });
  if (needs_sources && sources.empty()) throw ConfigError("transfer methods need at least one source");
  if (lookback == 0 || horizon == 0) throw ConfigError("lookback and horizon must be positive");
  for (auto k : networks) {
    const auto spec = spec_for(k);
    if (spec.input_length != lookback) {
      throw ConfigError(to_string(k) + " architecture input length does not match lookback");
    }
    if ((k == NetworkKind::lstm) != spec.recurrent()) {
      throw ConfigError(to_string(k) + " architecture has the wrong layer kinds");
    }
  }
  pretrain.validate();
  finetune.validate();
  tpe.validate();
  if (fes_max_iters == 0) throw ConfigError("fes max_iters must be positive");
}

ExperimentConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  try {
    ExperimentConfig cfg;
    auto ref = [&](const json& r) {
      std::filesystem::path p = r.at("csv").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      return SeriesRef{r.at("symbol").get<std::string>(), p};
    };
    cfg.target = ref(j.at("target"));
    for (const auto& s : j.value("sources", json::array())) cfg.sources.push_back(ref(s));
    cfg.column = j.value("column", cfg.column);
    if (j.contains("network")) {
      const auto n = j.at("network").get<std::string>();
      if (n == "mlp") {
        cfg.networks = {NetworkKind::mlp};
      } else if (n == "lstm") {
        cfg.networks = {NetworkKind::lstm};
      } else if (n == "both") {
        cfg.networks = {NetworkKind::mlp, NetworkKind::lstm};
      } else {
        throw ConfigError("network must be mlp, lstm or both, got '" + n + "'");
      }
    }
    if (j.contains("methods")) {
      const auto& m = j.at("methods");
      if (!(m.is_string() && m.get<std::string>() == "all")) {
        cfg.methods.clear();
        // Keep report order regardless of listing order.
        std::set<Method> wanted;
        for (const auto& name : m) wanted.insert(parse_method(name.get<std::string>()));
        for (auto k : kAllMethods) {
          if (wanted.count(k)) cfg.methods.push_back(k);
        }
      }
    }
    if (j.contains("similarity")) cfg.similarity = parse_similarity(j.at("similarity").get<std::string>());
    cfg.lookback = j.value("lookback", cfg.lookback);
    cfg.horizon = j.value("horizon", cfg.horizon);
    if (j.contains("pretrain")) cfg.pretrain = train_config_from_json(j.at("pretrain"), cfg.pretrain);
    if (j.contains("finetune")) cfg.finetune = train_config_from_json(j.at("finetune"), cfg.finetune);
    if (j.contains("tpe")) {
      const auto& t = j.at("tpe");
      cfg.tpe.n_trials = t.value("trials", cfg.tpe.n_trials);
      cfg.tpe.n_startup = t.value("startup", cfg.tpe.n_startup);
      cfg.tpe.gamma = t.value("gamma", cfg.tpe.gamma);
      cfg.tpe.n_candidates = t.value("candidates", cfg.tpe.n_candidates);
      cfg.tpe.avoid_repeats = t.value("avoid_repeats", cfg.tpe.avoid_repeats);
    }
    if (j.contains("fes")) cfg.fes_max_iters = j.at("fes").value("max_iters", cfg.fes_max_iters);
    if (j.contains("architectures")) {
      const auto& a = j.at("architectures");
      if (a.contains("mlp")) cfg.mlp_spec = spec_from_json(a.at("mlp"));
      if (a.contains("lstm")) cfg.lstm_spec = spec_from_json(a.at("lstm"));
    }
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("output")) {
      std::filesystem::path out = j.at("output").get<std::string>();
      if (out.is_relative() && !base_dir.empty()) out = base_dir / out;
      cfg.output = out;
    }
    cfg.save_pools = j.value("save_pools", cfg.save_pools);
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json config_to_json(const ExperimentConfig& cfg) {
  json sources = json::array();
  for (const auto& s : cfg.sources) sources.push_back({{"symbol", s.symbol}, {"csv", s.csv.string()}});
  json methods = json::array();
  for (auto m : cfg.methods) methods.push_back(to_string(m));
  json networks = json::array();
  for (auto k : cfg.networks) networks.push_back(to_string(k));
  json archs = json::object();
  for (auto k : cfg.networks) archs[to_string(k)] = spec_to_json(cfg.spec_for(k));
  return {{"target", {{"symbol", cfg.target.symbol}, {"csv", cfg.target.csv.string()}}},
          {"sources", sources},
          {"column", cfg.column},
          {"networks", networks},
          {"methods", methods},
          {"similarity", to_string(cfg.similarity)},
          {"lookback", cfg.lookback},
          {"horizon", cfg.horizon},
          {"pretrain", train_config_to_json(cfg.pretrain)},
          {"finetune", train_config_to_json(cfg.finetune)},
          {"tpe",
           {{"trials", cfg.tpe.n_trials},
            {"startup", cfg.tpe.n_startup},
            {"gamma", cfg.tpe.gamma},
            {"candidates", cfg.tpe.n_candidates},
            {"avoid_repeats", cfg.tpe.avoid_repeats}}},
          {"fes", {{"max_iters", cfg.fes_max_iters}}},
          {"architectures", archs},
          {"seed", cfg.seed}};
}

LoadedSeries load_series(const ExperimentConfig& cfg) {
  const std::size_t min_rows = cfg.lookback + cfg.horizon + 1;
  auto load = [&](const SeriesRef& r) {
    const auto s = ingest_csv(r.csv, cfg.column, min_rows);
    return PriceSeries(r.symbol, s.observations());
  };
  LoadedSeries out{load(cfg.target), {}};
  for (const auto& s : cfg.sources) out.sources.push_back(load(s));
  return out;
}

std::size_t expected_row_count(const ExperimentConfig& cfg) {
  // One row per method per network type.
  return cfg.methods.size() * cfg.networks.size();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  json report{{"format", "mstl-report"},
              {"version", 1},
              {"status", "running"},
              {"config", config_to_json(cfg)},
              {"notes", json::array({"ARIMA and SVR baselines are not produced by this runner."})},
              {"rows", json::array()},
              {"selections", json::object()}};

  // Rows grouped by category so the final order is WTL, SB, MSM, MSL.
  std::map<std::string, std::vector<ReportRow>> grouped;
  auto ordered_rows = [&] {
    std::vector<ReportRow> rows;
    for (const char* cat : {"WTL", "SB", "MSM", "MSL"}) {
      for (const auto& r : grouped[cat]) rows.push_back(r);
    }
    return rows;
  };

  std::string stage = "validate";
  try {
    const auto run = prepare_run(cfg, stage);
    const auto& split = run.target.split;
    const auto& scaling = split.scaling();
    json sources = json::array();
    for (const auto& s : run.series.sources) sources.push_back(series_summary(s));
    report["target"] = series_summary(run.series.target);
    report["target"]["windows"] = {{"train", split.train.size()},
                                   {"validation", split.validation.size()},
                                   {"test", split.test.size()}};
    report["target"]["scaling"] = {{"lo", scaling.lo}, {"hi", scaling.hi}};
    report["sources"] = sources;

    std::vector<double> sim_values, sim_weights;
    if (cfg.wants(Method::waetl)) {
      stage = "similarity";
      sim_values = similarity_values(run, cfg.similarity);
      sim_weights = similarity_to_weights(sim_values, cfg.similarity);
    }

    for (auto kind : cfg.networks) {
      const std::string net = to_string(kind);
      const auto spec = cfg.spec_for(kind);
      json sel = json::object();
      auto add = [&](const std::string& category, const std::string& model, const Eigen::VectorXd& test_pred) {
        grouped[category].push_back({category, model, kind, evaluate(test_pred, split.test.targets, scaling)});
      };

      if (cfg.wants(Method::wtl)) {
        stage = "wtl-" + net;
        TrainConfig c = cfg.pretrain;
        c.seed = cfg.seed + kNoTransferSeedOffset;
        const auto trained = train(init_network(spec, c.seed), split.train, c);
        add("WTL", upper(net), trained.network.forward(split.test.inputs));
      }

      const bool needs_pool = cfg.wants(Method::sb) || cfg.wants(Method::ae) || cfg.wants(Method::waetl) ||
                              cfg.wants(Method::fes) || cfg.wants(Method::tpees);
      std::optional<PoolRun> pool;
      if (needs_pool) {
        stage = "pool-" + net;
        pool = run_pool(cfg, run, kind);
        json ids = json::array();
        for (const auto& e : pool->pool.entries) ids.push_back(e.source_id);
        sel["pool"] = {{"sources", ids}, {"fingerprint", fingerprint_hex(pool_fingerprint(pool->pool))}};
      }

      if (cfg.wants(Method::sb)) {
        stage = "sb-" + net;
        const auto best = single_best(pool->validation, split.validation.targets);
        sel["sb"] = {{"index", best}, {"source", pool->pool.entries[best].source_id}};
        add("SB", upper(net), row_of(pool->test, best));
      }
      const std::string cat = category_for(kind);
      if (cfg.wants(Method::mtl)) {
        stage = "mtl-" + net;
        TrainConfig joint = cfg.pretrain;
        joint.seed = cfg.seed + kMtlSeedOffset;
        TrainConfig fine = cfg.finetune;
        fine.seed = cfg.seed + kMtlFinetuneSeedOffset;
        const auto mtl = train_mtl(spec, run.source_windows(), split.train, joint, fine);
        add(cat, "MTL", mtl.network.forward(split.test.inputs));
      }
      if (cfg.wants(Method::ae)) {
        stage = "ae-" + net;
        add(cat, "AE", average_ensemble(pool->test));
      }
      if (cfg.wants(Method::waetl)) {
        stage = "waetl-" + net;
        sel["waetl"] = {{"similarity", to_string(cfg.similarity)}, {"values", sim_values}, {"weights", sim_weights}};
        add(cat, "WAETL", waetl(pool->test, sim_weights));
      }
      if (cfg.wants(Method::fes)) {
        stage = "fes-" + net;
        const auto f = fes(pool->validation, split.validation.targets, cfg.fes_max_iters);
        sel["fes"] = {{"selection", f.selection},
                      {"counts", f.counts(pool->pool.size())},
                      {"mse_history", f.mse_history}};
        add(cat, "FES", apply_selection(pool->test, f.selection));
      }
      if (cfg.wants(Method::tpees)) {
        stage = "tpees-" + net;
        TpeConfig t = cfg.tpe;
        t.seed = cfg.seed + kTpeSeedOffset;
        const auto r = tpees(pool->validation, split.validation.targets, t);
        sel["tpees"] = {{"lambda", r.lambda}, {"validation_mse", r.validation_mse}, {"trials", r.history.trials.size()}};
        std::filesystem::create_directories(cfg.output);
        std::ofstream log(cfg.output / ("tpees_" + net + "_trials.jsonl"));
        write_trial_log(log, r.history);
        add(cat, "TPEES", r.combine(pool->test));
      }
      report["selections"][net] = sel;
    }

    stage = "report";
    const auto rows = ordered_rows();
    for (const auto& r : rows) report["rows"].push_back(row_json(r));
    report["status"] = "ok";
    write_report_files(cfg, report);
    return {rows, report};
  } catch (const std::exception& e) {
    report["status"] = "failed";
    report["failed_stage"] = stage;
    report["error"] = e.what();
    report["rows"] = json::array();
    for (const auto& r : ordered_rows()) report["rows"].push_back(row_json(r));
    try {
      write_report_files(cfg, report);
    } catch (const std::exception&) {
      // The original failure is the one worth reporting.
    }
    throw Error(stage + ": " + e.what());
  }
}

DistanceComparison compare_distances(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.sources.empty()) throw ConfigError("compare-distances needs at least one source");
  std::string stage = "validate";
  try {
    const auto run = prepare_run(cfg, stage);
    const auto& split = run.target.split;
    DistanceComparison out;
    out.report = {{"format", "mstl-distance-comparison"}, {"version", 1}, {"config", config_to_json(cfg)},
                  {"rows", json::array()}};
    for (auto kind : cfg.networks) {
      stage = "pool-" + to_string(kind);
      const auto pool = run_pool(cfg, run, kind);
      for (auto sim : kAllSimilarityKinds) {
        stage = "waetl-" + to_string(kind) + "-" + to_string(sim);
        DistanceRow row;
        row.network = kind;
        row.kind = sim;
        row.values = similarity_values(run, sim);
        row.weights = similarity_to_weights(row.values, sim);
        row.metrics = evaluate(waetl(pool.test, row.weights), split.test.targets, split.scaling());
        row.pool_fingerprint = pool_fingerprint(pool.pool);
        out.report["rows"].push_back({{"network", to_string(kind)},
                                      {"similarity", to_string(sim)},
                                      {"values", row.values},
                                      {"weights", row.weights},
                                      {"mape", row.metrics.mape},
                                      {"rmse", row.metrics.rmse},
                                      {"r2", row.metrics.r2},
                                      {"pool_fingerprint", fingerprint_hex(row.pool_fingerprint)}});
        out.rows.push_back(std::move(row));
      }
    }
    stage = "report";
    std::filesystem::create_directories(cfg.output);
    write_text(cfg.output / "compare.json", out.report.dump(2) + "\n");
    write_text(cfg.output / "compare.txt", render_distance_table(out.report));
    return out;
  } catch (const std::exception& e) {
    throw Error(stage + ": " + e.what());
  }
}

std::string render_report_table(const json& report) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %-8s %10s %10s %10s\n", "Category", "Model", "MAPE", "RMSE", "R2");
  out << line;
  for (const auto& r : report.at("rows")) {
    std::snprintf(line, sizeof line, "%-10s %-8s %10s %10s %10s\n", r.at("category").get<std::string>().c_str(),
                  r.at("model").get<std::string>().c_str(), format_metric(r.at("mape").get<double>()).c_str(),
                  format_metric(r.at("rmse").get<double>()).c_str(), format_metric(r.at("r2").get<double>()).c_str());
    out << line;
  }
  out << "MAPE in percent, RMSE in price units, metrics on the target test split.\n";
  if (report.contains("notes")) {
    for (const auto& n : report.at("notes")) out << n.get<std::string>() << '\n';
  }
  if (report.value("status", "ok") != "ok") {
    out << "FAILED at stage '" << report.value("failed_stage", "?") << "': " << report.value("error", "")
        << '\n';
  }
  return out.str();
}

std::string render_distance_table(const json& report) {
  std::ostringstream out;
  char line[128];
  std::map<std::string, std::map<std::string, json>> by_network;
  std::vector<std::string> order;
  for (const auto& r : report.at("rows")) {
    const auto net = r.at("network").get<std::string>();
    if (!by_network.count(net)) order.push_back(net);
    by_network[net][r.at("similarity").get<std::string>()] = r;
  }
  for (const auto& net : order) {
    out << "WAETL (" << upper(net) << ")\n";
    std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %10s\n", "Metric", "Coral", "WD", "DTW", "PCC");
    out << line;
    for (const char* metric : {"mape", "rmse", "r2"}) {
      std::string cells[4];
      int c = 0;
      for (const char* kind : {"coral", "wasserstein", "dtw", "pcc"}) {
        const auto& cell = by_network[net][kind];
        cells[c++] = cell.is_null() ? "-" : format_metric(cell.at(metric).get<double>());
      }
      std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %10s\n", upper(metric).c_str(), cells[0].c_str(),
                    cells[1].c_str(), cells[2].c_str(), cells[3].c_str());
      out << line;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mstl
