// Command-line front end: ingest, run, compare-distances, report, synth.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mstl/errors.hpp"
#include "mstl/experiment.hpp"
#include "mstl/synthetic.hpp"

namespace {

mstl::ExperimentConfig configure(const std::string& path, const std::optional<std::uint64_t>& seed,
                                 const std::string& out) {
  auto cfg = mstl::load_config(path);
  if (seed) cfg.seed = *seed;
  if (!out.empty()) cfg.output = out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source transfer learning for price-series forecasting"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Override the config seed");
    cmd->add_option("--out", out_dir, "Override the output directory");
  };

  auto* ingest = app.add_subcommand("ingest", "Validate the configured CSV files");
  ingest->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "Run the configured experiment");
  add_common(run);

  auto* compare = app.add_subcommand("compare-distances", "WAETL under every similarity measure");
  add_common(compare);

  std::string report_path;
  auto* report = app.add_subcommand("report", "Render a report.json or compare.json as text");
  report->add_option("report", report_path, "JSON artifact")->required()->check(CLI::ExistingFile);

  std::string synth_dir;
  mstl::SyntheticFamilyConfig synth_cfg;
  auto* synth = app.add_subcommand("synth", "Write a synthetic family of CSVs and a matching config");
  synth->add_option("dir", synth_dir, "Destination directory")->required();
  synth->add_option("--sources", synth_cfg.n_sources, "Number of source series");
  synth->add_option("--source-length", synth_cfg.source_length, "Source length");
  synth->add_option("--target-length", synth_cfg.target_length, "Target length");
  synth->add_option("--seed", synth_cfg.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (ingest->parsed()) {
      const auto cfg = mstl::load_config(config_path);
      const auto series = mstl::load_series(cfg);
      auto show = [](const char* role, const mstl::PriceSeries& s) {
        std::cout << role << ' ' << s.symbol() << ": " << s.size() << " rows, "
                  << mstl::format_date(s.observations().front().date) << " .. "
                  << mstl::format_date(s.observations().back().date) << '\n';
      };
      show("target", series.target);
      for (const auto& s : series.sources) show("source", s);
    } else if (run->parsed()) {
      const auto cfg = configure(config_path, seed, out_dir);
      const auto result = mstl::run_experiment(cfg);
      std::cout << mstl::render_report_table(result.report);
      std::cout << "wrote " << (cfg.output / "report.json").string() << '\n';
    } else if (compare->parsed()) {
      const auto cfg = configure(config_path, seed, out_dir);
      const auto result = mstl::compare_distances(cfg);
      std::cout << mstl::render_distance_table(result.report);
      std::cout << "wrote " << (cfg.output / "compare.json").string() << '\n';
    } else if (report->parsed()) {
      std::ifstream in(report_path);
      const auto j = nlohmann::json::parse(in);
      const auto format = j.value("format", "");
      if (format == "mstl-report") {
        std::cout << mstl::render_report_table(j);
      } else if (format == "mstl-distance-comparison") {
        std::cout << mstl::render_distance_table(j);
      } else {
        throw mstl::Error(report_path + ": unrecognized artifact format '" + format + "'");
      }
    } else if (synth->parsed()) {
      const std::filesystem::path dir = synth_dir;
      std::filesystem::create_directories(dir);
      const auto family = mstl::synthetic_family(synth_cfg);
      nlohmann::json cfg{{"target", {{"symbol", family.target.symbol()}, {"csv", "TGT.csv"}}},
                         {"sources", nlohmann::json::array()},
                         {"network", "mlp"},
                         {"methods", "all"},
                         {"similarity", "wasserstein"},
                         {"pretrain", {{"epochs", 200}, {"learning_rate", 0.001}, {"batch_size", 64}}},
                         {"finetune", {{"epochs", 100}, {"learning_rate", 0.001}, {"batch_size", 64}}},
                         {"seed", synth_cfg.seed},
                         {"output", "out"}};
      mstl::write_yahoo_csv(family.target, dir / "TGT.csv");
      for (const auto& s : family.sources) {
        const auto file = s.symbol() + ".csv";
        mstl::write_yahoo_csv(s, dir / file);
        cfg["sources"].push_back({{"symbol", s.symbol()}, {"csv", file}});
      }
      std::ofstream(dir / "config.json") << cfg.dump(2) << '\n';
      std::cout << "wrote " << family.sources.size() + 1 << " series and config.json to " << dir.string()
                << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
