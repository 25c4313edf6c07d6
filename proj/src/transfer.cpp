#include "mstl/transfer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <future>
#include <set>

#include "json.hpp"
#include "mstl/errors.hpp"
#include "mstl/nn_io.hpp"

namespace mstl {

using nlohmann::json;

void ModelPool::validate() const {
  if (entries.empty()) throw ConfigError("model pool is empty");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (e.source_id == target_id) {
      throw ConfigError("source '" + e.source_id + "' is also the target");
    }
    if (!ids.insert(e.source_id).second) throw ConfigError("duplicate source id '" + e.source_id + "'");
    if (!(e.model.spec() == entries.front().model.spec())) {
      throw ConfigError("pool entries have differing network specs");
    }
  }
}

PoolPredictions ModelPool::predict(const Eigen::MatrixXd& inputs) const {
  PoolPredictions out(static_cast<Eigen::Index>(entries.size()), inputs.rows());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = entries[i].model.forward(inputs).transpose();
  }
  return out;
}

TrainResult pretrain(const NetworkSpec& spec, const WindowedDataset& source, const TrainConfig& cfg) {
  return train(init_network(spec, cfg.seed), source, cfg);
}

TrainResult finetune(const Network& model, const WindowedDataset& target_train,
                     const TrainConfig& cfg) {
  if (target_train.lookback() != model.spec().input_length) {
    throw DimensionError("fine-tune data has lookback " + std::to_string(target_train.lookback()) +
                         ", model expects " + std::to_string(model.spec().input_length));
  }
  return train(Network(model), target_train, cfg);
}

ModelPool build_pool(const NetworkSpec& spec, const std::vector<SourceWindows>& sources,
                     const std::string& target_id, const WindowedDataset& target_train,
                     const TrainConfig& pre_cfg, const TrainConfig& fine_cfg, bool parallel,
                     const PoolObserver* observer) {
  if (sources.empty()) throw ConfigError("build_pool needs at least one source");
  {
    std::set<std::string> ids;
    for (const auto& s : sources) {
      if (s.id == target_id) throw ConfigError("source '" + s.id + "' is also the target");
      if (!ids.insert(s.id).second) throw ConfigError("duplicate source id '" + s.id + "'");
    }
  }

  auto make_entry = [&](std::size_t i) {
    const auto& src = sources[i];
    try {
      TrainConfig pre = pre_cfg;
      pre.seed = pre_cfg.seed + i;
      TrainConfig fine = fine_cfg;
      fine.seed = fine_cfg.seed + i;
      if (observer && observer->on_pretrain) observer->on_pretrain(i);
      auto pre_result = pretrain(spec, src.windows, pre);
      if (observer && observer->on_finetune) observer->on_finetune(i);
      auto fine_result = finetune(pre_result.network, target_train, fine);
      return PoolEntry{std::move(fine_result.network), src.id, std::move(pre_result.loss_history),
                       std::move(fine_result.loss_history)};
    } catch (const std::exception& e) {
      throw Error("source '" + src.id + "': " + e.what());
    }
  };

  ModelPool pool;
  pool.target_id = target_id;
  if (parallel && sources.size() > 1) {
    std::vector<std::future<PoolEntry>> jobs;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, make_entry, i));
    }
    // Wait for everything before propagating so no job outlives the call.
    for (auto& j : jobs) j.wait();
    for (auto& j : jobs) pool.entries.push_back(j.get());
  } else {
    for (std::size_t i = 0; i < sources.size(); ++i) pool.entries.push_back(make_entry(i));
  }
  return pool;
}

MtlResult train_mtl(const NetworkSpec& spec, const std::vector<SourceWindows>& sources,
                    const WindowedDataset& target_train, const TrainConfig& joint_cfg,
                    const TrainConfig& fine_cfg) {
  joint_cfg.validate();
  std::vector<const WindowedDataset*> tasks;
  for (const auto& s : sources) tasks.push_back(&s.windows);
  tasks.push_back(&target_train);
  for (const auto* t : tasks) {
    if (t->size() == 0) throw DimensionError("multi-task training on an empty task");
    if (t->lookback() != spec.input_length) throw DimensionError("task lookback does not match spec");
  }
  const std::size_t n_tasks = tasks.size();
  const std::size_t target_task = n_tasks - 1;

  // The working network holds the shared trunk; heads are swapped into its
  // output-layer slice for each step.
  Network work = init_network(spec, joint_cfg.seed);
  const std::size_t split_at = work.output_layer_offset();
  const std::size_t head_size = work.parameter_count() - split_at;
  auto params = work.parameters();
  std::vector<std::vector<double>> heads(n_tasks);
  for (std::size_t k = 0; k < n_tasks; ++k) {
    if (k == target_task) {
      heads[k].assign(params.begin() + static_cast<std::ptrdiff_t>(split_at), params.end());
    } else {
      const auto init = init_network(spec, joint_cfg.seed + 1 + k).parameters();
      heads[k].assign(init.begin() + static_cast<std::ptrdiff_t>(split_at), init.end());
    }
  }

  Optimizer trunk_opt(joint_cfg.optimizer, joint_cfg.learning_rate, split_at);
  std::vector<Optimizer> head_opts;
  for (std::size_t k = 0; k < n_tasks; ++k) {
    head_opts.emplace_back(joint_cfg.optimizer, joint_cfg.learning_rate, head_size);
  }

  MtlResult result{work, {}, {}, {}};
  std::mt19937_64 rng(joint_cfg.seed);
  for (std::size_t epoch = 0; epoch < joint_cfg.epochs; ++epoch) {
    std::vector<std::vector<std::vector<std::size_t>>> schedule(n_tasks);
    std::size_t rounds = 0;
    for (std::size_t k = 0; k < n_tasks; ++k) {
      schedule[k] = shuffled_batches(tasks[k]->size(), joint_cfg.batch_size, rng);
      rounds = std::max(rounds, schedule[k].size());
    }
    std::vector<double> task_loss(n_tasks, 0.0);
    for (std::size_t r = 0; r < rounds; ++r) {
      for (std::size_t k = 0; k < n_tasks; ++k) {
        if (r >= schedule[k].size()) continue;
        const auto& rows = schedule[k][r];
        std::copy(heads[k].begin(), heads[k].end(), params.begin() + static_cast<std::ptrdiff_t>(split_at));
        auto lg = backward(work, gather_rows(tasks[k]->inputs, rows), gather_rows(tasks[k]->targets, rows));
        if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch + 1, "multi-task batch loss");
        clip_gradient(lg.gradient);
        const std::span<const double> grad(lg.gradient);
        trunk_opt.step(params.subspan(0, split_at), grad.subspan(0, split_at));
        head_opts[k].step(heads[k], grad.subspan(split_at));
        task_loss[k] += lg.loss * static_cast<double>(rows.size());
      }
    }
    double summed = 0.0;
    for (std::size_t k = 0; k < n_tasks; ++k) summed += task_loss[k] / static_cast<double>(tasks[k]->size());
    result.joint_loss_history.push_back(summed);
  }

  for (std::size_t k = 0; k < n_tasks; ++k) {
    Network net = work;
    auto p = net.parameters();
    std::copy(heads[k].begin(), heads[k].end(), p.begin() + static_cast<std::ptrdiff_t>(split_at));
    result.task_networks.push_back(std::move(net));
  }
  auto fine = train(result.task_networks[target_task], target_train, fine_cfg);
  result.network = std::move(fine.network);
  result.finetune_loss_history = std::move(fine.loss_history);
  return result;
}

std::size_t single_best(const PoolPredictions& validation, const Eigen::VectorXd& targets) {
  if (validation.rows() == 0) throw EnsembleError("single_best on an empty pool");
  std::size_t best = 0;
  double best_mse = mse_loss(validation.row(0).transpose(), targets);
  for (Eigen::Index i = 1; i < validation.rows(); ++i) {
    const double mse = mse_loss(validation.row(i).transpose(), targets);
    if (mse < best_mse) {
      best = static_cast<std::size_t>(i);
      best_mse = mse;
    }
  }
  return best;
}

std::size_t single_best(const ModelPool& pool, const WindowedDataset& validation) {
  return single_best(pool.predict(validation.inputs), validation.targets);
}

std::uint64_t pool_fingerprint(const ModelPool& pool) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  mix(pool.target_id.data(), pool.target_id.size());
  for (const auto& e : pool.entries) {
    mix(e.source_id.data(), e.source_id.size());
    const auto spec = spec_to_json(e.model.spec()).dump();
    mix(spec.data(), spec.size());
    const auto p = e.model.parameters();
    mix(p.data(), p.size_bytes());
  }
  return h;
}

namespace {

json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"optimizer", to_string(c.optimizer)},
          {"seed", c.seed}};
}

}  // namespace

void save_pool(const ModelPool& pool, const std::filesystem::path& dir, const TrainConfig& pre_cfg,
               const TrainConfig& fine_cfg) {
  pool.validate();
  std::filesystem::create_directories(dir);
  json entries = json::array();
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    const auto& e = pool.entries[i];
    const std::string file = "model_" + std::to_string(i) + ".json";
    save_network(e.model, dir / file);
    entries.push_back({{"source_id", e.source_id},
                       {"file", file},
                       {"pretrain_seed", pre_cfg.seed + i},
                       {"finetune_seed", fine_cfg.seed + i},
                       {"pretrain_loss_history", e.pretrain_loss_history},
                       {"finetune_loss_history", e.finetune_loss_history}});
  }
  const json manifest{{"format", "mstl-pool"},
                      {"version", 1},
                      {"target_id", pool.target_id},
                      {"pretrain", train_config_json(pre_cfg)},
                      {"finetune", train_config_json(fine_cfg)},
                      {"entries", entries}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw SerializationError("cannot write pool manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

ModelPool load_pool(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw SerializationError("no pool manifest in " + dir.string());
  try {
    json manifest;
    in >> manifest;
    if (manifest.at("format").get<std::string>() != "mstl-pool") {
      throw SerializationError(dir.string() + ": not a pool manifest");
    }
    ModelPool pool;
    pool.target_id = manifest.at("target_id").get<std::string>();
    for (const auto& e : manifest.at("entries")) {
      pool.entries.push_back({load_network(dir / e.at("file").get<std::string>()),
                              e.at("source_id").get<std::string>(),
                              e.at("pretrain_loss_history").get<std::vector<double>>(),
                              e.at("finetune_loss_history").get<std::vector<double>>()});
    }
    pool.validate();
    return pool;
  } catch (const json::exception& e) {
    throw SerializationError(dir.string() + ": malformed pool manifest: " + e.what());
  }
}

}  // namespace mstl
