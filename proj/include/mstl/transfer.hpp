#pragma once

// Parameter transfer: per-source pre-training, target fine-tuning, the
// resulting model pool, and the multi-task baseline.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mstl/data.hpp"
#include "mstl/ensemble.hpp"
#include "mstl/nn.hpp"

namespace mstl {

struct SourceWindows {
  std::string id;
  WindowedDataset windows;
};

struct PoolEntry {
  Network model;
  std::string source_id;
  std::vector<double> pretrain_loss_history;
  std::vector<double> finetune_loss_history;
};

struct ModelPool {
  std::vector<PoolEntry> entries;  // configuration order
  std::string target_id;

  std::size_t size() const noexcept { return entries.size(); }
  // n >= 1, distinct source ids, none equal to the target id, one spec.
  void validate() const;
  // Row i is entry i's prediction for every input row.
  PoolPredictions predict(const Eigen::MatrixXd& inputs) const;
};

// Trains a freshly initialized network (seeded by cfg.seed) on a source.
TrainResult pretrain(const NetworkSpec& spec, const WindowedDataset& source, const TrainConfig& cfg);

// Continues training every layer of `model` on the target; `model` itself
// is left untouched.
TrainResult finetune(const Network& model, const WindowedDataset& target_train,
                     const TrainConfig& cfg);

// Optional instrumentation; callbacks may fire from worker threads.
struct PoolObserver {
  std::function<void(std::size_t)> on_pretrain;
  std::function<void(std::size_t)> on_finetune;
};

// Entry i is pre-trained with pre_cfg.seed + i and fine-tuned with
// fine_cfg.seed + i. Entries are trained concurrently when `parallel`.
ModelPool build_pool(const NetworkSpec& spec, const std::vector<SourceWindows>& sources,
                     const std::string& target_id, const WindowedDataset& target_train,
                     const TrainConfig& pre_cfg, const TrainConfig& fine_cfg,
                     bool parallel = true, const PoolObserver* observer = nullptr);

struct MtlResult {
  // Trunk plus target head after the final target fine-tune.
  Network network;
  // Trunk plus each task's head right after joint training: sources in
  // order, then the target.
  std::vector<Network> task_networks;
  std::vector<double> joint_loss_history;  // summed mean task loss per epoch
  std::vector<double> finetune_loss_history;
};

// Shared trunk (all layers but the output) with one output head per task.
// Each joint epoch interleaves the tasks' shuffled batches round-robin;
// a step updates the trunk and the active task's head. The trunk and target
// head are then fine-tuned on target_train with fine_cfg.
MtlResult train_mtl(const NetworkSpec& spec, const std::vector<SourceWindows>& sources,
                    const WindowedDataset& target_train, const TrainConfig& joint_cfg,
                    const TrainConfig& fine_cfg);

// Index of the lowest-MSE row (first on ties).
std::size_t single_best(const PoolPredictions& validation, const Eigen::VectorXd& targets);
std::size_t single_best(const ModelPool& pool, const WindowedDataset& validation);

// FNV-1a over specs, ids and parameter bytes, for cheap identity checks.
std::uint64_t pool_fingerprint(const ModelPool& pool);

// Directory of model_<i>.json files plus manifest.json.
void save_pool(const ModelPool& pool, const std::filesystem::path& dir,
               const TrainConfig& pre_cfg, const TrainConfig& fine_cfg);
ModelPool load_pool(const std::filesystem::path& dir);

}  // namespace mstl
