#pragma once

// Small float64 network engine covering the two fixed architectures:
// stacked dense layers (MLP) and stacked LSTM layers followed by dense
// layers. Parameters live in one flat buffer; each layer addresses its
// slice through a LayerLayout, which keeps optimizers, serialization and
// finite-difference checks independent of layer type.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mstl/data.hpp"

namespace mstl {

enum class LayerKind { dense, lstm };
enum class Activation { tanh, relu, linear };

std::string to_string(LayerKind k);
std::string to_string(Activation a);
LayerKind parse_layer_kind(const std::string& s);
Activation parse_activation(const std::string& s);

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t units = 1;
  Activation activation = Activation::linear;

  bool operator==(const LayerSpec&) const = default;
};

// For recurrent specs the input row is read as input_length timesteps of one
// feature, oldest first (i.e. the window columns in reverse).
struct NetworkSpec {
  std::size_t input_length = kDefaultLookback;
  std::vector<LayerSpec> layers;

  bool recurrent() const noexcept;
  // Throws DimensionError when the layer list breaks the architecture rules.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

NetworkSpec canonical_mlp(std::size_t lookback = kDefaultLookback);
NetworkSpec canonical_lstm(std::size_t lookback = kDefaultLookback);

// LSTM gate blocks, in the column order used inside each gate-stacked matrix.
enum class Gate : std::size_t { input = 0, forget = 1, cell = 2, output = 3 };

struct LayerLayout {
  LayerKind kind = LayerKind::dense;
  Activation activation = Activation::linear;
  std::size_t in = 0;
  std::size_t units = 0;
  // Dense: weight (in x units), bias (units).
  // LSTM: weight (in x 4*units), recurrent (units x 4*units), bias (4*units);
  //       gate g occupies columns [g*units, (g+1)*units).
  std::size_t weight_offset = 0;
  std::size_t recurrent_offset = 0;
  std::size_t bias_offset = 0;
  std::size_t end_offset = 0;
};

using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

class Network {
 public:
  // All parameters zero.
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<LayerLayout>& layout() const noexcept { return layout_; }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  // Offset where the output layer's parameters start; everything before it
  // is the shared trunk in multi-task training.
  std::size_t output_layer_offset() const noexcept { return layout_.back().weight_offset; }

  ConstMatrixMap weight(std::size_t layer) const;
  ConstMatrixMap recurrent_weight(std::size_t layer) const;
  ConstVectorMap bias(std::size_t layer) const;
  // One gate's block of an LSTM layer's input weight matrix (in x units).
  Eigen::MatrixXd gate_input_weight(std::size_t layer, Gate g) const;

  MatrixMap weight(std::size_t layer);
  MatrixMap recurrent_weight(std::size_t layer);
  VectorMap bias(std::size_t layer);

  // One prediction per row. Throws DimensionError on a column mismatch.
  Eigen::VectorXd forward(const Eigen::MatrixXd& batch) const;

  bool operator==(const Network& other) const {
    return spec_ == other.spec_ && params_ == other.params_;
  }

 private:
  NetworkSpec spec_;
  std::vector<LayerLayout> layout_;
  std::vector<double> params_;
};

// Glorot-uniform weights (per gate matrix for LSTM), zero biases, LSTM
// forget-gate bias 1. Identical (spec, seed) give identical parameters.
Network init_network(const NetworkSpec& spec, std::uint64_t seed);

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as Network::parameters()
};

// MSE loss of the batch and its gradient w.r.t. every parameter (full BPTT).
LossGradient backward(const Network& net, const Eigen::MatrixXd& batch,
                      const Eigen::VectorXd& targets);

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, floor)
// using central differences with step eps.
double gradient_check(const Network& net, const Eigen::MatrixXd& batch,
                      const Eigen::VectorXd& targets, double eps = 1e-5);

enum class OptimizerKind { adam, sgd, rmsprop };
std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;

  void validate() const;
};

// Gradients whose global L2 norm exceeds this are rescaled to it.
inline constexpr double kGradientClipNorm = 100.0;

// Per-parameter optimizer state over a contiguous parameter slice.
// Adam uses beta1 0.9, beta2 0.999, eps 1e-8; RMSProp rho 0.9, eps 1e-8.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t size);
  void step(std::span<double> params, std::span<const double> grads);

 private:
  OptimizerKind kind_;
  double lr_;
  std::uint64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

// Rescales grads in place when their norm exceeds kGradientClipNorm.
// Returns true if clipping happened.
bool clip_gradient(std::span<double> grads);

struct TrainResult {
  Network network;
  // Mean batch loss per epoch, weighted by batch size.
  std::vector<double> loss_history;
  std::size_t clipped_steps = 0;
};

TrainResult train(Network net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                  const TrainConfig& cfg);
TrainResult train(Network net, const WindowedDataset& data, const TrainConfig& cfg);

// Seeded shuffle of [0, n) cut into batches; shared by single- and
// multi-task training so both consume the RNG identically.
std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size,
                                                       std::mt19937_64& rng);

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows);
Eigen::VectorXd gather_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows);

}  // namespace mstl
