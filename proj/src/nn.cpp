#include "mstl/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mstl/errors.hpp"

namespace mstl {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Index idx(std::size_t v) { return static_cast<Index>(v); }

// Portable draws: mt19937_64 output is fully specified, the standard
// distributions are not.
double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

MatrixXd activate(const MatrixXd& pre, Activation a) {
  switch (a) {
    case Activation::tanh:
      return pre.array().tanh().matrix();
    case Activation::relu:
      return pre.cwiseMax(0.0);
    case Activation::linear:
      return pre;
  }
  return pre;
}

// d act / d pre, evaluated elementwise.
MatrixXd activation_slope(const MatrixXd& pre, Activation a) {
  switch (a) {
    case Activation::tanh: {
      const auto t = pre.array().tanh();
      return (1.0 - t * t).matrix();
    }
    case Activation::relu:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::linear:
      return MatrixXd::Ones(pre.rows(), pre.cols());
  }
  return MatrixXd::Ones(pre.rows(), pre.cols());
}

MatrixXd sigmoid(const MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

struct DenseCache {
  MatrixXd input;
  MatrixXd pre;
};

struct LstmCache {
  std::vector<MatrixXd> x;         // T inputs, B x in
  std::vector<MatrixXd> h;         // T+1 hidden states, h[0] = 0
  std::vector<MatrixXd> c;         // T+1 cell states, c[0] = 0
  std::vector<MatrixXd> gates;     // T post-activation gate blocks [i f g o]
  std::vector<MatrixXd> cand_pre;  // T candidate pre-activations
};

struct ForwardTrace {
  std::vector<DenseCache> dense;  // indexed by layer, unused for LSTM layers
  std::vector<LstmCache> lstm;    // indexed by layer, unused for dense layers
  VectorXd output;
};

// Runs the network, optionally recording everything backward() needs.
VectorXd run_forward(const Network& net, const MatrixXd& batch, ForwardTrace* trace) {
  const auto& spec = net.spec();
  if (static_cast<std::size_t>(batch.cols()) != spec.input_length) {
    throw DimensionError("input has " + std::to_string(batch.cols()) +
                         " columns, network expects " + std::to_string(spec.input_length));
  }
  const auto& layout = net.layout();
  const Index B = batch.rows();
  const std::size_t T = spec.input_length;
  if (trace) {
    trace->dense.assign(layout.size(), {});
    trace->lstm.assign(layout.size(), {});
  }

  std::vector<MatrixXd> seq;
  MatrixXd flat;
  if (spec.recurrent()) {
    seq.resize(T);
    for (std::size_t t = 0; t < T; ++t) seq[t] = batch.col(idx(T - 1 - t));
  } else {
    flat = batch;
  }

  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& L = layout[l];
    if (L.kind == LayerKind::lstm) {
      const Index u = idx(L.units);
      const auto W = net.weight(l);
      const auto U = net.recurrent_weight(l);
      const auto b = net.bias(l);
      MatrixXd h = MatrixXd::Zero(B, u);
      MatrixXd c = MatrixXd::Zero(B, u);
      LstmCache* cache = trace ? &trace->lstm[l] : nullptr;
      if (cache) {
        cache->x = seq;
        cache->h.assign(1, h);
        cache->c.assign(1, c);
      }
      std::vector<MatrixXd> out_seq(T);
      for (std::size_t t = 0; t < T; ++t) {
        MatrixXd z = seq[t] * W + h * U;
        z.rowwise() += b.transpose();
        MatrixXd gates(B, 4 * u);
        gates.leftCols(2 * u) = sigmoid(z.leftCols(2 * u));
        const MatrixXd cand_pre = z.middleCols(2 * u, u);
        gates.middleCols(2 * u, u) = activate(cand_pre, L.activation);
        gates.rightCols(u) = sigmoid(z.rightCols(u));
        c = gates.middleCols(u, u).cwiseProduct(c) +
            gates.leftCols(u).cwiseProduct(gates.middleCols(2 * u, u));
        h = gates.rightCols(u).cwiseProduct(activate(c, L.activation));
        out_seq[t] = h;
        if (cache) {
          cache->h.push_back(h);
          cache->c.push_back(c);
          cache->gates.push_back(std::move(gates));
          cache->cand_pre.push_back(cand_pre);
        }
      }
      const bool next_is_lstm = l + 1 < layout.size() && layout[l + 1].kind == LayerKind::lstm;
      if (next_is_lstm) {
        seq = std::move(out_seq);
      } else {
        flat = h;
        seq.clear();
      }
    } else {
      MatrixXd pre = flat * net.weight(l);
      pre.rowwise() += net.bias(l).transpose();
      if (trace) trace->dense[l] = {flat, pre};
      flat = activate(pre, L.activation);
    }
  }
  VectorXd out = flat.col(0);
  if (trace) trace->output = out;
  return out;
}

std::vector<LayerLayout> build_layout(const NetworkSpec& spec) {
  std::vector<LayerLayout> layout;
  std::size_t offset = 0;
  std::size_t in = spec.recurrent() ? 1 : spec.input_length;
  for (const auto& ls : spec.layers) {
    LayerLayout L;
    L.kind = ls.kind;
    L.activation = ls.activation;
    L.in = in;
    L.units = ls.units;
    L.weight_offset = offset;
    if (ls.kind == LayerKind::lstm) {
      offset += in * 4 * ls.units;
      L.recurrent_offset = offset;
      offset += ls.units * 4 * ls.units;
      L.bias_offset = offset;
      offset += 4 * ls.units;
    } else {
      offset += in * ls.units;
      L.recurrent_offset = offset;
      L.bias_offset = offset;
      offset += ls.units;
    }
    L.end_offset = offset;
    layout.push_back(L);
    in = ls.units;
  }
  return layout;
}

}  // namespace

std::string to_string(LayerKind k) { return k == LayerKind::lstm ? "lstm" : "dense"; }

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
    case Activation::linear:
      return "linear";
  }
  return "linear";
}

LayerKind parse_layer_kind(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "lstm") return LayerKind::lstm;
  throw DimensionError("unknown layer kind '" + s + "'");
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "linear") return Activation::linear;
  throw DimensionError("unknown activation '" + s + "'");
}

bool NetworkSpec::recurrent() const noexcept {
  return !layers.empty() && layers.front().kind == LayerKind::lstm;
}

void NetworkSpec::validate() const {
  if (input_length == 0) throw DimensionError("network input length must be positive");
  if (layers.empty()) throw DimensionError("network has no layers");
  bool seen_dense = false;
  for (const auto& l : layers) {
    if (l.units == 0) throw DimensionError("layer with zero units");
    if (l.kind == LayerKind::lstm && seen_dense) {
      throw DimensionError("LSTM layers must precede all dense layers");
    }
    if (l.kind == LayerKind::dense) seen_dense = true;
  }
  const auto& out = layers.back();
  if (out.kind != LayerKind::dense || out.units != 1 || out.activation != Activation::linear) {
    throw DimensionError("output layer must be dense, 1 unit, linear");
  }
}

NetworkSpec canonical_mlp(std::size_t lookback) {
  return {lookback,
          {{LayerKind::dense, 128, Activation::tanh},
           {LayerKind::dense, 64, Activation::tanh},
           {LayerKind::dense, 16, Activation::relu},
           {LayerKind::dense, 1, Activation::linear}}};
}

NetworkSpec canonical_lstm(std::size_t lookback) {
  return {lookback,
          {{LayerKind::lstm, 128, Activation::tanh},
           {LayerKind::lstm, 64, Activation::tanh},
           {LayerKind::dense, 16, Activation::relu},
           {LayerKind::dense, 1, Activation::linear}}};
}

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  layout_ = build_layout(spec_);
  params_.assign(layout_.back().end_offset, 0.0);
}

ConstMatrixMap Network::weight(std::size_t layer) const {
  const auto& L = layout_.at(layer);
  const std::size_t cols = L.kind == LayerKind::lstm ? 4 * L.units : L.units;
  return ConstMatrixMap(params_.data() + L.weight_offset, idx(L.in), idx(cols));
}

ConstMatrixMap Network::recurrent_weight(std::size_t layer) const {
  const auto& L = layout_.at(layer);
  if (L.kind != LayerKind::lstm) throw DimensionError("dense layer has no recurrent weight");
  return ConstMatrixMap(params_.data() + L.recurrent_offset, idx(L.units), idx(4 * L.units));
}

ConstVectorMap Network::bias(std::size_t layer) const {
  const auto& L = layout_.at(layer);
  return ConstVectorMap(params_.data() + L.bias_offset, idx(L.end_offset - L.bias_offset));
}

Eigen::MatrixXd Network::gate_input_weight(std::size_t layer, Gate g) const {
  const auto& L = layout_.at(layer);
  if (L.kind != LayerKind::lstm) throw DimensionError("dense layer has no gates");
  return weight(layer).middleCols(idx(static_cast<std::size_t>(g) * L.units), idx(L.units));
}

MatrixMap Network::weight(std::size_t layer) {
  const auto& L = layout_.at(layer);
  const std::size_t cols = L.kind == LayerKind::lstm ? 4 * L.units : L.units;
  return MatrixMap(params_.data() + L.weight_offset, idx(L.in), idx(cols));
}

MatrixMap Network::recurrent_weight(std::size_t layer) {
  const auto& L = layout_.at(layer);
  if (L.kind != LayerKind::lstm) throw DimensionError("dense layer has no recurrent weight");
  return MatrixMap(params_.data() + L.recurrent_offset, idx(L.units), idx(4 * L.units));
}

VectorMap Network::bias(std::size_t layer) {
  const auto& L = layout_.at(layer);
  return VectorMap(params_.data() + L.bias_offset, idx(L.end_offset - L.bias_offset));
}

Eigen::VectorXd Network::forward(const Eigen::MatrixXd& batch) const {
  return run_forward(*this, batch, nullptr);
}

Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
  Network net(spec);
  std::mt19937_64 rng(seed);
  auto fill = [&](double* p, std::size_t count, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < count; ++i) p[i] = (2.0 * unit_uniform(rng) - 1.0) * limit;
  };
  auto params = net.parameters();
  for (const auto& L : net.layout()) {
    double* base = params.data();
    if (L.kind == LayerKind::lstm) {
      fill(base + L.weight_offset, L.in * 4 * L.units, L.in, L.units);
      fill(base + L.recurrent_offset, L.units * 4 * L.units, L.units, L.units);
      const std::size_t forget = L.bias_offset + L.units;
      std::fill(base + forget, base + forget + L.units, 1.0);
    } else {
      fill(base + L.weight_offset, L.in * L.units, L.in, L.units);
    }
  }
  return net;
}

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size()) {
    throw DimensionError("mse_loss: length mismatch " + std::to_string(pred.size()) + " vs " +
                         std::to_string(actual.size()));
  }
  if (pred.size() == 0) throw DimensionError("mse_loss: empty input");
  return (pred - actual).squaredNorm() / static_cast<double>(pred.size());
}

LossGradient backward(const Network& net, const Eigen::MatrixXd& batch,
                      const Eigen::VectorXd& targets) {
  if (batch.rows() != targets.size()) {
    throw DimensionError("backward: " + std::to_string(batch.rows()) + " rows but " +
                         std::to_string(targets.size()) + " targets");
  }
  ForwardTrace trace;
  run_forward(net, batch, &trace);
  LossGradient out;
  out.loss = mse_loss(trace.output, targets);
  out.gradient.assign(net.parameter_count(), 0.0);
  double* grad = out.gradient.data();

  const auto& layout = net.layout();
  const Index B = batch.rows();
  const std::size_t T = net.spec().input_length;

  MatrixXd d_flat = (2.0 / static_cast<double>(B)) * (trace.output - targets);
  std::vector<MatrixXd> d_seq;  // gradient w.r.t. an LSTM layer's output sequence

  for (std::size_t li = layout.size(); li-- > 0;) {
    const auto& L = layout[li];
    if (L.kind == LayerKind::dense) {
      const auto& cache = trace.dense[li];
      const MatrixXd d_pre = d_flat.cwiseProduct(activation_slope(cache.pre, L.activation));
      MatrixMap(grad + L.weight_offset, idx(L.in), idx(L.units)) += cache.input.transpose() * d_pre;
      VectorMap(grad + L.bias_offset, idx(L.units)) += d_pre.colwise().sum().transpose();
      d_flat = d_pre * net.weight(li).transpose();
      continue;
    }

    const Index u = idx(L.units);
    const auto& cache = trace.lstm[li];
    const auto W = net.weight(li);
    const auto U = net.recurrent_weight(li);
    MatrixMap dW(grad + L.weight_offset, idx(L.in), 4 * u);
    MatrixMap dU(grad + L.recurrent_offset, u, 4 * u);
    VectorMap db(grad + L.bias_offset, 4 * u);

    // Output gradient arrives either on the last step only (feeding a dense
    // layer) or on every step (feeding another LSTM layer).
    const bool top = d_seq.empty();
    std::vector<MatrixXd> d_in(T);
    MatrixXd dh_next = MatrixXd::Zero(B, u);
    MatrixXd dc_next = MatrixXd::Zero(B, u);
    for (std::size_t t = T; t-- > 0;) {
      MatrixXd dh = dh_next;
      if (top) {
        if (t + 1 == T) dh += d_flat;
      } else {
        dh += d_seq[t];
      }
      const auto& g = cache.gates[t];
      const auto gi = g.leftCols(u);
      const auto gf = g.middleCols(u, u);
      const auto gc = g.middleCols(2 * u, u);
      const auto go = g.rightCols(u);
      const MatrixXd& c = cache.c[t + 1];
      const MatrixXd& c_prev = cache.c[t];
      const MatrixXd act_c = activate(c, L.activation);

      MatrixXd dz(B, 4 * u);
      dz.rightCols(u) = dh.cwiseProduct(act_c).cwiseProduct(go.cwiseProduct((1.0 - go.array()).matrix()));
      const MatrixXd dc =
          dh.cwiseProduct(go).cwiseProduct(activation_slope(c, L.activation)) + dc_next;
      dz.middleCols(u, u) = dc.cwiseProduct(c_prev).cwiseProduct(gf.cwiseProduct((1.0 - gf.array()).matrix()));
      dz.leftCols(u) = dc.cwiseProduct(gc).cwiseProduct(gi.cwiseProduct((1.0 - gi.array()).matrix()));
      dz.middleCols(2 * u, u) =
          dc.cwiseProduct(gi).cwiseProduct(activation_slope(cache.cand_pre[t], L.activation));
      dc_next = dc.cwiseProduct(gf);

      dW.noalias() += cache.x[t].transpose() * dz;
      dU.noalias() += cache.h[t].transpose() * dz;
      db += dz.colwise().sum().transpose();
      d_in[t] = dz * W.transpose();
      dh_next = dz * U.transpose();
    }
    d_seq = std::move(d_in);
  }
  return out;
}

double gradient_check(const Network& net, const Eigen::MatrixXd& batch,
                      const Eigen::VectorXd& targets, double eps) {
  const auto analytic = backward(net, batch, targets).gradient;
  Network probe = net;
  auto p = probe.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + eps;
    const double up = mse_loss(probe.forward(batch), targets);
    p[i] = saved - eps;
    const double down = mse_loss(probe.forward(batch), targets);
    p[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::adam:
      return "adam";
    case OptimizerKind::sgd:
      return "sgd";
    case OptimizerKind::rmsprop:
      return "rmsprop";
  }
  return "adam";
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  throw ConfigError("unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0 && learning_rate < 1.0)) {
    throw ConfigError("learning rate must lie in (0, 1)");
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, std::size_t size)
    : kind_(kind), lr_(learning_rate), m_(size, 0.0), v_(size, 0.0) {}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
  ++t_;
  switch (kind_) {
    case OptimizerKind::sgd:
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
      break;
    case OptimizerKind::rmsprop: {
      constexpr double rho = 0.9, eps = 1e-8;
      for (std::size_t i = 0; i < params.size(); ++i) {
        v_[i] = rho * v_[i] + (1.0 - rho) * grads[i] * grads[i];
        params[i] -= lr_ * grads[i] / (std::sqrt(v_[i]) + eps);
      }
      break;
    }
    case OptimizerKind::adam: {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
        v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
        params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
      }
      break;
    }
  }
}

bool clip_gradient(std::span<double> grads) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!(norm > kGradientClipNorm)) return false;
  const double factor = kGradientClipNorm / norm;
  for (double& g : grads) g *= factor;
  return true;
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size,
                                                       std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  MatrixXd out(idx(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(idx(i)) = m.row(idx(rows[i]));
  return out;
}

Eigen::VectorXd gather_rows(const Eigen::VectorXd& v, const std::vector<std::size_t>& rows) {
  VectorXd out(idx(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(idx(i)) = v(idx(rows[i]));
  return out;
}

TrainResult train(Network net, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (inputs.rows() == 0) throw DimensionError("cannot train on an empty dataset");
  if (inputs.rows() != targets.size()) throw DimensionError("inputs and targets differ in length");
  if (static_cast<std::size_t>(inputs.cols()) != net.spec().input_length) {
    throw DimensionError("training inputs have " + std::to_string(inputs.cols()) +
                         " columns, network expects " + std::to_string(net.spec().input_length));
  }

  TrainResult result{std::move(net), {}, 0};
  Optimizer opt(cfg.optimizer, cfg.learning_rate, result.network.parameter_count());
  std::mt19937_64 rng(cfg.seed);
  const auto n = static_cast<std::size_t>(inputs.rows());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double weighted = 0.0;
    for (const auto& rows : shuffled_batches(n, cfg.batch_size, rng)) {
      auto lg = backward(result.network, gather_rows(inputs, rows), gather_rows(targets, rows));
      if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch + 1, "non-finite batch loss");
      if (clip_gradient(lg.gradient)) ++result.clipped_steps;
      opt.step(result.network.parameters(), lg.gradient);
      weighted += lg.loss * static_cast<double>(rows.size());
    }
    const double epoch_loss = weighted / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch + 1, "non-finite epoch loss");
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

TrainResult train(Network net, const WindowedDataset& data, const TrainConfig& cfg) {
  return train(std::move(net), data.inputs, data.targets, cfg);
}

}  // namespace mstl
