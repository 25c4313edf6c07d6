#pragma once

// Price-series ingestion and the supervised windowing used by every model:
// close prices are min-max scaled to [-1, 1], cut into lookback windows
// and partitioned chronologically into train / validation / test.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mstl {

inline constexpr std::size_t kDefaultLookback = 22;
inline constexpr std::size_t kDefaultHorizon = 1;

using Date = std::chrono::year_month_day;

Date parse_date(const std::string& text);
std::string format_date(const Date& d);

struct Observation {
  Date date;
  double close;
};

// Date-ordered univariate series. Construction validates ordering and
// positivity, so a PriceSeries in hand is always well formed.
class PriceSeries {
 public:
  PriceSeries(std::string symbol, std::vector<Observation> observations);

  const std::string& symbol() const noexcept { return symbol_; }
  const std::vector<Observation>& observations() const noexcept { return observations_; }
  std::size_t size() const noexcept { return observations_.size(); }
  std::vector<double> values() const;

 private:
  std::string symbol_;
  std::vector<Observation> observations_;
};

// Reads a Yahoo-Finance style export (Date,Open,High,Low,Close,Adj Close,Volume).
// Rows whose chosen column is empty or "null" are dropped; remaining rows are
// sorted by date. Fewer than min_rows valid rows is an error.
PriceSeries ingest_csv(const std::filesystem::path& path, const std::string& column = "Close",
                       std::size_t min_rows = 1);

struct ScalingParams {
  double lo = 0.0;
  double hi = 1.0;

  double scale(double v) const noexcept { return 2.0 * (v - lo) / (hi - lo) - 1.0; }
  double inverse_scale(double v) const noexcept { return (v + 1.0) * (hi - lo) / 2.0 + lo; }
};

ScalingParams fit_scaler(const std::vector<double>& values);
double scale(double v, const ScalingParams& p);
double inverse_scale(double v, const ScalingParams& p);
std::vector<double> scale_all(const std::vector<double>& values, const ScalingParams& p);
Eigen::VectorXd inverse_scale_all(const Eigen::VectorXd& values, const ScalingParams& p);

// Row i holds [p_t, p_{t-1}, ..., p_{t-L+1}] (newest first) and targets[i]
// holds p_{t+h}, all scaled. target_index[i] is the series position of that
// target, which ties every row back to a calendar date.
struct WindowedDataset {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
  ScalingParams scaling;
  std::vector<std::size_t> target_index;

  std::size_t size() const noexcept { return static_cast<std::size_t>(targets.size()); }
  std::size_t lookback() const noexcept { return static_cast<std::size_t>(inputs.cols()); }
  WindowedDataset slice(std::size_t begin, std::size_t count) const;
};

std::size_t window_count(std::size_t series_length, std::size_t lookback, std::size_t horizon);

WindowedDataset make_windows(const std::vector<double>& raw, std::size_t lookback,
                             std::size_t horizon, const ScalingParams& scaling);
WindowedDataset make_windows(const PriceSeries& series, std::size_t lookback,
                             std::size_t horizon, const ScalingParams& scaling);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;
};

// 60/20/20 of the window count; validation and test get floor(0.2 n), the
// remainder goes to train.
SplitSizes split_sizes(std::size_t n_windows);

struct DataSplit {
  WindowedDataset train;
  WindowedDataset validation;
  WindowedDataset test;

  const ScalingParams& scaling() const noexcept { return train.scaling; }
};

// Chronological partition of an already-windowed dataset.
DataSplit split(const WindowedDataset& ds);

// Target preparation: fits the scaler on the raw values covered by the
// training windows only, windows the full series with it, then splits.
struct PreparedTarget {
  DataSplit split;
  // Scaled raw values of the training segment (input to the scalar
  // similarity measures).
  std::vector<double> scaled_train_values;
};

PreparedTarget prepare_target(const PriceSeries& series, std::size_t lookback = kDefaultLookback,
                              std::size_t horizon = kDefaultHorizon);

// Source preparation: each source gets its own scaler fitted on the full
// series, and is windowed over its full length.
struct PreparedSource {
  std::string id;
  WindowedDataset windows;
  std::vector<double> scaled_values;
};

PreparedSource prepare_source(const PriceSeries& series, std::size_t lookback = kDefaultLookback,
                              std::size_t horizon = kDefaultHorizon);

}  // namespace mstl
