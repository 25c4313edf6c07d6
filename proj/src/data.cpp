#include "mstl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mstl/errors.hpp"

namespace mstl {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_missing(const std::string& field) {
  if (field.empty()) return true;
  std::string lower = field;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "null" || lower == "nan" || lower == "na";
}

}  // namespace

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0, d = 0;
  char dash1 = 0, dash2 = 0;
  std::istringstream in(text);
  in >> y >> dash1 >> m >> dash2 >> d;
  if (in.fail() || dash1 != '-' || dash2 != '-' || !in.eof()) {
    throw IngestError("invalid date '" + text + "' (expected YYYY-MM-DD)");
  }
  Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw IngestError("invalid calendar date '" + text + "'");
  return date;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

PriceSeries::PriceSeries(std::string symbol, std::vector<Observation> observations)
    : symbol_(std::move(symbol)), observations_(std::move(observations)) {
  for (std::size_t i = 0; i < observations_.size(); ++i) {
    const double c = observations_[i].close;
    if (!std::isfinite(c) || c <= 0.0) {
      throw IngestError(symbol_ + ": close value at " + format_date(observations_[i].date) +
                        " must be finite and positive");
    }
    if (i > 0 && !(observations_[i - 1].date < observations_[i].date)) {
      throw IngestError(symbol_ + ": dates must be strictly increasing (at " +
                        format_date(observations_[i].date) + ")");
    }
  }
}

std::vector<double> PriceSeries::values() const {
  std::vector<double> out;
  out.reserve(observations_.size());
  for (const auto& o : observations_) out.push_back(o.close);
  return out;
}

PriceSeries ingest_csv(const std::filesystem::path& path, const std::string& column,
                       std::size_t min_rows) {
  const std::string where = path.string();
  std::ifstream in(path);
  if (!in) throw IngestError(where + ": cannot open file");

  std::string line;
  if (!std::getline(in, line)) throw IngestError(where + ": empty file");
  const auto header = split_fields(line);
  const auto date_it = std::find(header.begin(), header.end(), "Date");
  if (date_it == header.end()) throw IngestError(where + ": header has no 'Date' column");
  const auto col_it = std::find(header.begin(), header.end(), column);
  if (col_it == header.end()) {
    throw IngestError(where + ": unknown column '" + column + "'");
  }
  const auto date_col = static_cast<std::size_t>(date_it - header.begin());
  const auto value_col = static_cast<std::size_t>(col_it - header.begin());

  std::vector<Observation> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw IngestError(where + ": line " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    if (is_missing(fields[value_col])) continue;
    Observation obs{};
    try {
      obs.date = parse_date(fields[date_col]);
    } catch (const IngestError& e) {
      throw IngestError(where + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    std::size_t consumed = 0;
    try {
      obs.close = std::stod(fields[value_col], &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != fields[value_col].size()) {
      throw IngestError(where + ": line " + std::to_string(line_no) + ": non-numeric value '" +
                        fields[value_col] + "' in column '" + column + "'");
    }
    rows.push_back(obs);
  }

  std::sort(rows.begin(), rows.end(),
            [](const Observation& a, const Observation& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i - 1].date == rows[i].date) {
      throw IngestError(where + ": duplicate date " + format_date(rows[i].date));
    }
  }
  if (rows.empty() || rows.size() < min_rows) {
    throw IngestError(where + ": " + std::to_string(rows.size()) + " valid rows, need at least " +
                      std::to_string(std::max<std::size_t>(min_rows, 1)));
  }

  std::string symbol = path.stem().string();
  try {
    return PriceSeries(std::move(symbol), std::move(rows));
  } catch (const IngestError& e) {
    throw IngestError(where + ": " + e.what());
  }
}

ScalingParams fit_scaler(const std::vector<double>& values) {
  if (values.empty()) throw ScaleError("cannot fit scaler on an empty vector");
  for (double v : values) {
    if (!std::isfinite(v)) throw ScaleError("cannot fit scaler on non-finite values");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) throw ScaleError("degenerate scale: series is constant");
  return {*lo, *hi};
}

double scale(double v, const ScalingParams& p) { return p.scale(v); }

double inverse_scale(double v, const ScalingParams& p) { return p.inverse_scale(v); }

std::vector<double> scale_all(const std::vector<double>& values, const ScalingParams& p) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [&](double v) { return p.scale(v); });
  return out;
}

Eigen::VectorXd inverse_scale_all(const Eigen::VectorXd& values, const ScalingParams& p) {
  return values.unaryExpr([&](double v) { return p.inverse_scale(v); });
}

WindowedDataset WindowedDataset::slice(std::size_t begin, std::size_t count) const {
  WindowedDataset out;
  const auto b = static_cast<Eigen::Index>(begin);
  const auto c = static_cast<Eigen::Index>(count);
  out.inputs = inputs.middleRows(b, c);
  out.targets = targets.segment(b, c);
  out.scaling = scaling;
  out.target_index.assign(target_index.begin() + b, target_index.begin() + b + c);
  return out;
}

std::size_t window_count(std::size_t series_length, std::size_t lookback, std::size_t horizon) {
  if (series_length < lookback + horizon) return 0;
  return series_length - lookback - horizon + 1;
}

WindowedDataset make_windows(const std::vector<double>& raw, std::size_t lookback,
                             std::size_t horizon, const ScalingParams& scaling) {
  if (lookback == 0 || horizon == 0) throw WindowError("lookback and horizon must be positive");
  if (!(scaling.hi > scaling.lo)) throw ScaleError("invalid scaling parameters (lo >= hi)");
  if (raw.size() < lookback + horizon) {
    throw WindowError("series of length " + std::to_string(raw.size()) +
                      " is too short for lookback " + std::to_string(lookback) + " and horizon " +
                      std::to_string(horizon));
  }
  const std::size_t n = window_count(raw.size(), lookback, horizon);
  const auto scaled = scale_all(raw, scaling);

  WindowedDataset ds;
  ds.scaling = scaling;
  ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(lookback));
  ds.targets.resize(static_cast<Eigen::Index>(n));
  ds.target_index.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = i + lookback - 1;
    for (std::size_t k = 0; k < lookback; ++k) {
      ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = scaled[t - k];
    }
    ds.targets(static_cast<Eigen::Index>(i)) = scaled[t + horizon];
    ds.target_index[i] = t + horizon;
  }
  return ds;
}

WindowedDataset make_windows(const PriceSeries& series, std::size_t lookback,
                             std::size_t horizon, const ScalingParams& scaling) {
  return make_windows(series.values(), lookback, horizon, scaling);
}

SplitSizes split_sizes(std::size_t n_windows) {
  SplitSizes s;
  s.validation = n_windows / 5;
  s.test = n_windows / 5;
  s.train = n_windows - s.validation - s.test;
  return s;
}

DataSplit split(const WindowedDataset& ds) {
  if (ds.size() < 5) {
    throw SplitError("need at least 5 windows to split, got " + std::to_string(ds.size()));
  }
  const auto s = split_sizes(ds.size());
  return {ds.slice(0, s.train), ds.slice(s.train, s.validation),
          ds.slice(s.train + s.validation, s.test)};
}

PreparedTarget prepare_target(const PriceSeries& series, std::size_t lookback,
                              std::size_t horizon) {
  const auto raw = series.values();
  const std::size_t n = window_count(raw.size(), lookback, horizon);
  if (n < 5) {
    throw SplitError(series.symbol() + ": " + std::to_string(n) +
                     " windows available, need at least 5 for a 60/20/20 split");
  }
  const auto sizes = split_sizes(n);
  // Raw values touched by the training windows: inputs and targets.
  const std::size_t fit_len = sizes.train + lookback + horizon - 1;
  const std::vector<double> fit_segment(raw.begin(),
                                        raw.begin() + static_cast<std::ptrdiff_t>(fit_len));
  const auto scaling = fit_scaler(fit_segment);

  PreparedTarget out{split(make_windows(raw, lookback, horizon, scaling)),
                     scale_all(fit_segment, scaling)};
  return out;
}

PreparedSource prepare_source(const PriceSeries& series, std::size_t lookback,
                              std::size_t horizon) {
  const auto raw = series.values();
  const auto scaling = fit_scaler(raw);
  return {series.symbol(), make_windows(raw, lookback, horizon, scaling),
          scale_all(raw, scaling)};
}

}  // namespace mstl
