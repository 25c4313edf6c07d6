#include "mstl/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include "mstl/errors.hpp"

namespace mstl {

namespace {

double unit_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller on the portable uniform draw.
double normal(std::mt19937_64& rng) {
  const double u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Business days starting 2015-01-05 (a Monday).
std::vector<Date> business_days(std::size_t n) {
  using namespace std::chrono;
  std::vector<Date> out;
  sys_days day = sys_days{year{2015} / January / 5};
  while (out.size() < n) {
    const weekday wd{day};
    if (wd != Saturday && wd != Sunday) out.emplace_back(day);
    day += days{1};
  }
  return out;
}

}  // namespace

SyntheticFamily synthetic_family(const SyntheticFamilyConfig& cfg) {
  if (cfg.target_length > cfg.source_length) {
    throw ConfigError("synthetic target cannot be longer than the sources");
  }
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = cfg.source_length;
  const auto dates = business_days(n);

  std::vector<double> factor(n);
  double f = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    f = cfg.factor_phi * f + 0.1 * normal(rng);
    factor[t] = f;
  }

  auto member = [&](const std::string& symbol, std::size_t first) {
    const double level = 20.0 + 80.0 * unit_uniform(rng);
    const double loading = 0.7 + 0.6 * unit_uniform(rng);
    const double drift = 0.0008 * (2.0 * unit_uniform(rng) - 1.0);
    double e = 0.0;
    std::vector<Observation> obs;
    for (std::size_t t = 0; t < n; ++t) {
      e = cfg.noise_phi * e + cfg.noise_scale * 0.1 * normal(rng);
      const double log_price = std::log(level) + drift * static_cast<double>(t) +
                               loading * factor[t] + e;
      if (t >= first) obs.push_back({dates[t], std::round(std::exp(log_price) * 1e4) / 1e4});
    }
    return PriceSeries(symbol, std::move(obs));
  };

  std::vector<PriceSeries> sources;
  for (std::size_t i = 0; i < cfg.n_sources; ++i) {
    sources.push_back(member("SRC" + std::to_string(i + 1), 0));
  }
  PriceSeries target = member("TGT", n - cfg.target_length);
  return {std::move(target), std::move(sources)};
}

void write_yahoo_csv(const PriceSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write " + path.string());
  out << "Date,Open,High,Low,Close,Adj Close,Volume\n" << std::fixed << std::setprecision(4);
  for (const auto& o : series.observations()) {
    const double c = o.close;
    out << format_date(o.date) << ',' << c << ',' << c << ',' << c << ',' << c << ',' << c << ",1000\n";
  }
}

}  // namespace mstl
