#pragma once

// Synthetic families of related price series: every member loads on one
// shared latent AR(1) factor plus its own trend and idiosyncratic AR noise.
// The target is the member observed only over the most recent stretch.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mstl/data.hpp"

namespace mstl {

struct SyntheticFamilyConfig {
  std::size_t n_sources = 4;
  std::size_t source_length = 600;
  std::size_t target_length = 150;
  double factor_phi = 0.97;   // latent factor persistence
  double noise_phi = 0.6;     // idiosyncratic persistence
  double noise_scale = 0.25;  // idiosyncratic vs factor loading
  std::uint64_t seed = 0;
};

struct SyntheticFamily {
  PriceSeries target;
  std::vector<PriceSeries> sources;
};

SyntheticFamily synthetic_family(const SyntheticFamilyConfig& cfg);

// Writes Date,Open,High,Low,Close,Adj Close,Volume rows.
void write_yahoo_csv(const PriceSeries& series, const std::filesystem::path& path);

}  // namespace mstl
