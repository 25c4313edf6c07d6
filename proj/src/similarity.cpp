#include "mstl/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mstl/errors.hpp"

namespace mstl {

std::string to_string(SimilarityKind k) {
  switch (k) {
    case SimilarityKind::coral:
      return "coral";
    case SimilarityKind::wasserstein:
      return "wasserstein";
    case SimilarityKind::dtw:
      return "dtw";
    case SimilarityKind::pcc:
      return "pcc";
  }
  return "coral";
}

SimilarityKind parse_similarity(const std::string& s) {
  if (s == "coral") return SimilarityKind::coral;
  if (s == "wasserstein" || s == "wd") return SimilarityKind::wasserstein;
  if (s == "dtw") return SimilarityKind::dtw;
  if (s == "pcc") return SimilarityKind::pcc;
  throw ConfigError("unknown similarity kind '" + s + "'");
}

bool is_dissimilarity(SimilarityKind k) noexcept { return k != SimilarityKind::pcc; }

double dtw_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw SimilarityError("dtw_distance: empty input");
  const std::size_t m = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Two rolling rows of the (n+1) x (m+1) accumulated-cost table.
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (double ai : a) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = std::abs(ai - b[j - 1]);
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double wasserstein_1d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw SimilarityError("wasserstein_1d: empty input");
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::vector<double> support;
  support.reserve(sa.size() + sb.size());
  std::merge(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(support));

  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t ia = 0, ib = 0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < support.size(); ++k) {
    const double x = support[k];
    while (ia < sa.size() && sa[ia] <= x) ++ia;
    while (ib < sb.size() && sb[ib] <= x) ++ib;
    const double gap = support[k + 1] - x;
    if (gap > 0.0) total += std::abs(ia / na - ib / nb) * gap;
  }
  return total;
}

double pcc(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw SimilarityError("pcc: length mismatch");
  if (a.size() < 2) throw SimilarityError("pcc: need at least 2 points");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw SimilarityError("pcc: undefined correlation (constant input)");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double pcc_recent_aligned(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  const std::vector<double> ta(a.end() - static_cast<std::ptrdiff_t>(n), a.end());
  const std::vector<double> tb(b.end() - static_cast<std::ptrdiff_t>(n), b.end());
  return pcc(ta, tb);
}

namespace {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

}  // namespace

double coral_distance(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt) {
  if (src.cols() != tgt.cols()) throw SimilarityError("coral_distance: column count mismatch");
  if (src.rows() < 2 || tgt.rows() < 2) throw SimilarityError("coral_distance: need >= 2 rows");
  const double d = static_cast<double>(src.cols());
  return (sample_covariance(src) - sample_covariance(tgt)).squaredNorm() / (4.0 * d * d);
}

std::vector<double> similarity_to_weights(const std::vector<double>& values, SimilarityKind kind) {
  if (values.empty()) throw SimilarityError("similarity_to_weights: no values");
  std::vector<double> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) throw SimilarityError("similarity_to_weights: non-finite value");
    if (is_dissimilarity(kind)) {
      if (v < 0.0) throw SimilarityError("similarity_to_weights: negative dissimilarity");
      raw[i] = 1.0 / (v + kWeightEpsilon);
    } else {
      if (v < -1.0 || v > 1.0) throw SimilarityError("similarity_to_weights: pcc outside [-1, 1]");
      raw[i] = (v + 1.0) / 2.0;
    }
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (!(total > 0.0)) throw SimilarityError("degenerate weights: every raw weight is zero");
  for (double& r : raw) r /= total;
  return raw;
}

double measure(SimilarityKind kind, const SimilarityInput& source, const SimilarityInput& target) {
  switch (kind) {
    case SimilarityKind::coral:
      return coral_distance(source.windows, target.windows);
    case SimilarityKind::wasserstein:
      return wasserstein_1d(source.values, target.values);
    case SimilarityKind::dtw:
      return dtw_distance(source.values, target.values);
    case SimilarityKind::pcc:
      return pcc_recent_aligned(source.values, target.values);
  }
  return 0.0;
}

}  // namespace mstl
