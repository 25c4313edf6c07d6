#pragma once

// Source/target similarity measures and the mapping from measured
// (dis)similarity to ensemble weights.

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mstl {

// coral, wasserstein and dtw are dissimilarities (0 = identical);
// pcc is a similarity in [-1, 1].
enum class SimilarityKind { coral, wasserstein, dtw, pcc };

inline constexpr SimilarityKind kAllSimilarityKinds[] = {
    SimilarityKind::coral, SimilarityKind::wasserstein, SimilarityKind::dtw, SimilarityKind::pcc};

std::string to_string(SimilarityKind k);
SimilarityKind parse_similarity(const std::string& s);
bool is_dissimilarity(SimilarityKind k) noexcept;

// Exact DTW with |a_i - b_j| cost and match/insert/delete steps.
double dtw_distance(const std::vector<double>& a, const std::vector<double>& b);

// 1-Wasserstein distance between the empirical distributions of a and b,
// integrating |F_a - F_b| over the merged support. Sizes may differ.
double wasserstein_1d(const std::vector<double>& a, const std::vector<double>& b);

// Sample Pearson correlation. Lengths must match and be >= 2.
double pcc(const std::vector<double>& a, const std::vector<double>& b);

// Both series truncated to their last min(len) points, then correlated.
double pcc_recent_aligned(const std::vector<double>& a, const std::vector<double>& b);

// (1 / 4d^2) * ||C_s - C_t||_F^2 with C the sample covariance of the rows.
double coral_distance(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt);

inline constexpr double kWeightEpsilon = 1e-8;

// Dissimilarities: raw_i = 1 / (d_i + 1e-8). PCC: raw_i = (r_i + 1) / 2.
// Result is raw normalized to sum 1.
std::vector<double> similarity_to_weights(const std::vector<double>& values, SimilarityKind kind);

// Measurement inputs for one series: scaled scalar values (WD/DTW/PCC) and
// the windowed feature matrix (CORAL).
struct SimilarityInput {
  const std::vector<double>& values;
  const Eigen::MatrixXd& windows;
};

double measure(SimilarityKind kind, const SimilarityInput& source, const SimilarityInput& target);

}  // namespace mstl
