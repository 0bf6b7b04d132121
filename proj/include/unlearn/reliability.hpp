#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unlearn/records.hpp"

namespace unlearn {

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;
};

enum class PValueMethod {
  t_approx,           // t = rho * sqrt((n-2)/(1-rho^2)) against Student-t, n-2 df
  exact_permutation,  // enumerate all n! rank permutations; n <= 10 only
};

// Spearman rank correlation (Pearson on midranks) with a two-sided p-value.
// Throws UndefinedError on a constant sequence and ValidationError when n < 4.
Correlation spearman_rho(std::span<const double> x, std::span<const double> y,
                         PValueMethod method = PValueMethod::t_approx);

// Two-sided t-approximation p-value for a given rho and sample size.
double spearman_p_value(double rho, std::size_t n);

inline constexpr double kDefaultEpsilon = 0.01;

// w_i = max(rho_i, eps) / sum_j max(rho_j, eps), (FA, RA, MIA, AD, JS) order.
WeightVector derive_weights(const std::array<double, kMetricCount>& rho, double epsilon = kDefaultEpsilon);

// Published reliability column in (FA, RA, MIA, AD, JS) order.
inline constexpr std::array<double, kMetricCount> kPublishedRho = {-0.418, 0.484, 0.224, -0.215, -0.051};

enum class ReliabilityMode { full_sample, cv_averaged };

struct ReliabilityReport {
  std::array<double, kMetricCount> rho{};
  std::array<double, kMetricCount> p_value{};
  WeightVector weights;
  std::size_t n = 0;
  double epsilon = kDefaultEpsilon;
  ReliabilityMode mode = ReliabilityMode::full_sample;
  int folds = 1;
  std::uint64_t seed = 0;
  // Per-fold training-split rho; empty cells where the metric was constant.
  std::vector<std::array<std::optional<double>, kMetricCount>> fold_rho;
};

// Spearman rho of each metric's higher-is-better value against oracle
// proximity (negated oracle distance) over all runs.
ReliabilityReport full_sample_reliability(std::span<const ModelRun> runs, double epsilon = kDefaultEpsilon);

struct CvOptions {
  int folds = 5;
  double epsilon = kDefaultEpsilon;
  std::uint64_t seed = 42;
  bool stratify_by_method = false;
};

// Seeded k-fold partition of n items: fold index per item. Plain mode shuffles
// and deals contiguous chunks; stratified mode deals each group round-robin.
std::vector<int> kfold_assignment(std::size_t n, int folds, std::uint64_t seed);
std::vector<int> kfold_assignment_stratified(std::span<const int> groups, int folds, std::uint64_t seed);

// rho per metric on each training split, averaged over folds, then
// derive_weights. folds == 1 uses the full sample as the only training split.
ReliabilityReport cv_weights(std::span<const ModelRun> runs, const CvOptions& opt = {});

struct EpsilonRow {
  double epsilon = 0.0;
  WeightVector weights;
  std::vector<Method> ranking;  // best first
  std::vector<double> scores;   // aligned with ranking
};

struct EpsilonSensitivity {
  std::vector<EpsilonRow> rows;
  bool rankings_identical = true;
};

// For each epsilon: derive weights from `rho`, score the cohort's per-method
// means, and compare the rankings.
EpsilonSensitivity epsilon_sensitivity(std::span<const ModelRun> runs, const std::array<double, kMetricCount>& rho,
                                       std::span<const double> epsilons);

std::string to_markdown(const ReliabilityReport& r);

}  // namespace unlearn
