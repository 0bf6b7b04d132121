#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/kernels.hpp"
#include "unlearn/records.hpp"

namespace unlearn {

using kernels::LogBase;
using kernels::VecPair;

// ---------------------------------------------------------------------------
// Forget / retain accuracy

// Lowercase, collapse runs of whitespace to one space, strip leading and
// trailing punctuation and whitespace.
std::string normalize_answer(std::string_view text);

// True when the normalized gold answer occurs in the normalized prediction.
// An answer that normalizes to the empty string never matches.
bool answer_matches(std::string_view gold, std::string_view prediction);

inline constexpr std::size_t kDefaultSampleCap = 100;

// Fraction of the first min(cap, available) samples of `split` (input order)
// whose answer matches. Throws ValidationError "no samples in split" when the
// split is empty.
double substring_accuracy(std::span<const SampleOutcome> outcomes, Split split,
                          std::size_t cap = kDefaultSampleCap);

// ---------------------------------------------------------------------------
// Membership inference

// [max_confidence, -entropy, top2_margin]
using MiaFeatures = std::array<double, 3>;

MiaFeatures mia_features(const SampleOutcome& s);

struct MiaOptions {
  int folds = 5;
  std::uint64_t seed = 42;
  double l2_penalty = 1.0;
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
};

struct LogisticFit {
  std::array<double, 4> coef{};  // intercept followed by the three feature weights
  int iterations = 0;
  double gradient_max_norm = 0.0;

  double probability(const MiaFeatures& z) const;
};

// L2-penalized logistic regression by IRLS (Newton). The intercept is not
// penalized. Features are expected to be standardized already.
LogisticFit fit_logistic_irls(std::span<const MiaFeatures> x, std::span<const int> y, const MiaOptions& opt);

// Stratified seeded fold assignment: each class is shuffled independently and
// dealt round-robin across folds. Returns fold index per sample.
std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed);

// Mean held-out accuracy (threshold 0.5) of the 3-feature attack over
// stratified folds; forget samples are label 1.
double mia_score(std::span<const MiaFeatures> forget, std::span<const MiaFeatures> retain,
                 const MiaOptions& opt = {});
double mia_score(std::span<const SampleOutcome> forget, std::span<const SampleOutcome> retain,
                 const MiaOptions& opt = {});

// ---------------------------------------------------------------------------
// Oracle alignment

// Mean Euclidean distance between paired activations.
double activation_distance(std::span<const VecPair> pairs);

// Jensen-Shannon divergence of one pair (validated distributions).
double js_divergence(std::span<const double> p, std::span<const double> q, LogBase base = LogBase::bits);
// Mean JSD over pairs.
double js_divergence(std::span<const VecPair> pairs, LogBase base = LogBase::bits);

// Pairs built from the first `cap` samples of `split` that carry the vectors.
std::vector<VecPair> activation_pairs(std::span<const SampleOutcome> outcomes, Split split,
                                      std::size_t cap = kDefaultSampleCap);
std::vector<VecPair> distribution_pairs(std::span<const SampleOutcome> outcomes, Split split,
                                        std::size_t cap = kDefaultSampleCap);

enum class DistanceMode {
  per_scalar,  // mean over all scalars of |a_i - b_i|
  per_tensor,  // mean over tensors of ||a_t - b_t||_2
};

// Parameter-space distance between an unlearned model and the oracle.
// Throws ValidationError naming the first differing tensor on layout mismatch.
double oracle_distance(const ParameterSnapshot& a, const ParameterSnapshot& b,
                       DistanceMode mode = DistanceMode::per_scalar);

// ---------------------------------------------------------------------------
// Higher-is-better transform

struct HibVector {
  double h_fa = 0.0;
  double h_ra = 0.0;
  double h_mia = 0.0;
  double h_ad = 0.0;
  double h_js = 0.0;

  double get(Metric m) const { return as_array()[index(m)]; }
  std::array<double, kMetricCount> as_array() const { return {h_fa, h_ra, h_mia, h_ad, h_js}; }
};

// 1-FA, RA, 1-MIA, exp(-AD/100), 1-JS
HibVector to_hib(const MetricVector& m);
double to_hib(Metric metric, double raw);

}  // namespace unlearn
