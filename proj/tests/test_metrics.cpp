#include <cmath>
#include <random>

#include "doctest.h"
#include "gen.hpp"
#include "oracles.hpp"
#include "unlearn/metrics.hpp"

using namespace unlearn;

namespace {

SampleOutcome qa(Split split, std::string gold, std::string pred) {
  SampleOutcome s;
  s.sample_id = gold + pred;
  s.split = split;
  s.gold_answer = std::move(gold);
  s.prediction = std::move(pred);
  return s;
}

}  // namespace

TEST_CASE("answer normalization and matching") {
  CHECK(normalize_answer("  The  capital\tis PARIS. ") == "the capital is paris");
  CHECK(answer_matches("Paris", "The capital is paris."));
  CHECK_FALSE(answer_matches("Rome", "The capital is paris."));
  CHECK_FALSE(answer_matches("...", "anything"));
}

TEST_CASE("substring accuracy") {
  std::vector<SampleOutcome> s{qa(Split::forget, "a", "a b"), qa(Split::forget, "x", "y"),
                               qa(Split::forget, "cat", "the cat"), qa(Split::retain, "r", "r")};
  CHECK(substring_accuracy(s, Split::forget) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(substring_accuracy(s, Split::retain) == 1.0);
  CHECK(substring_accuracy(s, Split::forget, 1) == 1.0);
  std::vector<SampleOutcome> only_retain{qa(Split::retain, "r", "r")};
  CHECK_THROWS_WITH_AS(substring_accuracy(only_retain, Split::forget), doctest::Contains("no samples in split"),
                       ValidationError);
}

TEST_CASE("activation distance") {
  std::vector<double> a{3, 4}, z{0, 0}, b{2, 0}, c{0, 4};
  std::vector<VecPair> one{{a, z}};
  CHECK(activation_distance(one) == 5.0);
  std::vector<VecPair> two{{b, z}, {c, z}};
  CHECK(activation_distance(two) == 3.0);
  std::vector<VecPair> same{{a, a}, {b, b}};
  CHECK(activation_distance(same) == 0.0);
  std::vector<double> shorter{1};
  std::vector<VecPair> bad{{a, shorter}};
  CHECK_THROWS_AS(activation_distance(bad), ValidationError);
  CHECK_THROWS_AS(activation_distance(std::span<const VecPair>{}), ValidationError);
}

TEST_CASE("Jensen-Shannon divergence") {
  std::vector<double> p{0.5, 0.5}, q{1.0, 0.0}, r{0.0, 1.0};
  CHECK(js_divergence(p, p) == 0.0);
  CHECK(js_divergence(q, r) == 1.0);
  CHECK(std::abs(js_divergence(p, q) - oracle::jsd(p, q)) < 1e-12);
  CHECK(std::abs(js_divergence(p, q, LogBase::nats) - oracle::jsd(p, q, std::exp(1.0))) < 1e-12);
  std::vector<double> bad{0.7, 0.7};
  CHECK_THROWS_AS(js_divergence(bad, p), ValidationError);
}

TEST_CASE("oracle distance") {
  ParameterSnapshot a{"a", {1, 2, 3, 4}, {{"w", 0, 4}}};
  ParameterSnapshot b{"b", {2, 1, 5, 4}, {{"w", 0, 4}}};
  CHECK(oracle_distance(a, b) == 1.0);
  CHECK(oracle_distance(a, a) == 0.0);
  ParameterSnapshot shifted = a;
  for (auto& v : shifted.values) v += 0.5f;
  CHECK(oracle_distance(a, shifted) == doctest::Approx(0.5));
  SUBCASE("per-tensor variant") {
    ParameterSnapshot c{"c", {0, 0, 0, 0}, {{"x", 0, 2}, {"y", 2, 2}}};
    ParameterSnapshot d{"d", {3, 4, 0, 1}, {{"x", 0, 2}, {"y", 2, 2}}};
    CHECK(oracle_distance(c, d, DistanceMode::per_tensor) == doctest::Approx(3.0));
  }
  SUBCASE("layout mismatch names the tensor") {
    ParameterSnapshot c{"c", {0, 0, 0, 0}, {{"x", 0, 2}, {"y", 2, 2}}};
    ParameterSnapshot d{"d", {0, 0, 0, 0}, {{"x", 0, 2}, {"z", 2, 2}}};
    CHECK_THROWS_WITH(oracle_distance(c, d), doctest::Contains("'y'"));
  }
}

TEST_CASE("higher-is-better transform") {
  const HibVector h = to_hib(MetricVector{0.622, 0.620, 0.282, 106.17, 0.065});
  CHECK(h.h_fa == doctest::Approx(0.378));
  CHECK(h.h_ra == doctest::Approx(0.620));
  CHECK(h.h_mia == doctest::Approx(0.718));
  CHECK(h.h_ad == doctest::Approx(0.3459).epsilon(1e-4));
  CHECK(h.h_js == doctest::Approx(0.935));
  CHECK(to_hib(Metric::ad, 0.0) == 1.0);
}

TEST_CASE("MIA: separable classes score 1") {
  std::vector<MiaFeatures> forget(20, MiaFeatures{1, 0, 1}), retain(20, MiaFeatures{0, -5, 0});
  CHECK(mia_score(forget, retain) == 1.0);
}

TEST_CASE("MIA: error cases") {
  std::vector<MiaFeatures> few(3, MiaFeatures{1, 0, 1}), many(10, MiaFeatures{0, 0, 0});
  CHECK_THROWS_AS(mia_score(few, many), ValidationError);
  MiaOptions one_fold;
  one_fold.folds = 1;
  CHECK_THROWS_AS(mia_score(many, many, one_fold), ValidationError);
  std::vector<MiaFeatures> nan_rows(10, MiaFeatures{std::nan(""), 0, 0});
  CHECK_THROWS_AS(mia_score(nan_rows, many), ValidationError);
}

TEST_CASE("MIA: IRLS converges to a stationary point") {
  gen::Rng rng(3);
  std::normal_distribution<double> n01(0, 1);
  std::vector<MiaFeatures> x;
  std::vector<int> y;
  for (int i = 0; i < 80; ++i) {
    const int label = i % 2;
    x.push_back({n01(rng) + label, n01(rng), n01(rng) - 0.5 * label});
    y.push_back(label);
  }
  const LogisticFit fit = fit_logistic_irls(x, y, MiaOptions{});
  CHECK(fit.gradient_max_norm < 1e-8);
  CHECK(fit.iterations < 100);
}

TEST_CASE("MIA: stratified folds keep class balance") {
  std::vector<int> labels(50, 0);
  for (int i = 0; i < 20; ++i) labels[i] = 1;
  const auto folds = stratified_folds(labels, 5, 7);
  for (int f = 0; f < 5; ++f) {
    int pos = 0, total = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (folds[i] == f) ++total, pos += labels[i];
    CHECK(total == 10);
    CHECK(pos == 4);
  }
  CHECK(stratified_folds(labels, 5, 7) == folds);
}
