#include <cmath>

#include <fmt/format.h>

#include "doctest.h"
#include "gen.hpp"
#include "oracles.hpp"
#include "unlearn/metrics.hpp"
#include "unlearn/ranks.hpp"
#include "unlearn/reliability.hpp"
#include "unlearn/uqs.hpp"

using namespace unlearn;

namespace {

constexpr int kCases = 100;

// Random strictly increasing map.
std::function<double(double)> monotone(gen::Rng& rng) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  const double a = u(rng), b = u(rng) - 1.5;
  switch (rng() % 3) {
    case 0: return [=](double x) { return a * x + b; };
    case 1: return [=](double x) { return std::exp(a * x); };
    default: return [=](double x) { return std::atan(x) + a * x * x * x; };
  }
}

std::vector<double> mapped(const std::vector<double>& v, const std::function<double(double)>& f) {
  std::vector<double> out;
  for (double x : v) out.push_back(f(x));
  return out;
}

std::vector<double> negated(std::vector<double> v) {
  for (auto& x : v) x = -x;
  return v;
}

bool constant(const std::vector<double>& v) {
  return std::ranges::all_of(v, [&](double x) { return x == v[0]; });
}

std::vector<ModelRun> balanced_cohort(gen::Rng& rng, std::size_t methods, std::size_t cells) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ModelRun> runs;
  for (std::size_t m = 0; m < methods; ++m)
    for (std::size_t c = 0; c < cells; ++c) {
      ModelRun r;
      r.run_id = fmt::format("m{}c{}", m, c);
      r.method = Method::parse(fmt::format("method{}", m));
      r.dataset = fmt::format("d{}", c);
      r.metrics = {u(rng), u(rng), u(rng), 150 * u(rng), u(rng)};
      runs.push_back(r);
    }
  return runs;
}

}  // namespace

TEST_CASE("JS divergence: symmetric, zero on equal inputs, bounded") {
  gen::Rng rng(101);
  for (int i = 0; i < kCases; ++i) {
    const auto n = gen::size(rng, 2, 40);
    const auto p = gen::distribution(rng, n, 0.2);
    const auto q = gen::distribution(rng, n, 0.2);
    const double pq = js_divergence(p, q);
    CHECK(pq == doctest::Approx(js_divergence(q, p)).epsilon(1e-12));
    CHECK(pq >= 0.0);
    CHECK(pq <= 1.0);
    CHECK(js_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(pq - oracle::jsd(p, q)) < 1e-12);
  }
}

TEST_CASE("activation distance and oracle distance satisfy the triangle inequality") {
  gen::Rng rng(102);
  for (int i = 0; i < kCases; ++i) {
    const auto n = gen::size(rng, 1, 6), dim = gen::size(rng, 1, 10);
    std::vector<std::vector<double>> a, b, c;
    for (std::size_t k = 0; k < n; ++k) {
      a.push_back(gen::reals(rng, dim));
      b.push_back(gen::reals(rng, dim));
      c.push_back(gen::reals(rng, dim));
    }
    auto ad = [&](const auto& x, const auto& y) {
      std::vector<VecPair> pairs;
      for (std::size_t k = 0; k < n; ++k) pairs.push_back({x[k], y[k]});
      return activation_distance(pairs);
    };
    CHECK(ad(a, c) <= ad(a, b) + ad(b, c) + 1e-12);

    ParameterSnapshot s[3];
    const std::size_t t1 = gen::size(rng, 1, 20), t2 = gen::size(rng, 1, 20);
    for (int k = 0; k < 3; ++k) {
      s[k].model_id = fmt::format("m{}", k);
      for (double v : gen::reals(rng, t1 + t2, -2, 2)) s[k].values.push_back(static_cast<float>(v));
      s[k].layout = {{"w", 0, t1}, {"b", t1, t2}};
    }
    for (auto mode : {DistanceMode::per_scalar, DistanceMode::per_tensor}) {
      const double ac = oracle_distance(s[0], s[2], mode);
      CHECK(ac <= oracle_distance(s[0], s[1], mode) + oracle_distance(s[1], s[2], mode) + 1e-9);
    }

    // Swapping the tensor order in every snapshot leaves the distance unchanged.
    ParameterSnapshot swapped[3];
    for (int k = 0; k < 3; ++k) {
      swapped[k].model_id = s[k].model_id;
      swapped[k].values.assign(s[k].values.begin() + static_cast<std::ptrdiff_t>(t1), s[k].values.end());
      swapped[k].values.insert(swapped[k].values.end(), s[k].values.begin(),
                               s[k].values.begin() + static_cast<std::ptrdiff_t>(t1));
      swapped[k].layout = {{"b", 0, t2}, {"w", t2, t1}};
    }
    for (auto mode : {DistanceMode::per_scalar, DistanceMode::per_tensor})
      CHECK(oracle_distance(swapped[0], swapped[1], mode) ==
            doctest::Approx(oracle_distance(s[0], s[1], mode)).epsilon(1e-12));
  }
}

TEST_CASE("MIA is invariant under increasing affine maps of one feature") {
  gen::Rng rng(103);
  std::normal_distribution<double> z(0, 1);
  std::uniform_real_distribution<double> u(0.5, 20);
  for (int i = 0; i < 20; ++i) {
    std::vector<MiaFeatures> forget, retain;
    for (int k = 0; k < 30; ++k) {
      forget.push_back({z(rng) + 0.8, z(rng), z(rng) + 0.3});
      retain.push_back({z(rng), z(rng) + 0.4, z(rng)});
    }
    const double base = mia_score(forget, retain);
    const std::size_t col = static_cast<std::size_t>(i % 3);
    const double scale = u(rng), shift = u(rng) - 10;
    for (auto* set : {&forget, &retain})
      for (auto& f : *set) f[col] = scale * f[col] + shift;
    CHECK(std::abs(mia_score(forget, retain) - base) < 1e-6);
  }
}

TEST_CASE("substring accuracy ignores case and edge punctuation") {
  gen::Rng rng(104);
  const std::string answers[] = {"Paris", "blue whale", "1969", "Ada Lovelace", "carbon"};
  const std::string edges[] = {"", ".", "!!", "\"", "...", "?"};
  for (int i = 0; i < kCases; ++i) {
    std::vector<SampleOutcome> plain, noisy;
    for (int k = 0; k < 6; ++k) {
      SampleOutcome s;
      s.sample_id = fmt::format("s{}", k);
      s.gold_answer = answers[rng() % 5];
      s.prediction = rng() % 2 ? "the answer is " + s.gold_answer : answers[rng() % 5];
      plain.push_back(s);
      std::string p = s.prediction;
      for (auto& ch : p)
        if (rng() % 2) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      s.prediction = edges[rng() % 6] + p + edges[rng() % 6];
      noisy.push_back(s);
    }
    CHECK(substring_accuracy(plain, Split::forget) == substring_accuracy(noisy, Split::forget));
  }
}

TEST_CASE("kendall tau: symmetry, self-agreement, negation, monotone invariance") {
  gen::Rng rng(105);
  for (int i = 0; i < kCases; ++i) {
    const auto n = gen::size(rng, 3, 25);
    const auto x = i % 2 ? gen::tied(rng, n) : gen::reals(rng, n);
    const auto y = gen::reals(rng, n);
    if (constant(x)) continue;
    const double t = kendall_tau(x, y);
    CHECK(t == doctest::Approx(kendall_tau(y, x)).epsilon(1e-14));
    CHECK(kendall_tau(x, x) == doctest::Approx(1.0));
    CHECK(kendall_tau(negated(x), y) == doctest::Approx(-t).epsilon(1e-14));
    CHECK(kendall_tau(mapped(x, monotone(rng)), mapped(y, monotone(rng))) == doctest::Approx(t).epsilon(1e-14));
    CHECK(std::abs(t - oracle::kendall_tau_b(x, y)) < 1e-12);
  }
}

TEST_CASE("tau matrix equals brute-force pair counting on small cohorts") {
  gen::Rng rng(106);
  for (int i = 0; i < kCases; ++i) {
    auto runs = balanced_cohort(rng, gen::size(rng, 2, 5), 2);
    if (runs.size() > 10) runs.resize(10);
    const TauMatrix m = tau_matrix(runs);
    for (std::size_t a = 0; a < kMetricCount; ++a)
      for (std::size_t b = a + 1; b < kMetricCount; ++b) {
        std::vector<double> xa, xb;
        for (const auto& r : runs) xa.push_back(r.metrics.get(kMetrics[a])), xb.push_back(r.metrics.get(kMetrics[b]));
        REQUIRE(m.at(a, b));
        CHECK(std::abs(*m.at(a, b) - oracle::kendall_tau_b(xa, xb)) < 1e-12);
      }
    // Permuting the metric order leaves the mean unchanged.
    std::vector<std::string> names = m.metrics;
    std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    std::vector<std::string> pnames;
    std::vector<double> upper;
    for (std::size_t a = 0; a < 5; ++a) pnames.push_back(names[perm[a]]);
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t b = a + 1; b < 5; ++b) upper.push_back(*m.at(perm[a], perm[b]));
    CHECK(mean_pairwise_tau(make_tau_matrix(pnames, upper)) == doctest::Approx(mean_pairwise_tau(m)).epsilon(1e-14));
  }
}

TEST_CASE("method rank columns are invariant under increasing metric maps") {
  gen::Rng rng(107);
  for (int i = 0; i < kCases; ++i) {
    // Nonlinear maps do not commute with the per-method mean, so they are
    // applied to single-cell cohorts only.
    const bool single = i % 2 == 0;
    auto runs = balanced_cohort(rng, gen::size(rng, 2, 6), single ? 1 : gen::size(rng, 2, 4));
    const RankTable before = method_rank_table(runs);
    for (auto& r : runs) {
      r.metrics.fa = single ? r.metrics.fa * r.metrics.fa : 0.5 * r.metrics.fa;
      r.metrics.ad = 4 * r.metrics.ad + 1;
      r.metrics.js = single ? std::sqrt(r.metrics.js) : 0.25 * r.metrics.js + 0.5;
    }
    const RankTable after = method_rank_table(runs);
    CHECK(after.ranks == before.ranks);
  }
}

TEST_CASE("spearman: monotone invariance and antisymmetry") {
  gen::Rng rng(108);
  for (int i = 0; i < kCases; ++i) {
    const auto n = gen::size(rng, 4, 30);
    const auto x = gen::reals(rng, n), y = i % 3 ? gen::reals(rng, n) : gen::tied(rng, n, 5);
    if (constant(y)) continue;
    const double r = spearman_rho(x, y).rho;
    CHECK(spearman_rho(mapped(x, monotone(rng)), y).rho == doctest::Approx(r).epsilon(1e-12));
    CHECK(spearman_rho(x, negated(y)).rho == doctest::Approx(-r).epsilon(1e-12));
  }
}

TEST_CASE("p-value is symmetric and strictly decreasing in |rho|") {
  gen::Rng rng(109);
  std::uniform_real_distribution<double> u(0, 0.99);
  for (int i = 0; i < kCases; ++i) {
    const auto n = gen::size(rng, 4, 200);
    double a = u(rng), b = u(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    CHECK(spearman_p_value(a, n) == spearman_p_value(-a, n));
    CHECK(spearman_p_value(a, n) > spearman_p_value(b, n));
  }
  CHECK(spearman_p_value(0.0, 10) == 1.0);
}

TEST_CASE("derived weights lie on the simplex and respond monotonically") {
  gen::Rng rng(110);
  std::uniform_real_distribution<double> u(-1, 0.9);
  for (int i = 0; i < kCases; ++i) {
    std::array<double, kMetricCount> rho;
    for (auto& r : rho) r = u(rng);
    const WeightVector w = derive_weights(rho);
    CHECK_NOTHROW(validate(w));
    const std::size_t k = rng() % kMetricCount;
    auto raised = rho;
    raised[k] = std::max(rho[k], 0.02) + 0.05;
    const WeightVector w2 = derive_weights(raised);
    CHECK(w2.w[k] > w.w[k]);
    for (std::size_t j = 0; j < kMetricCount; ++j)
      if (j != k) CHECK(w2.w[j] < w.w[j]);
  }
}

TEST_CASE("one-hot weights reproduce the rank table column") {
  gen::Rng rng(111);
  for (int i = 0; i < kCases; ++i) {
    const auto runs = balanced_cohort(rng, gen::size(rng, 2, 6), 2);
    const RankTable table = method_rank_table(runs);
    const Metric m = kMetrics[static_cast<std::size_t>(i) % kMetricCount];
    WeightVector w;
    w.w[index(m)] = 1.0;
    const Leaderboard board = leaderboard(runs, w);
    for (const auto& row : board.rows) {
      const auto at = std::ranges::find(table.methods, row.method) - table.methods.begin();
      CHECK(static_cast<double>(row.rank) == table.rank(static_cast<std::size_t>(at), m));
    }
  }
}

TEST_CASE("adding a constant to every UQS keeps the ranking") {
  gen::Rng rng(112);
  for (int i = 0; i < kCases; ++i) {
    auto runs = balanced_cohort(rng, gen::size(rng, 2, 6), 1);
    for (auto& r : runs) r.metrics.ra *= 0.5;
    WeightVector w{{0, 1, 0, 0, 0}};
    const auto before = leaderboard(runs, w);
    // With all weight on RA, shifting RA shifts every score by the same amount.
    for (auto& r : runs) r.metrics.ra += 0.25;
    const auto after = leaderboard(runs, w);
    for (std::size_t k = 0; k < before.rows.size(); ++k) CHECK(after.rows[k].method == before.rows[k].method);
  }
}
