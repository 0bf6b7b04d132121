#include <cmath>
#include <map>

#include <fmt/format.h>

#include "doctest.h"
#include "gen.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "unlearn/kernels.hpp"
#include "unlearn/uqs.hpp"

using namespace unlearn;

namespace {

const std::filesystem::path kFixtures = UNLEARN_FIXTURE_DIR;

double hand_uqs(const MetricVector& m, const WeightVector& w) {
  return w.w[0] * (1 - m.fa) + w.w[1] * m.ra + w.w[2] * (1 - m.mia) + w.w[3] * std::exp(-m.ad / 100) +
         w.w[4] * (1 - m.js);
}

std::vector<std::string> ranking(const Leaderboard& b) {
  std::vector<std::string> out;
  for (const auto& r : b.rows) out.push_back(r.method.name);
  return out;
}

ModelRun run(std::string id, MethodKind k, MetricVector m) {
  ModelRun r;
  r.run_id = std::move(id);
  r.method = Method::of(k);
  r.dataset = "d";
  r.metrics = m;
  return r;
}

std::vector<ModelRun> random_cohort(gen::Rng& rng, std::size_t n_methods, std::size_t per_method) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<ModelRun> runs;
  for (std::size_t m = 0; m < n_methods; ++m)
    for (std::size_t s = 0; s < per_method; ++s) {
      ModelRun r;
      r.run_id = fmt::format("m{}-s{}", m, s);
      r.method = Method::parse(fmt::format("method{}", m));
      r.dataset = "d";
      r.seed = static_cast<std::int64_t>(s);
      r.metrics = {u(rng), u(rng), u(rng), 200 * u(rng), u(rng)};
      runs.push_back(r);
    }
  return runs;
}

}  // namespace

TEST_CASE("UQS of a perfect model is one") {
  const MetricVector perfect{0, 1, 0, 0, 0};
  CHECK(uqs_score(perfect, default_weights()) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(uqs_score(perfect, WeightVector{{0.2, 0.2, 0.2, 0.2, 0.2}}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("default weights and leaderboard on the method means") {
  const WeightVector w = default_weights();
  CHECK(w == derive_weights(kPublishedRho, 0.01));
  const auto means = load_runs(kFixtures / "method_means.jsonl");
  const Leaderboard board = leaderboard(means, w);
  CHECK(ranking(board) == std::vector<std::string>{"GA", "RL", "SalUn", "FT"});
  for (const auto& row : board.rows) CHECK(row.score == doctest::Approx(hand_uqs(row.mean, w)).epsilon(1e-14));
  CHECK(std::abs(board.rows[0].score - 0.647) <= 0.002);
  CHECK(board.rows[0].rank == 1);
  CHECK(board.rows[3].rank == 4);

  // RL holds the best FA and RA; the three-way FA tie at 0.622 is not best.
  const auto& rl = board.rows[1];
  CHECK(rl.best[index(Metric::ra)]);
  CHECK(rl.best[index(Metric::fa)]);
  CHECK_FALSE(board.rows[0].best[index(Metric::fa)]);

  const std::string md = to_markdown(board);
  CHECK(md.find("| 1 | Gradient Ascent |") != std::string::npos);
  CHECK(md.find("**0.627**") != std::string::npos);
}

TEST_CASE("weight concentrated on RA reproduces the RA ranking") {
  const auto means = load_runs(kFixtures / "method_means.jsonl");
  const Leaderboard board = leaderboard(means, WeightVector{{0, 1, 0, 0, 0}});
  for (const auto& r : board.rows) CHECK(r.score == r.mean.ra);
  CHECK(ranking(board) == std::vector<std::string>{"RL", "GA", "SalUn", "FT"});
}

TEST_CASE("presets") {
  const WeightVector derived = default_weights();
  CHECK(recalibrate(Preset::parse("derived"), derived) == derived);
  CHECK(recalibrate(Preset::parse("privacy_first"), derived) == WeightVector{{0.5, 0, 0.5, 0, 0}});
  CHECK(recalibrate(Preset::parse("utility_first"), derived) == WeightVector{{0, 1, 0, 0, 0}});
  CHECK_THROWS_AS(Preset::parse("speed_first"), ValidationError);
  CHECK_THROWS_AS(recalibrate(Preset::parse("custom"), derived), ValidationError);
  Preset bad{PresetKind::custom, WeightVector{{0.5, 0.5, 0.5, 0, 0}}};
  CHECK_THROWS_AS(recalibrate(bad, derived), ValidationError);
  Preset good{PresetKind::custom, WeightVector{{0.1, 0.2, 0.3, 0.2, 0.2}}};
  CHECK(recalibrate(good, derived) == *good.custom);

  const auto means = load_runs(kFixtures / "method_means.jsonl");
  const auto utility = leaderboard(means, recalibrate(Preset::parse("utility_first"), derived));
  CHECK(ranking(utility) == std::vector<std::string>{"RL", "GA", "SalUn", "FT"});
  const auto privacy = leaderboard(means, recalibrate(Preset::parse("privacy_first"), derived));
  CHECK(privacy.rows[0].method.name == "GA");
  CHECK(privacy.rows[0].score == doctest::Approx(0.5 * (1 - 0.622) + 0.5 * (1 - 0.282)));
}

TEST_CASE("UQS is linear in the weights and monotone in each transform") {
  gen::Rng rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    const auto a = dirichlet_draws(2, 1.0, rng())[0];
    const auto b = dirichlet_draws(2, 1.0, rng())[1];
    const double lambda = u(rng);
    WeightVector mix;
    for (std::size_t k = 0; k < kMetricCount; ++k) mix.w[k] = lambda * a.w[k] + (1 - lambda) * b.w[k];
    const HibVector h{u(rng), u(rng), u(rng), u(rng), u(rng)};
    CHECK(uqs_score(h, mix) == doctest::Approx(lambda * uqs_score(h, a) + (1 - lambda) * uqs_score(h, b)));
    HibVector up = h;
    up.h_ra += 0.1;
    CHECK(uqs_score(up, a) >= uqs_score(h, a));
    CHECK(uqs_score(h, a) >= 0.0);
    CHECK(uqs_score(h, a) <= 1.0 + 1e-12);
  }
}

TEST_CASE("leaderboard ignores run order") {
  gen::Rng rng(5);
  auto runs = random_cohort(rng, 5, 3);
  const auto before = leaderboard(runs, default_weights());
  for (int i = 0; i < 20; ++i) {
    std::shuffle(runs.begin(), runs.end(), rng);
    const auto after = leaderboard(runs, default_weights());
    REQUIRE(after.rows.size() == before.rows.size());
    for (std::size_t k = 0; k < after.rows.size(); ++k) {
      CHECK(after.rows[k].method == before.rows[k].method);
      CHECK(after.rows[k].score == before.rows[k].score);
    }
  }
}

TEST_CASE("equal scores share a rank") {
  std::vector<ModelRun> runs{run("a", MethodKind::ga, {0.5, 0.5, 0.5, 10, 0.1}),
                             run("b", MethodKind::rl, {0.5, 0.5, 0.5, 10, 0.1}),
                             run("c", MethodKind::ft, {0.9, 0.1, 0.9, 90, 0.9})};
  const auto board = leaderboard(runs, default_weights());
  CHECK(board.rows[0].rank == 1);
  CHECK(board.rows[1].rank == 1);
  CHECK(board.rows[2].rank == 3);
}

TEST_CASE("Dirichlet draws") {
  const auto draws = dirichlet_draws(500, 1.0, 42);
  std::array<double, kMetricCount> mean{};
  for (const auto& w : draws) {
    CHECK_NOTHROW(validate(w));
    for (std::size_t k = 0; k < kMetricCount; ++k) mean[k] += w.w[k] / 500.0;
  }
  for (double m : mean) CHECK(std::abs(m - 0.2) < 0.03);
  CHECK(dirichlet_draws(500, 1.0, 42) == draws);
  CHECK(dirichlet_draws(500, 1.0, 43) != draws);
  // A prefix is stable when more trials are requested.
  const auto longer = dirichlet_draws(600, 1.0, 42);
  CHECK(std::equal(draws.begin(), draws.end(), longer.begin()));
  CHECK_THROWS_AS(dirichlet_draws(3, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(dirichlet_draws(3, -1.0, 1), ValidationError);
  for (const auto& w : dirichlet_draws(200, 0.05, 9)) CHECK_NOTHROW(validate(w));
}

TEST_CASE("stability with identical draws is perfect") {
  const auto means = load_runs(kFixtures / "method_means.jsonl");
  const WeightVector w = default_weights();
  const std::vector<WeightVector> same(10, w);
  const auto rep = stability_for_weights(means, w, same);
  CHECK(rep.mean_tau == 1.0);
  CHECK(rep.sd_tau == 0.0);
  CHECK(rep.baseline_ranking == std::vector<std::string>{"GA", "RL", "SalUn", "FT"});
}

TEST_CASE("a dominating method keeps two-method stability at one") {
  std::vector<ModelRun> runs{run("a", MethodKind::ga, {0.1, 0.9, 0.1, 5, 0.01}),
                             run("b", MethodKind::rl, {0.8, 0.2, 0.9, 150, 0.7})};
  StabilityOptions opt;
  opt.n_trials = 50;
  const auto rep = dirichlet_stability(runs, default_weights(), opt);
  CHECK(rep.mean_tau == 1.0);
  CHECK(rep.sd_tau == 0.0);
  CHECK(rep.taus.size() == 50);
}

TEST_CASE("stability is reproducible and thread-count invariant") {
  const auto runs = load_runs(kFixtures / "runs_per_dataset_seed42.jsonl");
  const WeightVector w = default_weights();
  StabilityOptions opt;
  const auto first = dirichlet_stability(runs, w, opt);
  CHECK(first.n_trials == 100);
  CHECK(first.seed == 42);
  CHECK(dirichlet_stability(runs, w, opt) == first);
  opt.unit = StabilityUnit::models;
  const int threads = kernels::max_threads();
  const auto models_one = [&] {
    kernels::set_threads(1);
    return dirichlet_stability(runs, w, opt);
  }();
  kernels::set_threads(4);
  const auto models_four = dirichlet_stability(runs, w, opt);
  kernels::set_threads(threads);
  CHECK(models_one == models_four);
  CHECK(models_one.baseline_ranking.size() == runs.size());
  for (double t : first.taus) {
    CHECK(t >= -1.0);
    CHECK(t <= 1.0);
  }
  const std::string md = to_markdown(first);
  CHECK(md.find("| Trials (N) | 100 |") != std::string::npos);
}

TEST_CASE("stability errors") {
  std::vector<ModelRun> one{run("a", MethodKind::ga, {0.1, 0.9, 0.1, 5, 0.01})};
  CHECK_THROWS_AS(dirichlet_stability(one, default_weights()), UndefinedError);
  std::vector<ModelRun> same{run("a", MethodKind::ga, {0.1, 0.9, 0.1, 5, 0.01}),
                             run("b", MethodKind::rl, {0.1, 0.9, 0.1, 5, 0.01})};
  CHECK_THROWS_WITH_AS(dirichlet_stability(same, default_weights()), doctest::Contains("undefined"), UndefinedError);
}

TEST_CASE("UI bundle round trip") {
  const auto runs = load_runs(kFixtures / "runs_per_dataset_seed42.jsonl");
  UiBundleInputs in;
  in.runs = runs;
  in.derived = default_weights();
  in.tau = tau_matrix(runs);
  in.stability = dirichlet_stability(runs, in.derived);
  const std::string text = ui_bundle_json(in);
  const UiBundleView v = read_ui_bundle(text);
  CHECK(v.schema_version == kUiSchemaVersion);
  CHECK(v.metrics == std::vector<std::string>{"FA", "RA", "MIA", "AD", "JS"});
  CHECK(v.methods == std::vector<std::string>{"GA", "RL", "SalUn", "FT"});
  CHECK(v.derived == in.derived);
  CHECK(v.presets == std::vector<std::string>{"derived", "privacy_first", "utility_first"});
  REQUIRE(v.tau);
  CHECK(v.tau->values.size() == 25);
  CHECK(v.tau->at(0, 1) == in.tau->at(0, 1));
  REQUIRE(v.stability_taus);
  CHECK(*v.stability_taus == in.stability->taus);

  // A client recomputing UQS from the exported transforms agrees with the server.
  for (std::size_t i = 0; i < v.methods.size(); ++i)
    CHECK(std::abs(uqs_score(v.hib[i], v.derived) - v.derived_scores[i]) < 1e-6);

  CHECK(ui_bundle_json(in) == text);

  auto doc = nlohmann::json::parse(text);
  CHECK(doc["reliability"].is_null());
  doc["schema_version"] = 2;
  CHECK_THROWS_WITH_AS(read_ui_bundle(doc.dump()), doctest::Contains("unsupported UI bundle schema_version 2"),
                       ValidationError);
  CHECK_THROWS_AS(read_ui_bundle("{not json"), ValidationError);
  doc["schema_version"] = 1;
  doc.erase("weights");
  CHECK_THROWS_WITH_AS(read_ui_bundle(doc.dump()), doctest::Contains("malformed"), ValidationError);

  const auto path = std::filesystem::temp_directory_path() / "unleval_bundle_test.json";
  export_ui_bundle(in, path);
  CHECK(read_text_file(path) == text);
  std::filesystem::remove(path);
}

TEST_CASE("weighted sum and Borda count can disagree") {
  // One method wins RA by a wide margin and loses every other metric narrowly.
  std::vector<ModelRun> runs{run("a", MethodKind::ga, {0.30, 0.95, 0.30, 30, 0.10}),
                             run("b", MethodKind::rl, {0.29, 0.50, 0.29, 29, 0.09}),
                             run("c", MethodKind::ft, {0.31, 0.45, 0.31, 31, 0.11})};
  const auto board = leaderboard(runs, default_weights());
  CHECK(board.rows[0].method.name == "GA");

  std::vector<std::vector<double>> cols(kMetricCount);
  for (const auto& r : runs)
    for (Metric m : kMetrics) cols[index(m)].push_back(to_hib(m, r.metrics.get(m)));
  const auto points = oracle::borda(cols);
  CHECK(points[1] > points[0]);
}
