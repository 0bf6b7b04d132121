#include "unlearn/reproduce.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "unlearn/kr.hpp"
#include "unlearn/ranks.hpp"
#include "unlearn/reliability.hpp"
#include "unlearn/uqs.hpp"

namespace unlearn {

namespace {

using json = nlohmann::json;

std::array<double, kMetricCount> five(const json& j) {
  auto v = j.get<std::vector<double>>();
  if (v.size() != kMetricCount) throw ValidationError("published.json: expected 5 values");
  std::array<double, kMetricCount> out{};
  std::ranges::copy(v, out.begin());
  return out;
}

std::string join(const std::array<double, kMetricCount>& v, int digits) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += fmt::format("{}{:.{}f}", i ? ", " : "", v[i], digits);
  return s;
}

Check weights_check(const json& pub) {
  const auto expected = five(pub.at("weights"));
  const auto rho = five(pub.at("reliability").at("rho"));
  const auto w = derive_weights(rho, kDefaultEpsilon);
  bool ok = true;
  for (std::size_t i = 0; i < kMetricCount; ++i) ok &= std::abs(w.w[i] - expected[i]) <= 0.001;
  return {"reliability weights (eps 0.01)", ok, true,
          fmt::format("computed ({}) vs published ({}), tol 0.001", join(w.w, 4), join(expected, 3))};
}

Check p_value_check(const json& pub) {
  const auto& rel = pub.at("reliability");
  const auto rho = five(rel.at("rho"));
  const auto expected = five(rel.at("p_value"));
  const auto n = rel.at("n").get<std::size_t>();
  std::array<double, kMetricCount> p{};
  bool ok = true;
  std::string misses;
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    p[i] = spearman_p_value(rho[i], n);
    if (std::abs(p[i] - expected[i]) > 0.0005) {
      ok = false;
      misses += fmt::format(" {} off by {:.4f};", metric_name(kMetrics[i]), p[i] - expected[i]);
    }
  }
  return {"spearman p-values (n = 36)", ok, true,
          fmt::format("computed ({}) vs published ({}), tol 0.0005.{}", join(p, 4), join(expected, 3), misses)};
}

Check leaderboard_check(const json& pub, std::span<const ModelRun> means) {
  const auto& lb = pub.at("leaderboard");
  const auto expected_rank = lb.at("ranking").get<std::vector<std::string>>();
  const Leaderboard board = leaderboard(means, default_weights());
  std::vector<std::string> ranking;
  bool scores_ok = true;
  double offset = 0.0;
  std::string detail;
  for (const auto& r : board.rows) {
    ranking.push_back(r.method.name);
    const double published = lb.at("uqs").at(r.method.name).get<double>();
    scores_ok &= std::abs(r.score - published) <= 0.015;
    offset += r.score - published;
    detail += fmt::format("{} {:.4f} ({:.3f}); ", r.method.name, r.score, published);
  }
  offset /= static_cast<double>(board.rows.size());
  const bool rank_ok = ranking == expected_rank;
  return {"UQS leaderboard", rank_ok && scores_ok, true,
          fmt::format("{}ranking {}; scores tol 0.015; mean offset {:+.4f}", detail, rank_ok ? "matches" : "differs",
                      offset)};
}

Check aggregation_check(std::span<const ModelRun> per_dataset, std::span<const ModelRun> means) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : per_dataset)
    if (r.method.kind == MethodKind::ga) sum += r.metrics.fa, ++n;
  const auto it = std::ranges::find_if(means, [](const ModelRun& r) { return r.method.kind == MethodKind::ga; });
  if (n == 0 || it == means.end()) throw ValidationError("aggregation check: GA rows missing from fixtures");
  const double mean = sum / n;
  return {"per-dataset GA FA mean", std::abs(mean - it->metrics.fa) <= 0.001, true,
          fmt::format("mean of {} seed-42 values = {:.4f} vs leaderboard {:.3f}, tol 0.001", n, mean, it->metrics.fa)};
}

Check blip2_check(const json& pub, std::span<const ModelRun> blip2) {
  const TauMatrix m = tau_matrix(blip2, Orientation::hib);
  const auto tau = m.at(index(Metric::ra), index(Metric::ad));
  const double expected = pub.at("blip2_tau_ra_ad").get<double>();
  return {"BLIP-2 RA/AD rank reversal", tau && *tau == expected, true,
          fmt::format("tau(RA, AD) over induced rankings = {} vs published {}", tau ? fmt::format("{}", *tau) : "undefined",
                      expected)};
}

Check kr_check(const json& pub, std::span<const ProbeRecord> probes) {
  const auto& k = pub.at("kr_pilot");
  const KrReport rep = kr_report(probes);
  bool ok = true;
  std::string detail;
  auto cmp = [&](const KrRow& row, const json& want) {
    ok &= row.suppressed == want.at("suppressed").get<std::size_t>();
    ok &= row.leaks == want.at("leaks").get<std::size_t>();
    ok &= std::abs(row.mean_kr - want.at("mean_kr").get<double>()) <= 0.02;
    detail += fmt::format("{} {}/{} mean {:.3f}; ", row.method, row.leaks, row.suppressed, row.mean_kr);
  };
  for (const auto& row : rep.methods) {
    if (!k.contains(row.method)) {
      ok = false;
      continue;
    }
    cmp(row, k.at(row.method));
  }
  cmp(rep.combined, k.at("Combined"));
  const double neg = rep.by_probe[static_cast<std::size_t>(ProbeType::negation)].rate();
  ok &= neg == k.at("negation_recovery").get<double>();
  detail += fmt::format("negation recovery {:.3f}; mean KR tol 0.02", neg);
  return {"KR pilot", ok, true, detail};
}

Check stability_check(const json& pub, std::span<const ModelRun> means, std::uint64_t seed) {
  const auto& s = pub.at("stability");
  StabilityOptions opt;
  opt.n_trials = s.at("n_trials").get<std::size_t>();
  opt.seed = seed;
  const StabilityReport a = dirichlet_stability(means, default_weights(), opt);
  const StabilityReport b = dirichlet_stability(means, default_weights(), opt);
  const bool same = a == b;
  return {"Dirichlet stability threshold", a.mean_tau > 0.5 && same, true,
          fmt::format("mean tau {:.3f} (sd {:.3f}, N {}, alpha 1, seed {}) vs threshold 0.5; published {:.3f} +/- {:.3f}; "
                      "repeat run {}",
                      a.mean_tau, a.sd_tau, a.n_trials, seed, s.at("mean_tau").get<double>(),
                      s.at("sd_tau").get<double>(), same ? "bit-identical" : "DIFFERS")};
}

Check rank_table_check(const json& pub, std::span<const ModelRun> means) {
  const RankTable t = method_rank_table(means);
  std::map<Method, std::array<int, kMetricCount>> published;
  for (const auto& [name, ranks] : pub.at("method_ranks").items()) {
    if (name == "uqs") continue;
    auto v = ranks.get<std::vector<int>>();
    std::array<int, kMetricCount> a{};
    std::ranges::copy(v, a.begin());
    published[Method::parse(name)] = a;
  }
  const auto diffs = compare_ranks(t, published);
  bool ok = std::ranges::all_of(diffs, [](const RankDiscrepancy& d) { return d.tied; });
  std::string detail = diffs.empty() ? "all cells match" : "";
  for (const auto& d : diffs)
    detail += fmt::format("{} {}: computed {} vs published {}{}; ", d.method.name, metric_name(d.metric), d.computed,
                          d.published, d.tied ? " (tie, flagged)" : "");
  return {"method rank table", ok, false, detail};
}

Check cluster_check(const json& pub) {
  const auto& t = pub.at("tau_matrix");
  const auto upper = t.at("upper").get<std::vector<double>>();
  const TauMatrix m = make_tau_matrix(t.at("metrics").get<std::vector<std::string>>(), upper,
                                      t.at("n_models").get<std::size_t>());
  const ClusterReport c = cluster_report(m);
  std::string clusters;
  for (const auto& group : c.clusters) {
    clusters += "{";
    for (std::size_t i = 0; i < group.size(); ++i) clusters += (i ? ", " : "") + group[i];
    clusters += "} ";
  }
  const bool ok = c.clusters.size() == 2 && c.clusters[0] == std::vector<std::string>{"FA", "RA", "MIA"} &&
                  c.clusters[1] == std::vector<std::string>{"AD", "JS"};
  return {"metric clusters (tau > 0.3)", ok, false,
          fmt::format("{}; {} contradiction pairs", clusters, c.contradiction_pairs.size())};
}

Check mean_tau_check(const json& pub) {
  const auto& t = pub.at("tau_matrix");
  const TauMatrix m = make_tau_matrix(t.at("metrics").get<std::vector<std::string>>(),
                                      t.at("upper").get<std::vector<double>>());
  const double mean = mean_pairwise_tau(m);
  const double published = pub.at("modality_tau").at("multimodal").get<double>();
  return {"mean pairwise tau of averaged matrix", std::abs(mean - 0.178) <= 0.0005, false,
          fmt::format("{:.4f} (published multimodal mean {:.3f} uses an unstated aggregation)", mean, published)};
}

Check modality_gap_check(const json& pub) {
  const auto& t = pub.at("modality_tau");
  const double gap = t.at("unimodal").get<double>() - t.at("multimodal").get<double>();
  return {"modality gap arithmetic", std::abs(gap - t.at("delta").get<double>()) <= 1e-9, false,
          fmt::format("{:.3f} - {:.3f} = {:.3f}", t.at("unimodal").get<double>(), t.at("multimodal").get<double>(), gap)};
}

Check epsilon_check(const json& pub, std::span<const ModelRun> means) {
  const auto eps = pub.at("epsilons").get<std::vector<double>>();
  const auto sens = epsilon_sensitivity(means, five(pub.at("reliability").at("rho")), eps);
  std::string detail;
  for (const auto& row : sens.rows) {
    detail += fmt::format("eps {}: ", row.epsilon);
    for (std::size_t i = 0; i < row.ranking.size(); ++i) detail += (i ? ">" : "") + row.ranking[i].name;
    detail += "; ";
  }
  detail += sens.rankings_identical ? "rankings identical" : "rankings differ";
  return {"epsilon sensitivity", sens.rankings_identical, false, detail};
}

}  // namespace

std::vector<Check> reproduce_paper(const std::filesystem::path& dir, std::uint64_t seed) {
  json pub;
  try {
    pub = json::parse(read_text_file(dir / "published.json"));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("published.json: {}", e.what()));
  }
  const auto per_dataset = load_runs(dir / "runs_per_dataset_seed42.jsonl");
  const auto means = load_runs(dir / "method_means.jsonl");
  const auto blip2 = load_runs(dir / "blip2_mmubench.jsonl");
  const auto probes = load_probe_records(dir / "probes_kr_pilot.jsonl");

  std::vector<Check> checks;
  try {
    checks.push_back(weights_check(pub));
    checks.push_back(p_value_check(pub));
    checks.push_back(leaderboard_check(pub, means));
    checks.push_back(aggregation_check(per_dataset, means));
    checks.push_back(blip2_check(pub, blip2));
    checks.push_back(kr_check(pub, probes));
    checks.push_back(stability_check(pub, means, seed));
    checks.push_back(rank_table_check(pub, means));
    checks.push_back(cluster_check(pub));
    checks.push_back(mean_tau_check(pub));
    checks.push_back(modality_gap_check(pub));
    checks.push_back(epsilon_check(pub, means));
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("published.json: {}", e.what()));
  }
  return checks;
}

bool all_gating_pass(const std::vector<Check>& checks) {
  return std::ranges::all_of(checks, [](const Check& c) { return c.pass || !c.gating; });
}

std::string to_text(const std::vector<Check>& checks) {
  std::ostringstream os;
  for (const auto& c : checks) {
    const std::string_view tag = c.gating ? (c.pass ? "PASS" : "FAIL") : (c.pass ? "INFO" : "NOTE");
    os << fmt::format("[{}] {}: {}\n", tag, c.name, c.detail);
  }
  const auto failed = std::ranges::count_if(checks, [](const Check& c) { return c.gating && !c.pass; });
  os << fmt::format("{} gating check(s) failed\n", failed);
  return os.str();
}

}  // namespace unlearn
