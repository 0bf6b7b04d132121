#include "unlearn/uqs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "unlearn/kernels.hpp"
#include "unlearn/report.hpp"

namespace unlearn {

namespace {

using json = nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Ranking items: either per-method means or individual runs.
struct Items {
  std::vector<std::string> names;
  std::vector<double> hib_rows;  // n x 5, row-major
};

Items ranking_items(std::span<const ModelRun> runs, StabilityUnit unit) {
  Items items;
  auto push = [&](std::string name, const MetricVector& m) {
    items.names.push_back(std::move(name));
    for (double v : to_hib(m).as_array()) items.hib_rows.push_back(v);
  };
  if (unit == StabilityUnit::methods) {
    for (const auto& a : aggregate_by_method(runs)) push(a.method.name, a.mean);
  } else {
    for (const auto& r : runs) push(r.run_id, r.metrics);
  }
  if (items.names.size() < 2) throw UndefinedError("stability analysis needs at least 2 items to rank");
  return items;
}

json weights_json(const WeightVector& w) { return json(std::vector<double>(w.w.begin(), w.w.end())); }

json metric_object(const std::array<double, kMetricCount>& v) {
  json o = json::object();
  for (Metric m : kMetrics) o[std::string(metric_name(m))] = v[index(m)];
  return o;
}

}  // namespace

double uqs_score(const HibVector& h, const WeightVector& w) {
  const auto v = h.as_array();
  double s = 0.0;
  for (std::size_t i = 0; i < kMetricCount; ++i) s += w.w[i] * v[i];
  return s;
}

double uqs_score(const MetricVector& m, const WeightVector& w) { return uqs_score(to_hib(m), w); }

WeightVector default_weights() { return derive_weights(kPublishedRho, kDefaultEpsilon); }

Leaderboard leaderboard(std::span<const ModelRun> runs, const WeightVector& w) {
  validate(w);
  Leaderboard board;
  board.weights = w;
  for (const auto& a : aggregate_by_method(runs)) {
    LeaderboardRow row;
    row.method = a.method;
    row.mean = a.mean;
    row.hib = to_hib(a.mean);
    row.score = uqs_score(row.hib, w);
    row.n_runs = a.n_runs;
    board.rows.push_back(std::move(row));
  }
  std::ranges::stable_sort(board.rows, [](const auto& a, const auto& b) { return a.score > b.score; });
  for (auto& row : board.rows)
    row.rank = 1 + static_cast<int>(std::ranges::count_if(board.rows, [&](const auto& o) { return o.score > row.score; }));

  for (Metric m : kMetrics) {
    double best = board.rows.front().mean.get(m);
    for (const auto& r : board.rows)
      best = lower_is_better(m) ? std::min(best, r.mean.get(m)) : std::max(best, r.mean.get(m));
    for (auto& r : board.rows) r.best[index(m)] = r.mean.get(m) == best;
  }
  return board;
}

std::string to_markdown(const Leaderboard& board) {
  std::ostringstream os;
  os << "| Rank | Method | FA ↓ | RA ↑ | MIA ↓ | AD ↓ | JS ↓ | UQS ↑ |\n";
  os << "|---:|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : board.rows) {
    os << fmt::format("| {} | {} |", r.rank, r.method.display_name());
    for (Metric m : kMetrics) {
      std::string cell = m == Metric::ad ? fmt::format("{:.2f}", r.mean.get(m)) : fmt::format("{:.3f}", r.mean.get(m));
      if (r.best[index(m)]) cell = "**" + cell + "**";
      os << ' ' << cell << " |";
    }
    std::string score = fmt::format("{:.3f}", r.score);
    if (r.rank == 1) score = "**" + score + "**";
    os << ' ' << score << " |\n";
  }
  os << "\nweights (FA, RA, MIA, AD, JS) = (";
  for (std::size_t i = 0; i < kMetricCount; ++i) os << (i ? ", " : "") << fmt::format("{:.3f}", board.weights.w[i]);
  os << ")\n";
  return os.str();
}

Preset Preset::parse(std::string_view name) {
  if (name == "derived") return {PresetKind::derived, std::nullopt};
  if (name == "privacy_first") return {PresetKind::privacy_first, std::nullopt};
  if (name == "utility_first") return {PresetKind::utility_first, std::nullopt};
  if (name == "custom") return {PresetKind::custom, std::nullopt};
  throw ValidationError(fmt::format("unknown preset '{}' (derived|privacy_first|utility_first|custom)", name));
}

std::string_view to_string(PresetKind k) {
  switch (k) {
    case PresetKind::derived: return "derived";
    case PresetKind::privacy_first: return "privacy_first";
    case PresetKind::utility_first: return "utility_first";
    case PresetKind::custom: return "custom";
  }
  return "?";
}

WeightVector recalibrate(const Preset& preset, const WeightVector& derived) {
  switch (preset.kind) {
    case PresetKind::derived: validate(derived); return derived;
    case PresetKind::privacy_first: return WeightVector{{0.5, 0.0, 0.5, 0.0, 0.0}};
    case PresetKind::utility_first: return WeightVector{{0.0, 1.0, 0.0, 0.0, 0.0}};
    case PresetKind::custom:
      if (!preset.custom) throw ValidationError("custom preset requires a weight vector");
      validate(*preset.custom);
      return *preset.custom;
  }
  throw ValidationError("unknown preset");
}

std::vector<WeightVector> dirichlet_draws(std::size_t n, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw ValidationError(fmt::format("Dirichlet alpha must be positive and finite, got {}", alpha));
  std::vector<WeightVector> draws(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(n); ++t) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(t))));
    std::gamma_distribution<double> gamma(alpha, 1.0);
    WeightVector& w = draws[static_cast<std::size_t>(t)];
    double total = 0.0;
    while (total <= 0.0) {
      total = 0.0;
      for (auto& v : w.w) total += (v = gamma(rng));
    }
    for (auto& v : w.w) v /= total;
  }
  return draws;
}

StabilityReport stability_for_weights(std::span<const ModelRun> runs, const WeightVector& baseline,
                                      std::span<const WeightVector> draws, StabilityUnit unit) {
  validate(baseline);
  const Items items = ranking_items(runs, unit);
  const std::size_t n_items = items.names.size();

  std::vector<double> base_scores(n_items);
  kernels::parallel::weighted_scores(items.hib_rows, baseline.w, kMetricCount, base_scores);

  std::vector<double> flat;
  flat.reserve(draws.size() * kMetricCount);
  for (const auto& w : draws) flat.insert(flat.end(), w.w.begin(), w.w.end());
  std::vector<double> scores(draws.size() * n_items);
  kernels::parallel::weighted_scores(items.hib_rows, flat, kMetricCount, scores);

  StabilityReport rep;
  rep.n_trials = draws.size();
  rep.unit = unit;
  rep.taus.assign(draws.size(), 0.0);
  int undefined = 0;
#pragma omp parallel for schedule(static) reduction(+ : undefined)
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(draws.size()); ++t) {
    std::span<const double> trial(scores.data() + static_cast<std::size_t>(t) * n_items, n_items);
    try {
      rep.taus[static_cast<std::size_t>(t)] = kendall_tau(base_scores, trial);
    } catch (const UndefinedError&) {
      ++undefined;
    }
  }
  if (undefined > 0)
    throw UndefinedError(fmt::format("stability: tau undefined in {} trial(s) (constant scores)", undefined));

  std::vector<std::size_t> order(n_items);
  for (std::size_t i = 0; i < n_items; ++i) order[i] = i;
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return base_scores[a] > base_scores[b]; });
  for (auto i : order) rep.baseline_ranking.push_back(items.names[i]);

  if (!rep.taus.empty()) {
    rep.mean_tau = kernels::ordered_sum(rep.taus) / static_cast<double>(rep.taus.size());
    double ss = 0.0;
    for (double t : rep.taus) ss += (t - rep.mean_tau) * (t - rep.mean_tau);
    rep.sd_tau = rep.taus.size() > 1 ? std::sqrt(ss / static_cast<double>(rep.taus.size() - 1)) : 0.0;
  }
  return rep;
}

StabilityReport dirichlet_stability(std::span<const ModelRun> runs, const WeightVector& baseline,
                                    const StabilityOptions& opt) {
  const auto draws = dirichlet_draws(opt.n_trials, opt.alpha, opt.seed);
  StabilityReport rep = stability_for_weights(runs, baseline, draws, opt.unit);
  rep.alpha = opt.alpha;
  rep.seed = opt.seed;
  return rep;
}

std::string to_markdown(const StabilityReport& r) {
  std::ostringstream os;
  os << "| Metric | Value | Interpretation |\n|---|---:|---|\n";
  os << fmt::format("| Mean Kendall's tau | {:.3f} | Rank stability |\n", r.mean_tau);
  os << fmt::format("| Std Kendall's tau | {:.3f} | Variability |\n", r.sd_tau);
  os << fmt::format("| Trials (N) | {} | Dirichlet weights |\n", r.n_trials);
  os << fmt::format("\nalpha = {}, seed = {}, unit = {}, robust (mean tau > 0.5) = {}\nbaseline ranking: ", r.alpha,
                    r.seed, r.unit == StabilityUnit::methods ? "methods" : "models", r.mean_tau > 0.5 ? "yes" : "no");
  for (std::size_t i = 0; i < r.baseline_ranking.size(); ++i) os << (i ? " > " : "") << r.baseline_ranking[i];
  os << '\n';
  return os.str();
}

std::string ui_bundle_json(const UiBundleInputs& in) {
  validate(in.derived);
  const Leaderboard board = leaderboard(in.runs, in.derived);

  json doc;
  doc["schema_version"] = kUiSchemaVersion;
  doc["generator"] = fmt::format("unleval {}", kToolVersion);
  doc["metrics"] = json::array();
  doc["directions"] = json::array();
  for (Metric m : kMetrics) {
    doc["metrics"].push_back(metric_name(m));
    doc["directions"].push_back(lower_is_better(m) ? "lower" : "higher");
  }
  doc["methods"] = json::array();
  for (const auto& r : board.rows) {
    doc["methods"].push_back({{"name", r.method.name},
                              {"display_name", r.method.display_name()},
                              {"n_runs", r.n_runs},
                              {"mean", metric_object(r.mean.as_array())},
                              {"hib", metric_object(r.hib.as_array())},
                              {"uqs_derived", r.score},
                              {"rank_derived", r.rank}});
  }
  doc["weights"]["derived"] = weights_json(in.derived);
  json presets = json::object();
  for (PresetKind k : {PresetKind::derived, PresetKind::privacy_first, PresetKind::utility_first})
    presets[std::string(to_string(k))] = weights_json(recalibrate(Preset{k, std::nullopt}, in.derived));
  doc["weights"]["presets"] = presets;

  if (in.reliability) {
    const auto& r = *in.reliability;
    doc["reliability"] = {{"rho", metric_object(r.rho)},
                          {"p_value", metric_object(r.p_value)},
                          {"weights", weights_json(r.weights)},
                          {"n", r.n},
                          {"epsilon", r.epsilon},
                          {"mode", r.mode == ReliabilityMode::full_sample ? "full_sample" : "cv_averaged"}};
  } else {
    doc["reliability"] = nullptr;
  }

  if (in.tau) {
    json values = json::array();
    for (std::size_t i = 0; i < in.tau->size(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < in.tau->size(); ++j) {
        auto v = in.tau->at(i, j);
        row.push_back(v ? json(*v) : json(nullptr));
      }
      values.push_back(row);
    }
    doc["tau_matrix"] = {{"metrics", in.tau->metrics}, {"values", values}, {"n_models", in.tau->n_models}};
  } else {
    doc["tau_matrix"] = nullptr;
  }

  if (in.stability) {
    const auto& s = *in.stability;
    doc["stability"] = {{"n_trials", s.n_trials}, {"alpha", s.alpha},       {"seed", s.seed},
                        {"mean_tau", s.mean_tau}, {"sd_tau", s.sd_tau},     {"taus", s.taus},
                        {"baseline_ranking", s.baseline_ranking},
                        {"unit", s.unit == StabilityUnit::methods ? "methods" : "models"}};
  } else {
    doc["stability"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

void export_ui_bundle(const UiBundleInputs& in, const std::filesystem::path& path) {
  const std::string text = ui_bundle_json(in);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write UI bundle to '{}'", path.string()));
  out << text;
  if (!out) throw Error(fmt::format("write failure on '{}'", path.string()));
}

UiBundleView read_ui_bundle(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("UI bundle is not valid JSON: {}", e.what()));
  }
  UiBundleView v;
  try {
    v.schema_version = doc.at("schema_version").get<int>();
    if (v.schema_version != kUiSchemaVersion)
      throw ValidationError(fmt::format("unsupported UI bundle schema_version {} (expected {})", v.schema_version,
                                        kUiSchemaVersion));
    v.metrics = doc.at("metrics").get<std::vector<std::string>>();
    for (const auto& m : doc.at("methods")) {
      v.methods.push_back(m.at("name").get<std::string>());
      const auto& h = m.at("hib");
      v.hib.push_back({h.at("FA").get<double>(), h.at("RA").get<double>(), h.at("MIA").get<double>(),
                       h.at("AD").get<double>(), h.at("JS").get<double>()});
      v.derived_scores.push_back(m.at("uqs_derived").get<double>());
    }
    auto dw = doc.at("weights").at("derived").get<std::vector<double>>();
    if (dw.size() != kMetricCount) throw ValidationError("derived weights must have 5 entries");
    std::ranges::copy(dw, v.derived.w.begin());
    for (const auto& [name, _] : doc.at("weights").at("presets").items()) v.presets.push_back(name);
    if (const auto& t = doc.at("tau_matrix"); !t.is_null()) {
      TauMatrix m;
      m.metrics = t.at("metrics").get<std::vector<std::string>>();
      m.n_models = t.at("n_models").get<std::size_t>();
      for (const auto& row : t.at("values"))
        for (const auto& cell : row)
          m.values.push_back(cell.is_null() ? std::nullopt : std::optional<double>(cell.get<double>()));
      v.tau = std::move(m);
    }
    if (const auto& s = doc.at("stability"); !s.is_null()) v.stability_taus = s.at("taus").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed UI bundle: {}", e.what()));
  }
  return v;
}

}  // namespace unlearn
