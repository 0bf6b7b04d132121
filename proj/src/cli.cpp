#include "unlearn/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "unlearn/kr.hpp"
#include "unlearn/metrics.hpp"
#include "unlearn/ranks.hpp"
#include "unlearn/reliability.hpp"
#include "unlearn/report.hpp"
#include "unlearn/reproduce.hpp"
#include "unlearn/uqs.hpp"

namespace unlearn::cli {

namespace {

using json = nlohmann::json;

struct Common {
  std::string format = "text";
  std::string out_path;
  std::uint64_t seed = 42;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--format", c.format, "text | markdown | structured")
      ->check(CLI::IsMember({"text", "markdown", "structured", "json"}));
  sub->add_option("--out", c.out_path, "write the report to this file instead of stdout");
  sub->add_option("--seed", c.seed, "seed for every stochastic step (default 42)");
}

json metrics_json(const std::array<double, kMetricCount>& v) {
  json o = json::object();
  for (Metric m : kMetrics) o[std::string(metric_name(m))] = v[index(m)];
  return o;
}

json weights_json(const WeightVector& w) { return json(std::vector<double>(w.w.begin(), w.w.end())); }

json tau_json(const TauMatrix& m) {
  json values = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.size(); ++j) {
      auto v = m.at(i, j);
      row.push_back(v ? json(*v) : json(nullptr));
    }
    values.push_back(std::move(row));
  }
  return {{"metrics", m.metrics}, {"values", values}, {"n_models", m.n_models}};
}

json reliability_json(const ReliabilityReport& r) {
  json folds = json::array();
  for (const auto& row : r.fold_rho) {
    json f = json::object();
    for (Metric m : kMetrics) {
      auto v = row[index(m)];
      f[std::string(metric_name(m))] = v ? json(*v) : json(nullptr);
    }
    folds.push_back(f);
  }
  return {{"rho", metrics_json(r.rho)},
          {"p_value", metrics_json(r.p_value)},
          {"weights", weights_json(r.weights)},
          {"n", r.n},
          {"epsilon", r.epsilon},
          {"mode", r.mode == ReliabilityMode::full_sample ? "full_sample" : "cv_averaged"},
          {"folds", r.folds},
          {"fold_rho", folds}};
}

json leaderboard_json(const Leaderboard& b) {
  json rows = json::array();
  for (const auto& r : b.rows)
    rows.push_back({{"method", r.method.name},
                    {"rank", r.rank},
                    {"score", r.score},
                    {"n_runs", r.n_runs},
                    {"mean", metrics_json(r.mean.as_array())},
                    {"hib", metrics_json(r.hib.as_array())}});
  return {{"weights", weights_json(b.weights)}, {"rows", rows}};
}

json stability_json(const StabilityReport& s) {
  return {{"n_trials", s.n_trials},
          {"alpha", s.alpha},
          {"seed", s.seed},
          {"unit", s.unit == StabilityUnit::methods ? "methods" : "models"},
          {"mean_tau", s.mean_tau},
          {"sd_tau", s.sd_tau},
          {"taus", s.taus},
          {"baseline_ranking", s.baseline_ranking}};
}

json kr_json(const KrReport& r) {
  auto row = [](const KrRow& k) {
    return json{{"method", k.method},   {"seeds", k.seeds},         {"suppressed", k.suppressed},
                {"leaks", k.leaks},     {"leak_rate", k.leak_rate}, {"mean_kr", k.mean_kr}};
  };
  json methods = json::array();
  for (const auto& k : r.methods) methods.push_back(row(k));
  json probes = json::object();
  for (const auto& p : r.by_probe)
    probes[std::string(to_string(p.probe_type))] = {{"revealed", p.revealed}, {"total", p.total}, {"rate", p.rate()}};
  return {{"methods", methods},
          {"combined", row(r.combined)},
          {"probe_recovery", probes},
          {"mean_estimator", r.mean_estimator == KrEstimator::fraction ? "fraction" : "max_binary"}};
}

std::string text_matrix(const TauMatrix& m) {
  std::ostringstream os;
  os << fmt::format("{:>6}", "");
  for (const auto& name : m.metrics) os << fmt::format("{:>8}", name);
  os << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << fmt::format("{:>6}", m.metrics[i]);
    for (std::size_t j = 0; j < m.size(); ++j) {
      auto v = m.at(i, j);
      os << (i == j ? fmt::format("{:>8}", "-") : v ? fmt::format("{:>+8.3f}", *v) : fmt::format("{:>8}", "n/a"));
    }
    os << '\n';
  }
  return os.str();
}

std::array<double, kMetricCount> five_values(const std::vector<double>& v, std::string_view flag) {
  if (v.size() != kMetricCount)
    throw ValidationError(fmt::format("{} needs 5 comma-separated values (FA,RA,MIA,AD,JS), got {}", flag, v.size()));
  std::array<double, kMetricCount> a{};
  std::ranges::copy(v, a.begin());
  return a;
}

struct Emitter {
  const Common& common;
  std::ostream& out;

  OutputFormat format() const { return parse_output_format(common.format); }

  // body_text is used for text and markdown; body_json for structured output.
  void emit(const ReportHeader& h, const std::string& body_text, const json& body_json) const {
    std::string doc;
    if (format() == OutputFormat::structured) {
      json inputs = json::array();
      for (const auto& in : h.inputs) inputs.push_back({{"path", in.path}, {"fnv1a64", in.fnv1a64}});
      json params = json::object();
      for (const auto& [k, v] : h.params) params[k] = v;
      json header = {{"tool", "unleval"}, {"version", kToolVersion}, {"command", h.command}, {"inputs", inputs},
                     {"params", params}};
      header["seed"] = h.seed ? json(*h.seed) : json(nullptr);
      doc = json{{"header", header}, {"result", body_json}}.dump(2) + "\n";
    } else {
      doc = render_header(h, format()) + body_text;
    }
    if (common.out_path.empty()) {
      out << doc;
    } else {
      std::ofstream f(common.out_path, std::ios::binary);
      if (!f) throw Error(fmt::format("cannot write '{}'", common.out_path));
      f << doc;
    }
  }
};

ReportHeader header_for(std::string command, const Common& c, std::vector<std::string> inputs,
                        std::vector<std::pair<std::string, std::string>> params = {}) {
  ReportHeader h;
  h.command = std::move(command);
  h.seed = c.seed;
  for (const auto& p : inputs) h.inputs.push_back(digest_file(p));
  h.params = std::move(params);
  h.params.emplace_back("format", c.format);
  return h;
}

WeightVector baseline_weights(const std::string& preset, const std::vector<double>& custom) {
  Preset p = Preset::parse(preset);
  if (!custom.empty()) {
    if (p.kind != PresetKind::custom && preset != "derived")
      throw ValidationError("--weights conflicts with a named --preset; use --preset custom");
    p.kind = PresetKind::custom;
    p.custom = WeightVector{five_values(custom, "--weights")};
  }
  return recalibrate(p, default_weights());
}

std::string fmt_weights(const WeightVector& w) {
  std::string s;
  for (std::size_t i = 0; i < kMetricCount; ++i) s += fmt::format("{}{}", i ? "," : "", w.w[i]);
  return s;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal unlearning metric toolkit", "unleval"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common common;
  std::function<int()> action;
  const Emitter emit{common, out};

  // metrics -----------------------------------------------------------------
  auto* metrics = app.add_subcommand("metrics", "compute FA, RA, MIA, AD, JS from a sample dump");
  std::string m_input, m_snapshot, m_oracle, m_distance = "per_scalar", m_log = "bits";
  std::size_t m_cap = kDefaultSampleCap;
  int m_folds = 5;
  metrics->add_option("--input", m_input, "samples.jsonl")->required();
  metrics->add_option("--cap", m_cap, "samples per split (default 100)");
  metrics->add_option("--folds", m_folds, "MIA cross-validation folds (default 5)");
  metrics->add_option("--js-base", m_log, "bits | nats")->check(CLI::IsMember({"bits", "nats"}));
  metrics->add_option("--snapshot", m_snapshot, "unlearned parameter snapshot stem (<stem>.bin, <stem>.layout.json)");
  metrics->add_option("--oracle-snapshot", m_oracle, "oracle parameter snapshot stem");
  metrics->add_option("--distance", m_distance, "per_scalar | per_tensor")
      ->check(CLI::IsMember({"per_scalar", "per_tensor"}));
  add_common(metrics, common);
  metrics->callback([&] {
    action = [&] {
      const auto samples = load_sample_outcomes(m_input);
      std::vector<SampleOutcome> forget, retain;
      for (const auto& s : samples) (s.split == Split::forget ? forget : retain).push_back(s);
      MiaOptions mia;
      mia.folds = m_folds;
      mia.seed = common.seed;
      const LogBase base = m_log == "bits" ? LogBase::bits : LogBase::nats;
      MetricVector mv;
      mv.fa = substring_accuracy(samples, Split::forget, m_cap);
      mv.ra = substring_accuracy(samples, Split::retain, m_cap);
      if (forget.size() > m_cap) forget.resize(m_cap);
      if (retain.size() > m_cap) retain.resize(m_cap);
      mv.mia = mia_score(forget, retain, mia);
      const auto act = activation_pairs(samples, Split::forget, m_cap);
      if (act.empty()) throw ValidationError("AD needs forget samples with activation and oracle_activation");
      mv.ad = activation_distance(act);
      const auto dist = distribution_pairs(samples, Split::forget, m_cap);
      if (dist.empty()) throw ValidationError("JS needs forget samples with output_dist and oracle_output_dist");
      mv.js = js_divergence(dist, base);

      std::vector<std::string> inputs{m_input};
      std::optional<double> od;
      if (!m_snapshot.empty() || !m_oracle.empty()) {
        if (m_snapshot.empty() || m_oracle.empty())
          throw ValidationError("--snapshot and --oracle-snapshot must be given together");
        const auto a = load_snapshot(std::filesystem::path(m_snapshot));
        const auto b = load_snapshot(std::filesystem::path(m_oracle));
        od = oracle_distance(a, b, m_distance == "per_scalar" ? DistanceMode::per_scalar : DistanceMode::per_tensor);
        for (const auto& stem : {m_snapshot, m_oracle}) {
          inputs.push_back(stem + ".bin");
          inputs.push_back(stem + ".layout.json");
        }
      }
      std::ostringstream body;
      const bool md = emit.format() == OutputFormat::markdown;
      if (md) body << "| FA ↓ | RA ↑ | MIA ↓ | AD ↓ | JS ↓ |\n|---:|---:|---:|---:|---:|\n";
      body << fmt::format(fmt::runtime(md ? "| {:.3f} | {:.3f} | {:.3f} | {:.2f} | {:.3f} |\n"
                                          : "FA {:.4f}\nRA {:.4f}\nMIA {:.4f}\nAD {:.4f}\nJS {:.4f}\n"),
                          mv.fa, mv.ra, mv.mia, mv.ad, mv.js);
      if (od) body << fmt::format("{}oracle distance ({}) {:.6g}\n", md ? "\n" : "", m_distance, *od);
      json j = {{"metrics", metrics_json(mv.as_array())},
                {"forget_samples", forget.size()},
                {"retain_samples", retain.size()}};
      j["oracle_distance"] = od ? json(*od) : json(nullptr);
      emit.emit(header_for("metrics", common, inputs,
                           {{"cap", std::to_string(m_cap)}, {"folds", std::to_string(m_folds)}, {"js_base", m_log}}),
                body.str(), j);
      return kOk;
    };
  });

  // tau ---------------------------------------------------------------------
  auto* tau = app.add_subcommand("tau", "Kendall tau matrix, clusters, method ranks, modality gap");
  std::string t_input, t_orientation = "paper", t_variant = "b", t_group;
  std::vector<std::string> t_filters;
  std::string t_dataset;
  double t_threshold = kContradictionCutoff;
  tau->add_option("--input", t_input, "runs.jsonl")->required();
  tau->add_option("--orientation", t_orientation, "paper | hib")->check(CLI::IsMember({"paper", "hib"}));
  tau->add_option("--variant", t_variant, "b | a")->check(CLI::IsMember({"b", "a"}));
  tau->add_option("--filter", t_filters, "key=value cohort filter (dataset, method, seed, modality); repeatable");
  tau->add_option("--dataset", t_dataset, "shorthand for --filter dataset=X");
  tau->add_option("--group-by", t_group, "also report per-group mean tau: dataset | dataset_seed")
      ->check(CLI::IsMember({"dataset", "dataset_seed"}));
  tau->add_option("--cluster-threshold", t_threshold, "edge threshold for metric clusters (default 0.3)");
  add_common(tau, common);
  tau->callback([&] {
    action = [&] {
      const auto runs = load_runs(t_input);
      CohortFilter f;
      for (const auto& kv : t_filters) f.add(kv);
      if (!t_dataset.empty()) f.add("dataset=" + t_dataset);
      const Orientation o = t_orientation == "paper" ? Orientation::paper : Orientation::hib;
      const TauVariant v = t_variant == "b" ? TauVariant::b : TauVariant::a;
      const auto cohort = filter_runs(runs, f);
      const TauMatrix m = filtered_tau(runs, f, o, v);
      const ClusterReport c = cluster_report(m, t_threshold);
      const bool md = emit.format() == OutputFormat::markdown;

      std::ostringstream body;
      json j;
      body << fmt::format("tau-{} over {} runs ({} orientation)\n\n", t_variant, m.n_models, t_orientation);
      body << (md ? to_markdown(m) : text_matrix(m));
      j["tau_matrix"] = tau_json(m);
      std::optional<double> mean;
      try {
        mean = mean_pairwise_tau(m);
      } catch (const UndefinedError&) {
      }
      body << (mean ? fmt::format("\nmean pairwise tau {:.4f}\n", *mean) : "\nmean pairwise tau undefined\n");
      j["mean_pairwise_tau"] = mean ? json(*mean) : json(nullptr);

      body << fmt::format("clusters (tau > {}):", t_threshold);
      for (const auto& g : c.clusters) {
        body << " {";
        for (std::size_t i = 0; i < g.size(); ++i) body << (i ? ", " : "") << g[i];
        body << '}';
      }
      body << '\n';
      if (c.cross_min) body << fmt::format("cross-cluster tau in [{:+.3f}, {:+.3f}]\n", *c.cross_min, *c.cross_max);
      body << "contradiction pairs (|tau| < 0.3):";
      json pairs = json::array();
      for (const auto& [a, b] : c.contradiction_pairs) {
        body << ' ' << a << '-' << b;
        pairs.push_back({a, b});
      }
      body << '\n';
      j["clusters"] = {{"threshold", t_threshold}, {"groups", c.clusters}, {"contradiction_pairs", pairs}};
      j["clusters"]["cross_min"] = c.cross_min ? json(*c.cross_min) : json(nullptr);
      j["clusters"]["cross_max"] = c.cross_max ? json(*c.cross_max) : json(nullptr);

      try {
        const RankTable rt = method_rank_table(cohort);
        body << "\nmethod ranks (1 = best, ties averaged)\n" << to_markdown(rt);
        json rows = json::array();
        for (std::size_t i = 0; i < rt.methods.size(); ++i)
          rows.push_back({{"method", rt.methods[i].name}, {"ranks", metrics_json(rt.ranks[i])}});
        j["method_ranks"] = rows;
      } catch (const ValidationError& e) {
        body << "\nmethod ranks unavailable: " << e.what() << '\n';
        j["method_ranks"] = nullptr;
      }

      CohortFilter multi_f, uni_f;
      multi_f.modality = Modality::multimodal;
      uni_f.modality = Modality::unimodal;
      const auto multi = filter_runs(cohort, multi_f);
      const auto uni = filter_runs(cohort, uni_f);
      j["modality_gap"] = nullptr;
      if (multi.size() >= 2 && uni.size() >= 2) {
        try {
          const double mm = mean_pairwise_tau(tau_matrix(multi, o, v));
          const double um = mean_pairwise_tau(tau_matrix(uni, o, v));
          body << fmt::format("\nmodality: multimodal {:.4f}, unimodal {:.4f}, gap {:.4f}\n", mm, um, um - mm);
          j["modality_gap"] = {{"multimodal", mm}, {"unimodal", um}, {"gap", um - mm}};
        } catch (const UndefinedError& e) {
          body << "\nmodality gap undefined: " << e.what() << '\n';
        }
      }

      if (!t_group.empty()) {
        const GroupedTau g =
            grouped_mean_pairwise_tau(cohort, t_group == "dataset" ? GroupBy::dataset : GroupBy::dataset_seed, o, v);
        body << fmt::format("\ngrouped by {}: mean of group means {:.4f}\n", t_group, g.mean);
        for (const auto& [k, val] : g.per_group) body << fmt::format("  {} {:.4f}\n", k, val);
        for (const auto& k : g.skipped) body << fmt::format("  {} skipped\n", k);
        j["grouped"] = {{"by", t_group}, {"mean", g.mean}, {"per_group", g.per_group}, {"skipped", g.skipped}};
      }

      std::vector<std::pair<std::string, std::string>> params{{"orientation", t_orientation},
                                                              {"variant", t_variant}};
      for (const auto& kv : t_filters) params.emplace_back("filter", kv);
      if (!t_dataset.empty()) params.emplace_back("dataset", t_dataset);
      emit.emit(header_for("tau", common, {t_input}, params), body.str(), j);
      return kOk;
    };
  });

  // reliability ---------------------------------------------------------------
  auto* rel = app.add_subcommand("reliability", "Spearman reliability against oracle proximity and derived weights");
  std::string r_input, r_mode = "cv";
  int r_folds = 5;
  double r_epsilon = kDefaultEpsilon;
  bool r_stratify = false;
  rel->add_option("--input", r_input, "runs.jsonl with oracle_distance")->required();
  rel->add_option("--mode", r_mode, "cv | full_sample")->check(CLI::IsMember({"cv", "full_sample"}));
  rel->add_option("--folds", r_folds, "cross-validation folds (default 5; 1 = no hold-out)");
  rel->add_option("--epsilon", r_epsilon, "weight floor (default 0.01)");
  rel->add_flag("--stratify", r_stratify, "stratify folds by method");
  add_common(rel, common);
  rel->callback([&] {
    action = [&] {
      const auto runs = load_runs(r_input);
      ReliabilityReport r;
      if (r_mode == "full_sample") {
        r = full_sample_reliability(runs, r_epsilon);
      } else {
        CvOptions opt;
        opt.folds = r_folds;
        opt.epsilon = r_epsilon;
        opt.seed = common.seed;
        opt.stratify_by_method = r_stratify;
        r = cv_weights(runs, opt);
      }
      emit.emit(header_for("reliability", common, {r_input},
                           {{"mode", r_mode},
                            {"folds", std::to_string(r_folds)},
                            {"epsilon", fmt::format("{}", r_epsilon)},
                            {"stratify", r_stratify ? "true" : "false"}}),
                to_markdown(r), reliability_json(r));
      return kOk;
    };
  });

  // uqs -----------------------------------------------------------------------
  auto* uqs = app.add_subcommand("uqs", "UQS leaderboard under derived, preset or custom weights");
  std::string u_input, u_preset = "derived";
  std::vector<double> u_weights, u_rho, u_epsilons;
  double u_epsilon = kDefaultEpsilon;
  uqs->add_option("--input", u_input, "runs.jsonl")->required();
  uqs->add_option("--preset", u_preset, "derived | privacy_first | utility_first | custom")
      ->check(CLI::IsMember({"derived", "privacy_first", "utility_first", "custom"}));
  uqs->add_option("--weights", u_weights, "custom weights FA,RA,MIA,AD,JS (on the simplex)")->delimiter(',');
  uqs->add_option("--rho", u_rho, "derive weights from this reliability column instead of the default")
      ->delimiter(',');
  uqs->add_option("--epsilon", u_epsilon, "weight floor used with --rho (default 0.01)");
  uqs->add_option("--epsilons", u_epsilons, "also run an epsilon-sensitivity sweep, e.g. 0.001,0.01,0.1")
      ->delimiter(',');
  add_common(uqs, common);
  uqs->callback([&] {
    action = [&] {
      const auto runs = load_runs(u_input);
      const auto rho = u_rho.empty() ? kPublishedRho : five_values(u_rho, "--rho");
      const WeightVector derived = derive_weights(rho, u_epsilon);
      Preset p = Preset::parse(u_preset);
      if (!u_weights.empty()) {
        if (p.kind != PresetKind::custom && p.kind != PresetKind::derived)
          throw ValidationError("--weights conflicts with a named --preset; use --preset custom");
        p.kind = PresetKind::custom;
        p.custom = WeightVector{five_values(u_weights, "--weights")};
      }
      const WeightVector w = recalibrate(p, derived);
      const Leaderboard board = leaderboard(runs, w);
      std::string body = fmt::format("preset {}\n\n", to_string(p.kind)) + to_markdown(board);
      json j = leaderboard_json(board);
      j["preset"] = to_string(p.kind);
      if (!u_epsilons.empty()) {
        const auto sens = epsilon_sensitivity(runs, rho, u_epsilons);
        body += "\nepsilon sensitivity\n";
        json rows = json::array();
        for (const auto& row : sens.rows) {
          std::string order;
          for (std::size_t i = 0; i < row.ranking.size(); ++i)
            order += fmt::format("{}{} {:.4f}", i ? " > " : "", row.ranking[i].name, row.scores[i]);
          body += fmt::format("  eps {}: {}\n", row.epsilon, order);
          std::vector<std::string> names;
          for (const auto& m : row.ranking) names.push_back(m.name);
          rows.push_back({{"epsilon", row.epsilon}, {"weights", weights_json(row.weights)}, {"ranking", names},
                          {"scores", row.scores}});
        }
        body += sens.rankings_identical ? "  rankings identical\n" : "  rankings differ\n";
        j["epsilon_sensitivity"] = {{"rows", rows}, {"rankings_identical", sens.rankings_identical}};
      }
      emit.emit(header_for("uqs", common, {u_input}, {{"preset", u_preset}, {"weights", fmt_weights(w)}}), body, j);
      return kOk;
    };
  });

  // stability -----------------------------------------------------------------
  auto* stab = app.add_subcommand("stability", "ranking stability under Dirichlet-sampled weights");
  std::string s_input, s_preset = "derived", s_unit = "methods";
  std::vector<double> s_weights;
  std::size_t s_trials = 100;
  double s_alpha = 1.0;
  stab->add_option("--input", s_input, "runs.jsonl")->required();
  stab->add_option("--trials", s_trials, "number of weight draws (default 100)");
  stab->add_option("--alpha", s_alpha, "symmetric Dirichlet concentration (default 1)");
  stab->add_option("--unit", s_unit, "methods | models")->check(CLI::IsMember({"methods", "models"}));
  stab->add_option("--preset", s_preset, "baseline weights preset (default derived)")
      ->check(CLI::IsMember({"derived", "privacy_first", "utility_first", "custom"}));
  stab->add_option("--weights", s_weights, "custom baseline weights FA,RA,MIA,AD,JS")->delimiter(',');
  add_common(stab, common);
  stab->callback([&] {
    action = [&] {
      const auto runs = load_runs(s_input);
      StabilityOptions opt;
      opt.n_trials = s_trials;
      opt.alpha = s_alpha;
      opt.seed = common.seed;
      opt.unit = s_unit == "methods" ? StabilityUnit::methods : StabilityUnit::models;
      const WeightVector base = baseline_weights(s_preset, s_weights);
      const StabilityReport r = dirichlet_stability(runs, base, opt);
      emit.emit(header_for("stability", common, {s_input},
                           {{"trials", std::to_string(s_trials)},
                            {"alpha", fmt::format("{}", s_alpha)},
                            {"unit", s_unit},
                            {"baseline", fmt_weights(base)}}),
                to_markdown(r), stability_json(r));
      return kOk;
    };
  });

  // kr ------------------------------------------------------------------------
  auto* kr = app.add_subcommand("kr", "knowledge-recoverability probe report");
  std::string k_input, k_estimator = "fraction";
  kr->add_option("--input", k_input, "probes.jsonl")->required();
  kr->add_option("--estimator", k_estimator, "estimator for the mean KR column: fraction | max_binary")
      ->check(CLI::IsMember({"fraction", "max_binary"}));
  add_common(kr, common);
  kr->callback([&] {
    action = [&] {
      const auto records = load_probe_records(k_input);
      const KrReport r = kr_report(records, parse_kr_estimator(k_estimator));
      emit.emit(header_for("kr", common, {k_input}, {{"estimator", k_estimator}}), to_markdown(r), kr_json(r));
      return kOk;
    };
  });

  // export-ui -----------------------------------------------------------------
  auto* ui = app.add_subcommand("export-ui", "write the leaderboard UI bundle");
  std::string e_input, e_reliability, e_tau_input;
  std::size_t e_trials = 100;
  double e_alpha = 1.0;
  bool e_no_stability = false;
  ui->add_option("--input", e_input, "runs.jsonl scored on the leaderboard")->required();
  ui->add_option("--reliability-input", e_reliability, "runs.jsonl with oracle_distance for the reliability section");
  ui->add_option("--tau-input", e_tau_input, "runs.jsonl for the tau heatmap (default: --input)");
  ui->add_option("--trials", e_trials, "stability trials (default 100)");
  ui->add_option("--alpha", e_alpha, "stability Dirichlet concentration (default 1)");
  ui->add_flag("--no-stability", e_no_stability, "omit the stability section");
  ui->add_option("--format", common.format, "summary format")->check(CLI::IsMember({"text", "markdown", "structured"}));
  ui->add_option("--out", common.out_path, "bundle path")->required();
  ui->add_option("--seed", common.seed, "stability seed (default 42)");
  ui->callback([&] {
    action = [&] {
      UiBundleInputs in;
      in.runs = load_runs(e_input);
      in.derived = default_weights();
      std::vector<std::string> inputs{e_input};
      if (!e_reliability.empty()) {
        in.reliability = full_sample_reliability(load_runs(e_reliability));
        inputs.push_back(e_reliability);
      }
      const std::string tau_path = e_tau_input.empty() ? e_input : e_tau_input;
      if (!e_tau_input.empty()) inputs.push_back(e_tau_input);
      in.tau = tau_matrix(load_runs(tau_path));
      if (!e_no_stability) {
        StabilityOptions opt;
        opt.n_trials = e_trials;
        opt.alpha = e_alpha;
        opt.seed = common.seed;
        in.stability = dirichlet_stability(in.runs, in.derived, opt);
      }
      export_ui_bundle(in, common.out_path);
      const ReportHeader h = header_for("export-ui", common, inputs,
                                        {{"trials", std::to_string(e_trials)}, {"alpha", fmt::format("{}", e_alpha)}});
      const std::string digest = digest_file(common.out_path).fnv1a64;
      const OutputFormat f = parse_output_format(common.format);
      if (f == OutputFormat::structured) {
        out << json{{"bundle", common.out_path}, {"fnv1a64", digest}, {"schema_version", kUiSchemaVersion}}.dump(2)
            << '\n';
      } else {
        out << render_header(h, f)
            << fmt::format("wrote {} (schema_version {}, fnv1a64:{})\n", common.out_path, kUiSchemaVersion, digest);
      }
      return kOk;
    };
  });

  // reproduce-paper -------------------------------------------------------------
  auto* rep = app.add_subcommand("reproduce-paper", "recompute every published number from bundled fixtures");
  std::string p_fixtures = UNLEARN_FIXTURE_DIR;
  rep->add_option("--fixtures", p_fixtures, "fixture directory");
  add_common(rep, common);
  rep->callback([&] {
    action = [&] {
      const auto checks = reproduce_paper(p_fixtures, common.seed);
      const std::filesystem::path dir(p_fixtures);
      std::vector<std::string> inputs;
      for (const char* name : {"published.json", "runs_per_dataset_seed42.jsonl", "method_means.jsonl",
                               "blip2_mmubench.jsonl", "probes_kr_pilot.jsonl"})
        inputs.push_back((dir / name).string());
      json arr = json::array();
      for (const auto& c : checks)
        arr.push_back({{"name", c.name}, {"pass", c.pass}, {"gating", c.gating}, {"detail", c.detail}});
      const bool ok = all_gating_pass(checks);
      emit.emit(header_for("reproduce-paper", common, inputs), to_text(checks), json{{"checks", arr}, {"pass", ok}});
      return ok ? kOk : kReproduceMismatch;
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << "unleval " << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  }

  try {
    return action ? action() : kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidationFailure;
  }
}

}  // namespace unlearn::cli
