#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/metrics.hpp"
#include "unlearn/ranks.hpp"
#include "unlearn/records.hpp"
#include "unlearn/reliability.hpp"

namespace unlearn {

// Unified Quality Score: weighted sum of the higher-is-better transforms.
double uqs_score(const HibVector& h, const WeightVector& w);
double uqs_score(const MetricVector& m, const WeightVector& w);

// Weights derived from the published reliability column with epsilon = 0.01;
// these round to (0.014, 0.656, 0.304, 0.014, 0.014).
WeightVector default_weights();

struct LeaderboardRow {
  Method method;
  MetricVector mean;
  HibVector hib;
  double score = 0.0;
  int rank = 0;  // 1 = best; equal scores share a rank
  std::size_t n_runs = 0;
  std::array<bool, kMetricCount> best{};  // best raw value in its column
};

struct Leaderboard {
  WeightVector weights;
  std::vector<LeaderboardRow> rows;  // ordered best first
};

// Per-method means over a balanced cohort, scored and ranked.
Leaderboard leaderboard(std::span<const ModelRun> runs, const WeightVector& w);

std::string to_markdown(const Leaderboard& board);

// ---------------------------------------------------------------------------
// Recalibration presets

enum class PresetKind { derived, privacy_first, utility_first, custom };

struct Preset {
  PresetKind kind = PresetKind::derived;
  std::optional<WeightVector> custom;

  // "derived", "privacy_first", "utility_first", or "custom"
  static Preset parse(std::string_view name);
};

std::string_view to_string(PresetKind k);

// derived -> `derived`; privacy_first -> (0.5, 0, 0.5, 0, 0);
// utility_first -> (0, 1, 0, 0, 0); custom -> the validated custom vector.
WeightVector recalibrate(const Preset& preset, const WeightVector& derived);

// ---------------------------------------------------------------------------
// Weight-perturbation stability

enum class StabilityUnit {
  methods,  // rank per-method means (default)
  models,   // rank every run individually
};

struct StabilityOptions {
  std::size_t n_trials = 100;
  double alpha = 1.0;
  std::uint64_t seed = 42;
  StabilityUnit unit = StabilityUnit::methods;
};

struct StabilityReport {
  std::size_t n_trials = 0;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  StabilityUnit unit = StabilityUnit::methods;
  double mean_tau = 0.0;
  double sd_tau = 0.0;  // sample standard deviation
  std::vector<double> taus;
  std::vector<std::string> baseline_ranking;  // best first

  bool operator==(const StabilityReport&) const = default;
};

// Trial t uses its own generator seeded from (seed, t), so draws do not depend
// on thread scheduling.
std::vector<WeightVector> dirichlet_draws(std::size_t n, double alpha, std::uint64_t seed);

// Kendall tau-b between the baseline ranking and the ranking under each draw.
StabilityReport stability_for_weights(std::span<const ModelRun> runs, const WeightVector& baseline,
                                      std::span<const WeightVector> draws, StabilityUnit unit = StabilityUnit::methods);

StabilityReport dirichlet_stability(std::span<const ModelRun> runs, const WeightVector& baseline,
                                    const StabilityOptions& opt = {});

std::string to_markdown(const StabilityReport& r);

// ---------------------------------------------------------------------------
// Leaderboard UI bundle

inline constexpr int kUiSchemaVersion = 1;

struct UiBundleInputs {
  std::vector<ModelRun> runs;
  WeightVector derived;
  std::optional<ReliabilityReport> reliability;
  std::optional<TauMatrix> tau;
  std::optional<StabilityReport> stability;
};

std::string ui_bundle_json(const UiBundleInputs& in);
void export_ui_bundle(const UiBundleInputs& in, const std::filesystem::path& path);

// Minimal reader used to check bundles: rejects any schema_version other than
// kUiSchemaVersion.
struct UiBundleView {
  int schema_version = 0;
  std::vector<std::string> methods;
  std::vector<std::string> metrics;
  std::vector<HibVector> hib;            // aligned with methods
  std::vector<double> derived_scores;    // aligned with methods
  WeightVector derived;
  std::vector<std::string> presets;
  std::optional<TauMatrix> tau;
  std::optional<std::vector<double>> stability_taus;
};

UiBundleView read_ui_bundle(std::string_view json_text);

}  // namespace unlearn
