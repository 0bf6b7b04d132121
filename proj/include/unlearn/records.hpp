#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unlearn/errors.hpp"

namespace unlearn {

// The five standard unlearning metrics, in the fixed order used by every
// weight vector and table in the toolkit.
enum class Metric : std::size_t { fa = 0, ra = 1, mia = 2, ad = 3, js = 4 };

inline constexpr std::size_t kMetricCount = 5;
inline constexpr std::array<Metric, kMetricCount> kMetrics = {Metric::fa, Metric::ra, Metric::mia,
                                                              Metric::ad, Metric::js};

std::string_view metric_name(Metric m);  // "FA", "RA", ...
Metric parse_metric(std::string_view name);

// RA is the only metric where a larger raw value is better.
constexpr bool lower_is_better(Metric m) { return m != Metric::ra; }

constexpr std::size_t index(Metric m) { return static_cast<std::size_t>(m); }

/// Raw metric values for one evaluated model, in their native direction.
struct MetricVector {
  double fa = 0.0;
  double ra = 0.0;
  double mia = 0.0;
  double ad = 0.0;  // raw L2 units, unbounded above
  double js = 0.0;

  double get(Metric m) const;
  std::array<double, kMetricCount> as_array() const { return {fa, ra, mia, ad, js}; }
  static MetricVector from_array(const std::array<double, kMetricCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
  }
  bool operator==(const MetricVector&) const = default;
};

void validate(const MetricVector& m);

enum class MethodKind { ga, rl, ft, salun, other };

/// Unlearning method. The four canonical methods get their own kind; anything
/// else is carried verbatim as `other`.
struct Method {
  MethodKind kind = MethodKind::other;
  std::string name;  // canonical short label ("GA", "RL", "FT", "SalUn") or the raw name

  static Method parse(std::string_view text);
  static Method of(MethodKind kind);
  std::string_view display_name() const;  // "Gradient Ascent", "Random Labels", ...

  bool operator==(const Method& o) const { return kind == o.kind && name == o.name; }
  std::strong_ordering operator<=>(const Method& o) const;
};

enum class Modality { multimodal, unimodal };
std::string_view to_string(Modality m);

struct ModelRun {
  std::string run_id;
  Method method;
  std::string dataset;
  std::int64_t seed = 0;
  Modality modality = Modality::multimodal;
  MetricVector metrics;
  std::optional<double> oracle_distance;

  bool operator==(const ModelRun&) const = default;
};

/// Five non-negative weights on the simplex, in (FA, RA, MIA, AD, JS) order.
struct WeightVector {
  std::array<double, kMetricCount> w{};

  double operator[](Metric m) const { return w[index(m)]; }
  bool operator==(const WeightVector&) const = default;
};

// Throws ValidationError unless every weight is finite, non-negative and the
// weights sum to one within 1e-9.
void validate(const WeightVector& w);
WeightVector make_weights(const std::array<double, kMetricCount>& w);

enum class Split { forget, retain };
std::string_view to_string(Split s);

struct SampleOutcome {
  std::string sample_id;
  Split split = Split::forget;
  std::string gold_answer;
  std::string prediction;
  double max_confidence = 0.0;
  double entropy = 0.0;
  double top2_margin = 0.0;
  std::optional<std::vector<double>> activation;
  std::optional<std::vector<double>> oracle_activation;
  std::optional<std::vector<double>> output_dist;
  std::optional<std::vector<double>> oracle_output_dist;

  bool operator==(const SampleOutcome&) const = default;
};

void validate(const SampleOutcome& s);
// Non-negative entries summing to one within 1e-6.
void validate_distribution(std::span<const double> p, std::string_view field);

struct TensorSlice {
  std::string tensor_name;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool operator==(const TensorSlice&) const = default;
};

struct ParameterSnapshot {
  std::string model_id;
  std::vector<float> values;
  std::vector<TensorSlice> layout;
};

// Layout must tile `values` contiguously in order.
void validate(const ParameterSnapshot& s);
bool comparable(const ParameterSnapshot& a, const ParameterSnapshot& b);

enum class ProbeType { rephrased, indirect, negation };
std::string_view to_string(ProbeType t);

struct ProbeOutcome {
  ProbeType probe_type = ProbeType::rephrased;
  bool revealed = false;
  bool operator==(const ProbeOutcome&) const = default;
};

struct ProbeRecord {
  std::string sample_id;
  std::string method;
  std::int64_t seed = 0;
  bool direct_suppressed = false;
  std::vector<ProbeOutcome> probes;
  bool operator==(const ProbeRecord&) const = default;
};

void validate(const ProbeRecord& r);

// Line-delimited JSON readers. Blank lines are skipped; every other line must
// be one object. Errors carry the 1-based line number and offending field.
std::vector<ModelRun> parse_runs(std::istream& in);
std::vector<SampleOutcome> parse_sample_outcomes(std::istream& in);
std::vector<ProbeRecord> parse_probe_records(std::istream& in);

std::vector<ModelRun> load_runs(const std::filesystem::path& path);
std::vector<SampleOutcome> load_sample_outcomes(const std::filesystem::path& path);
std::vector<ProbeRecord> load_probe_records(const std::filesystem::path& path);

// `bin` holds little-endian float32 values; `layout` is the JSON sidecar.
ParameterSnapshot load_snapshot(const std::filesystem::path& bin, const std::filesystem::path& layout);
// Resolves `<stem>.bin` and `<stem>.layout.json`.
ParameterSnapshot load_snapshot(const std::filesystem::path& stem);
void save_snapshot(const ParameterSnapshot& s, const std::filesystem::path& bin,
                   const std::filesystem::path& layout);

// Canonical single-line JSON forms (sorted keys, shortest round-trip numbers).
std::string to_json_line(const ModelRun& r);
std::string to_json_line(const SampleOutcome& s);
std::string to_json_line(const ProbeRecord& r);
void write_runs(std::ostream& out, std::span<const ModelRun> runs);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace unlearn
