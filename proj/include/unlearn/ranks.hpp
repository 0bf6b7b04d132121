#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unlearn/records.hpp"

namespace unlearn {

enum class TauVariant { b, a };

// Kendall rank correlation. The default tau-b corrects for ties on both sides
// and is undefined (UndefinedError) when either sequence is constant. tau-a
// divides by all pairs and is undefined only when both are constant.
// O(n log n).
double kendall_tau(std::span<const double> x, std::span<const double> y, TauVariant variant = TauVariant::b);

// 1-based ascending ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v);

// Which raw direction the metric columns are ranked in.
enum class Orientation {
  paper,  // raw values as reported (FA, MIA, AD, JS lower-is-better; RA higher)
  hib,    // higher-is-better transforms
};

struct TauMatrix {
  std::vector<std::string> metrics;
  std::vector<std::optional<double>> values;  // row-major; diagonal and undefined pairs are empty
  std::size_t n_models = 0;

  std::size_t size() const { return metrics.size(); }
  std::optional<double> at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
  void set(std::size_t i, std::size_t j, std::optional<double> v);
  std::size_t index_of(std::string_view metric) const;
};

// Builds a symmetric matrix from upper-triangle entries in row order
// ((0,1), (0,2), ..., (n-2,n-1)).
TauMatrix make_tau_matrix(std::vector<std::string> metrics, std::span<const double> upper, std::size_t n_models = 0);

TauMatrix tau_matrix(std::span<const ModelRun> runs, Orientation orientation = Orientation::paper,
                     TauVariant variant = TauVariant::b);

// Mean of the defined upper-triangle entries.
double mean_pairwise_tau(const TauMatrix& m);

// mean_pairwise_tau(unimodal) - mean_pairwise_tau(multimodal)
double modality_gap(const TauMatrix& multimodal, const TauMatrix& unimodal);

enum class GroupBy { dataset, dataset_seed };

struct GroupedTau {
  double mean = 0.0;                         // mean over groups of each group's mean pairwise tau
  std::map<std::string, double> per_group;   // groups that produced a defined mean
  std::vector<std::string> skipped;          // groups with < 2 runs or no defined pair
};

// Alternative aggregation: one tau matrix per group, then average the groups'
// mean pairwise tau.
GroupedTau grouped_mean_pairwise_tau(std::span<const ModelRun> runs, GroupBy by,
                                     Orientation orientation = Orientation::paper,
                                     TauVariant variant = TauVariant::b);

// Per-method mean metrics over a balanced cohort. Throws ValidationError
// listing missing (dataset, seed) cells when some method lacks a cell.
struct MethodAggregate {
  Method method;
  MetricVector mean;
  std::size_t n_runs = 0;
};
std::vector<MethodAggregate> aggregate_by_method(std::span<const ModelRun> runs);

struct RankTable {
  std::vector<Method> methods;
  std::vector<MetricVector> means;
  std::vector<std::array<double, kMetricCount>> ranks;  // 1 = best, ties averaged

  double rank(std::size_t method_row, Metric m) const { return ranks[method_row][index(m)]; }
};

RankTable method_rank_table(std::span<const ModelRun> runs);

struct RankDiscrepancy {
  Method method;
  Metric metric;
  double computed = 0.0;
  int published = 0;
  bool tied = false;  // computed rank is shared with another method
};

// Cells where the computed (average) rank differs from a published integer rank.
std::vector<RankDiscrepancy> compare_ranks(const RankTable& table,
                                           const std::map<Method, std::array<int, kMetricCount>>& published);

struct ClusterReport {
  double threshold = 0.0;
  std::vector<std::vector<std::string>> clusters;
  std::optional<double> cross_min;  // extrema of tau between metrics in different clusters
  std::optional<double> cross_max;
  std::vector<std::pair<std::string, std::string>> contradiction_pairs;  // |tau| < 0.3
};

inline constexpr double kContradictionCutoff = 0.3;

// Connected components of the graph with an edge wherever tau > threshold.
ClusterReport cluster_report(const TauMatrix& m, double threshold = kContradictionCutoff);

struct CohortFilter {
  std::optional<std::string> dataset;
  std::optional<Method> method;
  std::optional<std::int64_t> seed;
  std::optional<Modality> modality;

  bool matches(const ModelRun& r) const;
  // Accepts "dataset=X", "method=X", "seed=N", "modality=X".
  void add(std::string_view key_value);
};

std::vector<ModelRun> filter_runs(std::span<const ModelRun> runs, const CohortFilter& f);

// tau_matrix over the filtered cohort; UndefinedError "empty cohort" when
// nothing matches.
TauMatrix filtered_tau(std::span<const ModelRun> runs, const CohortFilter& f,
                       Orientation orientation = Orientation::paper, TauVariant variant = TauVariant::b);

std::string to_markdown(const TauMatrix& m);
std::string to_markdown(const RankTable& t);

}  // namespace unlearn
