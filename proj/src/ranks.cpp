#include "unlearn/ranks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "unlearn/metrics.hpp"

namespace unlearn {

namespace {

// Number of tied pairs among runs of equal values in an already-sorted range.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq&& equal) {
  std::int64_t pairs = 0, run = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (equal(i - 1, i)) {
      ++run;
    } else {
      pairs += run * (run - 1) / 2;
      run = 1;
    }
  }
  return pairs + run * (run - 1) / 2;
}

// Merge sort of `idx` by y, counting swaps (discordant pairs).
std::int64_t merge_count(std::vector<std::size_t>& idx, std::vector<std::size_t>& buf, std::span<const double> y,
                         std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(idx, buf, y, lo, mid) + merge_count(idx, buf, y, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (y[idx[j]] < y[idx[i]]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = idx[j++];
    } else {
      buf[k++] = idx[i++];
    }
  }
  while (i < mid) buf[k++] = idx[i++];
  while (j < hi) buf[k++] = idx[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            idx.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

std::vector<double> oriented_column(std::span<const ModelRun> runs, Metric m, Orientation o) {
  std::vector<double> col;
  col.reserve(runs.size());
  for (const auto& r : runs) {
    double raw = r.metrics.get(m);
    col.push_back(o == Orientation::paper ? raw : to_hib(m, raw));
  }
  return col;
}

std::vector<std::string> metric_labels() {
  std::vector<std::string> names;
  for (Metric m : kMetrics) names.emplace_back(metric_name(m));
  return names;
}

std::string fmt_tau(std::optional<double> v) { return v ? fmt::format("{:+.2f}", *v) : "n/a"; }

std::string fmt_rank(double r) {
  return r == std::floor(r) ? fmt::format("{}", static_cast<int>(r)) : fmt::format("{:.1f}", r);
}

}  // namespace

double kendall_tau(std::span<const double> x, std::span<const double> y, TauVariant variant) {
  if (x.size() != y.size())
    throw ValidationError(fmt::format("kendall_tau: length mismatch ({} vs {})", x.size(), y.size()));
  const std::size_t n = x.size();
  if (n < 2) throw ValidationError("kendall_tau: need at least 2 observations");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::ranges::sort(idx, [&](std::size_t a, std::size_t b) { return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b]; });

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t tx = tied_pairs(n, [&](std::size_t i, std::size_t j) { return x[idx[i]] == x[idx[j]]; });
  const std::int64_t txy = tied_pairs(
      n, [&](std::size_t i, std::size_t j) { return x[idx[i]] == x[idx[j]] && y[idx[i]] == y[idx[j]]; });

  std::vector<std::size_t> buf(n);
  const std::int64_t swaps = merge_count(idx, buf, y, 0, n);
  const std::int64_t ty = tied_pairs(n, [&](std::size_t i, std::size_t j) { return y[idx[i]] == y[idx[j]]; });

  // concordant - discordant
  const auto s = static_cast<double>(n0 - tx - ty + txy - 2 * swaps);

  if (variant == TauVariant::a) {
    if (tx == n0 && ty == n0) throw UndefinedError("undefined correlation: both sequences are constant");
    return s / static_cast<double>(n0);
  }
  if (tx == n0 || ty == n0) throw UndefinedError("undefined correlation: constant sequence");
  const double denom = tx == ty ? static_cast<double>(n0 - tx)
                                : std::sqrt(static_cast<double>(n0 - tx) * static_cast<double>(n0 - ty));
  return std::clamp(s / denom, -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::ranges::stable_sort(idx, [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && v[idx[j]] == v[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of positions i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = mid;
    i = j;
  }
  return ranks;
}

void TauMatrix::set(std::size_t i, std::size_t j, std::optional<double> v) {
  values[i * size() + j] = v;
  values[j * size() + i] = v;
}

std::size_t TauMatrix::index_of(std::string_view metric) const {
  for (std::size_t i = 0; i < metrics.size(); ++i)
    if (metrics[i] == metric) return i;
  throw ValidationError(fmt::format("tau matrix has no metric '{}'", metric));
}

TauMatrix make_tau_matrix(std::vector<std::string> metrics, std::span<const double> upper, std::size_t n_models) {
  TauMatrix m;
  const std::size_t k = metrics.size();
  if (upper.size() != k * (k - 1) / 2)
    throw ValidationError(fmt::format("expected {} upper-triangle entries, got {}", k * (k - 1) / 2, upper.size()));
  m.metrics = std::move(metrics);
  m.values.assign(k * k, std::nullopt);
  m.n_models = n_models;
  std::size_t u = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      if (upper[u] < -1.0 || upper[u] > 1.0)
        throw ValidationError(fmt::format("tau entry {} outside [-1, 1]", upper[u]));
      m.set(i, j, upper[u++]);
    }
  return m;
}

TauMatrix tau_matrix(std::span<const ModelRun> runs, Orientation orientation, TauVariant variant) {
  if (runs.size() < 2) throw UndefinedError(fmt::format("tau_matrix needs at least 2 runs, got {}", runs.size()));
  TauMatrix m;
  m.metrics = metric_labels();
  m.values.assign(kMetricCount * kMetricCount, std::nullopt);
  m.n_models = runs.size();

  std::array<std::vector<double>, kMetricCount> cols;
  for (Metric metric : kMetrics) cols[index(metric)] = oriented_column(runs, metric, orientation);

  for (std::size_t i = 0; i < kMetricCount; ++i)
    for (std::size_t j = i + 1; j < kMetricCount; ++j) {
      try {
        m.set(i, j, kendall_tau(cols[i], cols[j], variant));
      } catch (const UndefinedError&) {
        m.set(i, j, std::nullopt);
      }
    }
  return m;
}

double mean_pairwise_tau(const TauMatrix& m) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = i + 1; j < m.size(); ++j)
      if (auto v = m.at(i, j)) sum += *v, ++count;
  if (count == 0) throw UndefinedError("mean_pairwise_tau: no defined metric pairs");
  return sum / static_cast<double>(count);
}

double modality_gap(const TauMatrix& multimodal, const TauMatrix& unimodal) {
  return mean_pairwise_tau(unimodal) - mean_pairwise_tau(multimodal);
}

GroupedTau grouped_mean_pairwise_tau(std::span<const ModelRun> runs, GroupBy by, Orientation orientation,
                                     TauVariant variant) {
  std::map<std::string, std::vector<ModelRun>> groups;
  for (const auto& r : runs) {
    std::string key = by == GroupBy::dataset ? r.dataset : fmt::format("{}/seed={}", r.dataset, r.seed);
    groups[key].push_back(r);
  }
  GroupedTau out;
  double sum = 0.0;
  for (const auto& [key, members] : groups) {
    try {
      double g = mean_pairwise_tau(tau_matrix(members, orientation, variant));
      out.per_group[key] = g;
      sum += g;
    } catch (const UndefinedError&) {
      out.skipped.push_back(key);
    }
  }
  if (out.per_group.empty()) throw UndefinedError("grouped_mean_pairwise_tau: no group has a defined tau pair");
  out.mean = sum / static_cast<double>(out.per_group.size());
  return out;
}

std::vector<MethodAggregate> aggregate_by_method(std::span<const ModelRun> runs) {
  if (runs.empty()) throw UndefinedError("empty cohort");
  using Cell = std::pair<std::string, std::int64_t>;
  std::set<Cell> cells;
  std::map<Method, std::vector<const ModelRun*>> by_method;
  for (const auto& r : runs) {
    cells.emplace(r.dataset, r.seed);
    by_method[r.method].push_back(&r);
  }

  std::vector<std::string> missing;
  for (const auto& [method, members] : by_method) {
    std::set<Cell> have;
    for (const auto* r : members) have.emplace(r->dataset, r->seed);
    for (const auto& c : cells)
      if (!have.contains(c)) missing.push_back(fmt::format("{} @ ({}, {})", method.name, c.first, c.second));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : "; ") + m;
    throw ValidationError(fmt::format("unbalanced cohort; missing cells: {}", list));
  }

  std::vector<MethodAggregate> out;
  for (auto& [method, members] : by_method) {
    // fixed summation order so the means do not depend on input order
    std::ranges::sort(members, [](const ModelRun* a, const ModelRun* b) {
      return std::tie(a->dataset, a->seed, a->run_id) < std::tie(b->dataset, b->seed, b->run_id);
    });
    std::array<double, kMetricCount> sum{};
    for (const auto* r : members) {
      auto v = r->metrics.as_array();
      for (std::size_t k = 0; k < kMetricCount; ++k) sum[k] += v[k];
    }
    for (auto& s : sum) s /= static_cast<double>(members.size());
    out.push_back({method, MetricVector::from_array(sum), members.size()});
  }
  return out;
}

RankTable method_rank_table(std::span<const ModelRun> runs) {
  const auto agg = aggregate_by_method(runs);
  RankTable t;
  for (const auto& a : agg) {
    t.methods.push_back(a.method);
    t.means.push_back(a.mean);
  }
  t.ranks.assign(agg.size(), {});
  for (Metric m : kMetrics) {
    std::vector<double> key;
    for (const auto& a : agg) key.push_back(lower_is_better(m) ? a.mean.get(m) : -a.mean.get(m));
    auto r = average_ranks(key);
    for (std::size_t i = 0; i < agg.size(); ++i) t.ranks[i][index(m)] = r[i];
  }
  return t;
}

std::vector<RankDiscrepancy> compare_ranks(const RankTable& table,
                                           const std::map<Method, std::array<int, kMetricCount>>& published) {
  std::vector<RankDiscrepancy> out;
  for (std::size_t i = 0; i < table.methods.size(); ++i) {
    auto it = published.find(table.methods[i]);
    if (it == published.end()) continue;
    for (Metric m : kMetrics) {
      const double computed = table.rank(i, m);
      const int pub = it->second[index(m)];
      if (computed == static_cast<double>(pub)) continue;
      bool tied = false;
      for (std::size_t j = 0; j < table.methods.size(); ++j)
        if (j != i && table.rank(j, m) == computed) tied = true;
      out.push_back({table.methods[i], m, computed, pub, tied});
    }
  }
  return out;
}

ClusterReport cluster_report(const TauMatrix& m, double threshold) {
  const std::size_t k = m.size();
  std::vector<std::size_t> parent(k);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (auto v = m.at(i, j); v && *v > threshold) parent[find(j)] = find(i);

  ClusterReport rep;
  rep.threshold = threshold;
  std::map<std::size_t, std::vector<std::string>> comps;  // keyed by smallest member (first seen)
  std::vector<std::size_t> root_order;
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t r = find(i);
    if (!comps.contains(r)) root_order.push_back(r);
    comps[r].push_back(m.metrics[i]);
  }
  for (auto r : root_order) rep.clusters.push_back(comps[r]);

  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      auto v = m.at(i, j);
      if (!v) continue;
      if (std::abs(*v) < kContradictionCutoff) rep.contradiction_pairs.emplace_back(m.metrics[i], m.metrics[j]);
      if (find(i) != find(j)) {
        rep.cross_min = rep.cross_min ? std::min(*rep.cross_min, *v) : *v;
        rep.cross_max = rep.cross_max ? std::max(*rep.cross_max, *v) : *v;
      }
    }
  return rep;
}

bool CohortFilter::matches(const ModelRun& r) const {
  if (dataset && r.dataset != *dataset) return false;
  if (method && !(r.method == *method)) return false;
  if (seed && r.seed != *seed) return false;
  if (modality && r.modality != *modality) return false;
  return true;
}

void CohortFilter::add(std::string_view key_value) {
  auto eq = key_value.find('=');
  if (eq == std::string_view::npos || eq == 0 || eq + 1 == key_value.size())
    throw ValidationError(fmt::format("filter '{}' is not key=value", key_value));
  std::string_view key = key_value.substr(0, eq);
  std::string value(key_value.substr(eq + 1));
  if (key == "dataset") {
    dataset = value;
  } else if (key == "method") {
    method = Method::parse(value);
  } else if (key == "seed") {
    try {
      std::size_t used = 0;
      seed = std::stoll(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("filter seed '{}' is not an integer", value));
    }
  } else if (key == "modality") {
    if (value == "multimodal")
      modality = Modality::multimodal;
    else if (value == "unimodal")
      modality = Modality::unimodal;
    else
      throw ValidationError(fmt::format("filter modality '{}' is not multimodal|unimodal", value));
  } else {
    throw ValidationError(fmt::format("unknown filter key '{}'", key));
  }
}

std::vector<ModelRun> filter_runs(std::span<const ModelRun> runs, const CohortFilter& f) {
  std::vector<ModelRun> out;
  std::ranges::copy_if(runs, std::back_inserter(out), [&](const ModelRun& r) { return f.matches(r); });
  return out;
}

TauMatrix filtered_tau(std::span<const ModelRun> runs, const CohortFilter& f, Orientation orientation,
                       TauVariant variant) {
  auto kept = filter_runs(runs, f);
  if (kept.empty()) throw UndefinedError("empty cohort");
  return tau_matrix(kept, orientation, variant);
}

std::string to_markdown(const TauMatrix& m) {
  std::ostringstream os;
  os << "|     |";
  for (const auto& name : m.metrics) os << fmt::format(" {:>5} |", name);
  os << "\n|-----|";
  for (std::size_t j = 0; j < m.size(); ++j) os << "------:|";
  os << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << fmt::format("| {:<3} |", m.metrics[i]);
    for (std::size_t j = 0; j < m.size(); ++j) {
      std::string cell = i == j ? "-" : fmt_tau(m.at(i, j));
      if (i != j && m.at(i, j) && std::abs(*m.at(i, j)) < kContradictionCutoff) cell = "*" + cell;
      os << fmt::format(" {:>5} |", cell);
    }
    os << '\n';
  }
  os << fmt::format("\nn = {} models; * marks |tau| < {:.1f} (contradiction region)\n", m.n_models,
                    kContradictionCutoff);
  return os.str();
}

std::string to_markdown(const RankTable& t) {
  std::ostringstream os;
  os << "| Method | FA | RA | MIA | AD | JS |\n|---|---:|---:|---:|---:|---:|\n";
  for (std::size_t i = 0; i < t.methods.size(); ++i) {
    os << "| " << t.methods[i].display_name() << " |";
    for (Metric m : kMetrics) os << ' ' << fmt_rank(t.rank(i, m)) << " |";
    os << '\n';
  }
  return os.str();
}

}  // namespace unlearn
