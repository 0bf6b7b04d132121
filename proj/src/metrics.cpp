#include "unlearn/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

namespace unlearn {

std::string normalize_answer(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  auto edge = [](unsigned char c) { return std::ispunct(c) || std::isspace(c); };
  std::size_t lo = 0, hi = out.size();
  while (lo < hi && edge(static_cast<unsigned char>(out[lo]))) ++lo;
  while (hi > lo && edge(static_cast<unsigned char>(out[hi - 1]))) --hi;
  return out.substr(lo, hi - lo);
}

bool answer_matches(std::string_view gold, std::string_view prediction) {
  std::string g = normalize_answer(gold);
  if (g.empty()) return false;
  return normalize_answer(prediction).find(g) != std::string::npos;
}

double substring_accuracy(std::span<const SampleOutcome> outcomes, Split split, std::size_t cap) {
  if (cap == 0) throw ValidationError("sample cap must be positive");
  std::size_t used = 0, hits = 0;
  for (const auto& s : outcomes) {
    if (s.split != split) continue;
    if (used == cap) break;
    ++used;
    if (answer_matches(s.gold_answer, s.prediction)) ++hits;
  }
  if (used == 0) throw ValidationError(fmt::format("no samples in split '{}'", to_string(split)));
  return static_cast<double>(hits) / static_cast<double>(used);
}

double activation_distance(std::span<const VecPair> pairs) {
  if (pairs.empty()) throw ValidationError("activation_distance: no activation pairs");
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (pairs[k].lhs.size() != pairs[k].rhs.size())
      throw ValidationError(fmt::format("activation_distance: pair {} has lengths {} and {}", k,
                                        pairs[k].lhs.size(), pairs[k].rhs.size()));
  std::vector<double> norms(pairs.size());
  kernels::parallel::l2_distances(pairs, norms);
  return kernels::ordered_sum(norms) / static_cast<double>(pairs.size());
}

double js_divergence(std::span<const double> p, std::span<const double> q, LogBase base) {
  const VecPair pair{p, q};
  return js_divergence(std::span<const VecPair>(&pair, 1), base);
}

double js_divergence(std::span<const VecPair> pairs, LogBase base) {
  if (pairs.empty()) throw ValidationError("js_divergence: no distribution pairs");
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].lhs.size() != pairs[k].rhs.size())
      throw ValidationError(fmt::format("js_divergence: pair {} has lengths {} and {}", k,
                                        pairs[k].lhs.size(), pairs[k].rhs.size()));
    validate_distribution(pairs[k].lhs, "output_dist");
    validate_distribution(pairs[k].rhs, "oracle_output_dist");
  }
  std::vector<double> terms(pairs.size());
  kernels::parallel::js_divergences(pairs, base, terms);
  double mean = kernels::ordered_sum(terms) / static_cast<double>(pairs.size());
  return base == LogBase::bits ? std::min(mean, 1.0) : mean;
}

std::vector<VecPair> activation_pairs(std::span<const SampleOutcome> outcomes, Split split, std::size_t cap) {
  std::vector<VecPair> out;
  for (const auto& s : outcomes) {
    if (out.size() == cap) break;
    if (s.split == split && s.activation && s.oracle_activation)
      out.push_back({*s.activation, *s.oracle_activation});
  }
  return out;
}

std::vector<VecPair> distribution_pairs(std::span<const SampleOutcome> outcomes, Split split,
                                        std::size_t cap) {
  std::vector<VecPair> out;
  for (const auto& s : outcomes) {
    if (out.size() == cap) break;
    if (s.split == split && s.output_dist && s.oracle_output_dist)
      out.push_back({*s.output_dist, *s.oracle_output_dist});
  }
  return out;
}

double oracle_distance(const ParameterSnapshot& a, const ParameterSnapshot& b, DistanceMode mode) {
  validate(a);
  validate(b);
  if (!comparable(a, b)) {
    std::size_t i = 0;
    while (i < a.layout.size() && i < b.layout.size() && a.layout[i] == b.layout[i]) ++i;
    std::string_view name = i < a.layout.size() ? a.layout[i].tensor_name : b.layout[i].tensor_name;
    throw ValidationError(fmt::format("layout mismatch between '{}' and '{}' at tensor '{}'", a.model_id,
                                      b.model_id, name));
  }
  if (a.values.empty()) throw ValidationError("oracle_distance: snapshots have no parameters");

  if (mode == DistanceMode::per_scalar)
    return kernels::parallel::sum_abs_diff(a.values, b.values) / static_cast<double>(a.values.size());

  if (a.layout.empty()) throw ValidationError("oracle_distance: per-tensor mode needs a layout");
  double total = 0.0;
  for (const auto& t : a.layout) {
    double ss = 0.0;
    for (std::size_t i = t.offset; i < t.offset + t.length; ++i) {
      double d = static_cast<double>(a.values[i]) - static_cast<double>(b.values[i]);
      ss += d * d;
    }
    total += std::sqrt(ss);
  }
  return total / static_cast<double>(a.layout.size());
}

double to_hib(Metric metric, double raw) {
  switch (metric) {
    case Metric::fa:
    case Metric::mia:
    case Metric::js: return 1.0 - raw;
    case Metric::ra: return raw;
    case Metric::ad: return std::exp(-raw / 100.0);
  }
  return raw;
}

HibVector to_hib(const MetricVector& m) {
  return {to_hib(Metric::fa, m.fa), to_hib(Metric::ra, m.ra), to_hib(Metric::mia, m.mia),
          to_hib(Metric::ad, m.ad), to_hib(Metric::js, m.js)};
}

}  // namespace unlearn
