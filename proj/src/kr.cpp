#include "unlearn/kr.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace unlearn {

namespace {

struct Tally {
  std::set<std::int64_t> seeds;
  std::vector<double> kr;
  std::size_t leaks = 0;
};

// Sorting before summing keeps the mean independent of record order.
double sorted_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::ranges::sort(v);
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

KrRow finish(std::string name, const Tally& t, std::size_t seeds) {
  KrRow row;
  row.method = std::move(name);
  row.seeds = seeds;
  row.suppressed = t.kr.size();
  row.leaks = t.leaks;
  row.leak_rate = row.suppressed ? static_cast<double>(row.leaks) / static_cast<double>(row.suppressed) : 0.0;
  row.mean_kr = sorted_mean(t.kr);
  return row;
}

}  // namespace

KrEstimator parse_kr_estimator(std::string_view name) {
  if (name == "max_binary") return KrEstimator::max_binary;
  if (name == "fraction") return KrEstimator::fraction;
  throw ValidationError(fmt::format("unknown KR estimator '{}' (max_binary|fraction)", name));
}

double kr_per_sample(const ProbeRecord& r, KrEstimator estimator) {
  if (!r.direct_suppressed) throw ValidationError("KR defined only on suppressed samples");
  if (r.probes.empty()) throw ValidationError(fmt::format("sample '{}': empty probe list", r.sample_id));
  const auto revealed = std::ranges::count_if(r.probes, [](const ProbeOutcome& p) { return p.revealed; });
  if (estimator == KrEstimator::max_binary) return revealed > 0 ? 1.0 : 0.0;
  return static_cast<double>(revealed) / static_cast<double>(r.probes.size());
}

KrReport kr_report(std::span<const ProbeRecord> records, KrEstimator mean_estimator) {
  std::map<Method, Tally> per_method;
  Tally all;
  KrReport rep;
  rep.mean_estimator = mean_estimator;
  for (std::size_t i = 0; i < rep.by_probe.size(); ++i) rep.by_probe[i].probe_type = static_cast<ProbeType>(i);

  for (const auto& r : records) {
    validate(r);
    if (!r.direct_suppressed) continue;
    const double kr = kr_per_sample(r, mean_estimator);
    const bool leak = kr_per_sample(r, KrEstimator::max_binary) > 0.0;
    for (Tally* t : {&per_method[Method::parse(r.method)], &all}) {
      t->seeds.insert(r.seed);
      t->kr.push_back(kr);
      t->leaks += leak;
    }
    for (const auto& p : r.probes) {
      auto& rec = rep.by_probe[static_cast<std::size_t>(p.probe_type)];
      ++rec.total;
      rec.revealed += p.revealed;
    }
  }

  std::size_t seed_total = 0;
  for (const auto& [method, t] : per_method) {
    rep.methods.push_back(finish(method.name, t, t.seeds.size()));
    seed_total += t.seeds.size();
  }
  rep.combined = finish("Combined", all, seed_total);
  return rep;
}

std::string to_markdown(const KrReport& r) {
  std::ostringstream os;
  os << "| Method | Seeds | FA=0 samples | KR leaks | Mean KR |\n|---|---:|---:|---:|---:|\n";
  auto row = [&](const KrRow& k, std::string_view label) {
    os << fmt::format("| {} | {} | {} | {}/{} ({:.0f}%) | {:.2f} |\n", label, k.seeds, k.suppressed, k.leaks,
                      k.suppressed, 100.0 * k.leak_rate, k.mean_kr);
  };
  for (const auto& k : r.methods) row(k, Method::parse(k.method).display_name());
  row(r.combined, "Combined");
  os << fmt::format("\nMean KR estimator: {}\nProbe recovery:",
                    r.mean_estimator == KrEstimator::fraction ? "fraction" : "max_binary");
  for (std::size_t i = 0; i < r.by_probe.size(); ++i) {
    const auto& p = r.by_probe[i];
    os << fmt::format("{} {} {}/{} ({:.0f}%)", i ? ";" : "", to_string(p.probe_type), p.revealed, p.total,
                      100.0 * p.rate());
  }
  os << '\n';
  return os.str();
}

}  // namespace unlearn
