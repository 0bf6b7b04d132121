#include "unlearn/reliability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "unlearn/metrics.hpp"
#include "unlearn/ranks.hpp"
#include "unlearn/special.hpp"
#include "unlearn/uqs.hpp"

namespace unlearn {

namespace {

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedError("undefined correlation: constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double permutation_p_value(std::span<const double> rx, std::span<const double> ry, double rho) {
  if (rx.size() > 10)
    throw ValidationError(fmt::format("exact permutation p-value supports n <= 10, got {}", rx.size()));
  std::vector<std::size_t> perm(ry.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> shuffled(ry.size());
  std::uint64_t extreme = 0, total = 0;
  const double cutoff = std::abs(rho) - 1e-12;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = ry[perm[i]];
    if (std::abs(pearson(rx, shuffled)) >= cutoff) ++extreme;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(extreme) / static_cast<double>(total);
}

std::vector<double> proximity(std::span<const ModelRun> runs) {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const auto& r : runs) {
    if (!r.oracle_distance)
      throw ValidationError(fmt::format("run '{}' has no oracle_distance", r.run_id));
    out.push_back(-*r.oracle_distance);
  }
  return out;
}

std::vector<double> hib_column(std::span<const ModelRun> runs, Metric m) {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const auto& r : runs) out.push_back(to_hib(m, r.metrics.get(m)));
  return out;
}

}  // namespace

double spearman_p_value(double rho, std::size_t n) {
  if (n < 4) throw ValidationError(fmt::format("spearman: need n >= 4, got {}", n));
  const double r2 = rho * rho;
  if (r2 >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = rho * std::sqrt(df / (1.0 - r2));
  return special::student_t_two_sided(t, df);
}

Correlation spearman_rho(std::span<const double> x, std::span<const double> y, PValueMethod method) {
  if (x.size() != y.size())
    throw ValidationError(fmt::format("spearman: length mismatch ({} vs {})", x.size(), y.size()));
  if (x.size() < 4) throw ValidationError(fmt::format("spearman: need n >= 4, got {}", x.size()));
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  Correlation c;
  c.rho = pearson(rx, ry);
  c.p_value = method == PValueMethod::t_approx ? spearman_p_value(c.rho, x.size())
                                               : permutation_p_value(rx, ry, c.rho);
  return c;
}

WeightVector derive_weights(const std::array<double, kMetricCount>& rho, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError(fmt::format("epsilon must be > 0, got {}", epsilon));
  WeightVector w;
  double total = 0.0;
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    if (!(rho[i] >= -1.0 && rho[i] <= 1.0))
      throw ValidationError(fmt::format("rho for {} is {}, outside [-1, 1]", metric_name(kMetrics[i]), rho[i]));
    w.w[i] = std::max(rho[i], epsilon);
    total += w.w[i];
  }
  for (auto& v : w.w) v /= total;
  return w;
}

ReliabilityReport full_sample_reliability(std::span<const ModelRun> runs, double epsilon) {
  const auto prox = proximity(runs);
  ReliabilityReport rep;
  rep.n = runs.size();
  rep.epsilon = epsilon;
  rep.mode = ReliabilityMode::full_sample;
  for (Metric m : kMetrics) {
    try {
      auto c = spearman_rho(hib_column(runs, m), prox);
      rep.rho[index(m)] = c.rho;
      rep.p_value[index(m)] = c.p_value;
    } catch (const UndefinedError& e) {
      throw UndefinedError(fmt::format("{}: {}", metric_name(m), e.what()));
    }
  }
  rep.weights = derive_weights(rep.rho, epsilon);
  return rep;
}

std::vector<int> kfold_assignment(std::size_t n, int folds, std::uint64_t seed) {
  if (folds < 1 || static_cast<std::size_t>(folds) > n)
    throw ValidationError(fmt::format("cannot split {} items into {} folds", n, folds));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos)
    fold_of[order[pos]] = static_cast<int>(pos * static_cast<std::size_t>(folds) / n);
  return fold_of;
}

std::vector<int> kfold_assignment_stratified(std::span<const int> groups, int folds, std::uint64_t seed) {
  if (folds < 1 || static_cast<std::size_t>(folds) > groups.size())
    throw ValidationError(fmt::format("cannot split {} items into {} folds", groups.size(), folds));
  std::vector<int> keys(groups.begin(), groups.end());
  std::ranges::sort(keys);
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(groups.size());
  std::size_t dealt = 0;
  for (int g : keys) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < groups.size(); ++i)
      if (groups[i] == g) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);
    for (auto i : members) fold_of[i] = static_cast<int>(dealt++ % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

ReliabilityReport cv_weights(std::span<const ModelRun> runs, const CvOptions& opt) {
  const auto prox = proximity(runs);
  std::vector<int> fold_of;
  if (opt.folds == 1) {
    fold_of.assign(runs.size(), -1);  // nothing held out
  } else if (opt.stratify_by_method) {
    std::vector<int> groups;
    std::vector<Method> seen;
    for (const auto& r : runs) {
      auto it = std::ranges::find(seen, r.method);
      if (it == seen.end()) {
        seen.push_back(r.method);
        it = seen.end() - 1;
      }
      groups.push_back(static_cast<int>(it - seen.begin()));
    }
    fold_of = kfold_assignment_stratified(groups, opt.folds, opt.seed);
  } else {
    fold_of = kfold_assignment(runs.size(), opt.folds, opt.seed);
  }

  ReliabilityReport rep;
  rep.n = runs.size();
  rep.epsilon = opt.epsilon;
  rep.mode = opt.folds == 1 ? ReliabilityMode::full_sample : ReliabilityMode::cv_averaged;
  rep.folds = opt.folds;
  rep.seed = opt.seed;

  std::array<double, kMetricCount> sum{};
  std::array<int, kMetricCount> defined{};
  for (int fold = 0; fold < opt.folds; ++fold) {
    std::vector<ModelRun> train;
    std::vector<double> train_prox;
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (fold_of[i] != fold) train.push_back(runs[i]), train_prox.push_back(prox[i]);
    auto& row = rep.fold_rho.emplace_back();
    for (Metric m : kMetrics) {
      try {
        double rho = spearman_rho(hib_column(train, m), train_prox).rho;
        row[index(m)] = rho;
        sum[index(m)] += rho;
        ++defined[index(m)];
      } catch (const UndefinedError&) {
      }
    }
  }
  for (Metric m : kMetrics) {
    const auto k = index(m);
    if (defined[k] == 0)
      throw UndefinedError(fmt::format("{}: rho undefined on every training split", metric_name(m)));
    rep.rho[k] = sum[k] / defined[k];
    rep.p_value[k] = spearman_p_value(rep.rho[k], runs.size());
  }
  rep.weights = derive_weights(rep.rho, opt.epsilon);
  return rep;
}

EpsilonSensitivity epsilon_sensitivity(std::span<const ModelRun> runs, const std::array<double, kMetricCount>& rho,
                                       std::span<const double> epsilons) {
  EpsilonSensitivity out;
  for (double eps : epsilons) {
    EpsilonRow row;
    row.epsilon = eps;
    row.weights = derive_weights(rho, eps);
    const Leaderboard board = leaderboard(runs, row.weights);
    for (const auto& r : board.rows) {
      row.ranking.push_back(r.method);
      row.scores.push_back(r.score);
    }
    if (!out.rows.empty() && row.ranking != out.rows.front().ranking) out.rankings_identical = false;
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string to_markdown(const ReliabilityReport& r) {
  std::ostringstream os;
  os << "| Metric | Spearman rho | p-value | UQS Weight | Dir. |\n|---|---:|---:|---:|:---:|\n";
  for (Metric m : kMetrics) {
    const double p = r.p_value[index(m)];
    const char* stars = p < 0.01 ? "**" : p < 0.05 ? "*" : "";
    os << fmt::format("| {} | {:+.3f} | {:.3f}{} | {:.3f} | {} |\n", metric_name(m), r.rho[index(m)], p, stars,
                      r.weights[m], lower_is_better(m) ? "↓" : "↑");
  }
  double total = 0.0;
  for (double w : r.weights.w) total += w;
  os << fmt::format("| Total | - | - | {:.3f} | - |\n", total);
  os << fmt::format("\nn = {}, epsilon = {}, mode = {}", r.n, r.epsilon,
                    r.mode == ReliabilityMode::full_sample ? "full_sample" : "cv_averaged");
  if (r.mode == ReliabilityMode::cv_averaged) os << fmt::format(" ({} folds, seed {})", r.folds, r.seed);
  os << "; * p < 0.05, ** p < 0.01\n";
  return os.str();
}

}  // namespace unlearn
