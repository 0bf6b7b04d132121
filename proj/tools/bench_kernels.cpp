// Serial vs OpenMP kernels on synthetic inputs.
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "unlearn/kernels.hpp"
#include "unlearn/uqs.hpp"

namespace {

using namespace unlearn;

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> z(0.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

std::vector<double> random_distribution(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(n);
  double total = 0.0;
  for (auto& x : v) total += (x = u(rng));
  for (auto& x : v) x /= total;
  return v;
}

template <auto Fn>
void BM_sum_abs_diff(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_floats(n, 1), b = random_floats(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * n * 2 * sizeof(float)));
}

struct PairData {
  std::vector<std::vector<double>> lhs, rhs;
  std::vector<kernels::VecPair> pairs;
  std::vector<double> out;

  PairData(std::size_t n_pairs, std::size_t dim) {
    std::mt19937_64 rng(3);
    for (std::size_t i = 0; i < n_pairs; ++i) {
      lhs.push_back(random_distribution(dim, rng));
      rhs.push_back(random_distribution(dim, rng));
    }
    for (std::size_t i = 0; i < n_pairs; ++i) pairs.push_back({lhs[i], rhs[i]});
    out.resize(n_pairs);
  }
};

template <auto Fn>
void BM_js_divergences(benchmark::State& state) {
  PairData d(static_cast<std::size_t>(state.range(0)), 1024);
  for (auto _ : state) {
    Fn(d.pairs, kernels::LogBase::bits, d.out);
    benchmark::DoNotOptimize(d.out.data());
  }
}

template <auto Fn>
void BM_l2_distances(benchmark::State& state) {
  PairData d(static_cast<std::size_t>(state.range(0)), 4096);
  for (auto _ : state) {
    Fn(d.pairs, d.out);
    benchmark::DoNotOptimize(d.out.data());
  }
}

template <auto Fn>
void BM_weighted_scores(benchmark::State& state) {
  const auto n_items = static_cast<std::size_t>(state.range(0));
  const std::size_t n_trials = 1000;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> rows(n_items * kMetricCount);
  for (auto& x : rows) x = u(rng);
  std::vector<double> weights;
  for (const auto& w : dirichlet_draws(n_trials, 1.0, 42)) weights.insert(weights.end(), w.w.begin(), w.w.end());
  std::vector<double> scores(n_trials * n_items);
  for (auto _ : state) {
    Fn(rows, weights, kMetricCount, scores);
    benchmark::DoNotOptimize(scores.data());
  }
}

}  // namespace

BENCHMARK(BM_sum_abs_diff<kernels::serial::sum_abs_diff>)->Name("sum_abs_diff/serial")->Range(1 << 16, 1 << 24);
BENCHMARK(BM_sum_abs_diff<kernels::parallel::sum_abs_diff>)->Name("sum_abs_diff/parallel")->Range(1 << 16, 1 << 24);
BENCHMARK(BM_js_divergences<kernels::serial::js_divergences>)->Name("js_divergences/serial")->Range(64, 4096);
BENCHMARK(BM_js_divergences<kernels::parallel::js_divergences>)->Name("js_divergences/parallel")->Range(64, 4096);
BENCHMARK(BM_l2_distances<kernels::serial::l2_distances>)->Name("l2_distances/serial")->Range(64, 4096);
BENCHMARK(BM_l2_distances<kernels::parallel::l2_distances>)->Name("l2_distances/parallel")->Range(64, 4096);
BENCHMARK(BM_weighted_scores<kernels::serial::weighted_scores>)->Name("weighted_scores/serial")->Range(4, 4096);
BENCHMARK(BM_weighted_scores<kernels::parallel::weighted_scores>)->Name("weighted_scores/parallel")->Range(4, 4096);

BENCHMARK_MAIN();
