#include <cmath>
#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "unlearn/kernels.hpp"

namespace unlearn::kernels {

namespace detail {
double l2(const VecPair& p);
double jsd(const VecPair& pq, LogBase base);
}  // namespace detail

namespace parallel {

double sum_abs_diff(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = a.size();
  const std::size_t n_blocks = (n + kBlockSize - 1) / kBlockSize;
  std::vector<double> partial(n_blocks, 0.0);
  const float* pa = a.data();
  const float* pb = b.data();

#pragma omp parallel for schedule(static)
  for (std::int64_t blk = 0; blk < static_cast<std::int64_t>(n_blocks); ++blk) {
    const std::size_t lo = static_cast<std::size_t>(blk) * kBlockSize;
    const std::size_t hi = lo + kBlockSize < n ? lo + kBlockSize : n;
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i)
      acc += std::abs(static_cast<double>(pa[i]) - static_cast<double>(pb[i]));
    partial[static_cast<std::size_t>(blk)] = acc;
  }
  return ordered_sum(partial);
}

void l2_distances(std::span<const VecPair> pairs, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(pairs.size()); ++k)
    out[static_cast<std::size_t>(k)] = detail::l2(pairs[static_cast<std::size_t>(k)]);
}

void js_divergences(std::span<const VecPair> pairs, LogBase base, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(pairs.size()); ++k)
    out[static_cast<std::size_t>(k)] = detail::jsd(pairs[static_cast<std::size_t>(k)], base);
}

void weighted_scores(std::span<const double> rows, std::span<const double> weights, std::size_t dims,
                     std::span<double> scores) {
  const std::size_t n_items = rows.size() / dims;
  const std::int64_t n_trials = static_cast<std::int64_t>(weights.size() / dims);
#pragma omp parallel for schedule(static)
  for (std::int64_t t = 0; t < n_trials; ++t) {
    const std::size_t tt = static_cast<std::size_t>(t);
    for (std::size_t i = 0; i < n_items; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < dims; ++d) s += weights[tt * dims + d] * rows[i * dims + d];
      scores[tt * n_items + i] = s;
    }
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace unlearn::kernels
