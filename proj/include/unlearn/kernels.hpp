#pragma once

// Data-parallel inner loops. Every kernel has a plain serial reference in
// `serial::` and an OpenMP variant in `parallel::`. The library calls the
// parallel variants; tests compare the two.
//
// Parallel reductions are deterministic: work is cut into fixed-size blocks
// (independent of thread count), partial results are written per block and
// summed in block order. Results are therefore bit-identical for any number of
// threads.

#include <cstddef>
#include <span>

namespace unlearn::kernels {

inline constexpr std::size_t kBlockSize = 1 << 14;

// A borrowed pair of equal-length vectors.
struct VecPair {
  std::span<const double> lhs;
  std::span<const double> rhs;
};

enum class LogBase { bits, nats };

namespace serial {

// Sum over i of |a[i] - b[i]|, single accumulator.
double sum_abs_diff(std::span<const float> a, std::span<const float> b);

// out[k] = ||pairs[k].lhs - pairs[k].rhs||_2
void l2_distances(std::span<const VecPair> pairs, std::span<double> out);

// out[k] = JSD(pairs[k].lhs, pairs[k].rhs) with 0 log 0 = 0
void js_divergences(std::span<const VecPair> pairs, LogBase base, std::span<double> out);

// scores[t * n_items + i] = dot(weights[t * dims ...], rows[i * dims ...])
void weighted_scores(std::span<const double> rows, std::span<const double> weights, std::size_t dims,
                     std::span<double> scores);

}  // namespace serial

namespace parallel {

double sum_abs_diff(std::span<const float> a, std::span<const float> b);
void l2_distances(std::span<const VecPair> pairs, std::span<double> out);
void js_divergences(std::span<const VecPair> pairs, LogBase base, std::span<double> out);
void weighted_scores(std::span<const double> rows, std::span<const double> weights, std::size_t dims,
                     std::span<double> scores);

}  // namespace parallel

// Left-to-right sum; used to reduce per-item terms in a fixed order.
double ordered_sum(std::span<const double> v);

// Number of threads OpenMP would use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace unlearn::kernels
