#include <cmath>

#include "unlearn/kernels.hpp"

namespace unlearn::kernels {

namespace detail {

// Shared per-pair terms so the serial and parallel paths agree bit-for-bit.
double l2(const VecPair& p) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.lhs.size(); ++i) {
    double d = p.lhs[i] - p.rhs[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double jsd(const VecPair& pq, LogBase base) {
  double (*lg)(double) = base == LogBase::bits ? +[](double x) { return std::log2(x); }
                                                : +[](double x) { return std::log(x); };
  double acc = 0.0;
  for (std::size_t i = 0; i < pq.lhs.size(); ++i) {
    double p = pq.lhs[i], q = pq.rhs[i];
    double m = 0.5 * (p + q);
    if (p > 0.0) acc += 0.5 * p * lg(p / m);
    if (q > 0.0) acc += 0.5 * q * lg(q / m);
  }
  return acc < 0.0 ? 0.0 : acc;
}

}  // namespace detail

namespace serial {

double sum_abs_diff(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
  return acc;
}

void l2_distances(std::span<const VecPair> pairs, std::span<double> out) {
  for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = detail::l2(pairs[k]);
}

void js_divergences(std::span<const VecPair> pairs, LogBase base, std::span<double> out) {
  for (std::size_t k = 0; k < pairs.size(); ++k) out[k] = detail::jsd(pairs[k], base);
}

void weighted_scores(std::span<const double> rows, std::span<const double> weights, std::size_t dims,
                     std::span<double> scores) {
  const std::size_t n_items = rows.size() / dims;
  const std::size_t n_trials = weights.size() / dims;
  for (std::size_t t = 0; t < n_trials; ++t)
    for (std::size_t i = 0; i < n_items; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < dims; ++d) s += weights[t * dims + d] * rows[i * dims + d];
      scores[t * n_items + i] = s;
    }
}

}  // namespace serial

double ordered_sum(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace unlearn::kernels
