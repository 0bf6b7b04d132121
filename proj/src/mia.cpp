#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "unlearn/metrics.hpp"

namespace unlearn {

namespace {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

// log(1 + exp(eta)) without overflow
double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

double linear(const Vec4& beta, const MiaFeatures& z) {
  return beta[0] + beta[1] * z[0] + beta[2] * z[1] + beta[3] * z[2];
}

double objective(const Vec4& beta, std::span<const MiaFeatures> x, std::span<const int> y, double l2) {
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double eta = linear(beta, x[i]);
    f += softplus(eta) - (y[i] ? eta : 0.0);
  }
  return f + 0.5 * l2 * (beta[1] * beta[1] + beta[2] * beta[2] + beta[3] * beta[3]);
}

struct Standardizer {
  std::array<double, 3> mean{};
  std::array<double, 3> scale{};  // 0 marks a zero-variance column

  static Standardizer fit(std::span<const MiaFeatures> rows) {
    Standardizer s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < 3; ++j) {
      double m = 0.0;
      for (const auto& r : rows) m += r[j];
      m /= n;
      double v = 0.0;
      for (const auto& r : rows) v += (r[j] - m) * (r[j] - m);
      double sd = std::sqrt(v / n);
      s.mean[j] = m;
      s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(m)) ? 1.0 / sd : 0.0;
    }
    return s;
  }

  MiaFeatures apply(const MiaFeatures& r) const {
    return {(r[0] - mean[0]) * scale[0], (r[1] - mean[1]) * scale[1], (r[2] - mean[2]) * scale[2]};
  }
};

}  // namespace

MiaFeatures mia_features(const SampleOutcome& s) { return {s.max_confidence, -s.entropy, s.top2_margin}; }

double LogisticFit::probability(const MiaFeatures& z) const {
  return sigmoid(coef[0] + coef[1] * z[0] + coef[2] * z[1] + coef[3] * z[2]);
}

LogisticFit fit_logistic_irls(std::span<const MiaFeatures> x, std::span<const int> y, const MiaOptions& opt) {
  Vec4 beta = Vec4::Zero();
  Mat4 penalty = Mat4::Zero();
  penalty(1, 1) = penalty(2, 2) = penalty(3, 3) = opt.l2_penalty;

  LogisticFit fit;
  double f = objective(beta, x, y, opt.l2_penalty);
  for (int it = 0;; ++it) {
    Vec4 grad = penalty * beta;
    Mat4 hess = penalty;
    for (std::size_t i = 0; i < x.size(); ++i) {
      Vec4 xi(1.0, x[i][0], x[i][1], x[i][2]);
      double p = sigmoid(beta.dot(xi));
      grad += (p - y[i]) * xi;
      hess += p * (1.0 - p) * xi * xi.transpose();
    }
    fit.iterations = it;
    fit.gradient_max_norm = grad.cwiseAbs().maxCoeff();
    if (fit.gradient_max_norm < opt.gradient_tolerance || it == opt.max_iterations) break;

    Vec4 step = hess.ldlt().solve(grad);
    if (!step.allFinite()) step = grad;  // fall back to a gradient step on a singular Hessian
    double t = 1.0;
    Vec4 next = beta - step;
    double f_next = objective(next, x, y, opt.l2_penalty);
    for (int halvings = 0; f_next > f && halvings < 40; ++halvings) {
      t *= 0.5;
      next = beta - t * step;
      f_next = objective(next, x, y, opt.l2_penalty);
    }
    if (f_next > f) break;
    beta = next;
    f = f_next;
  }
  for (int j = 0; j < 4; ++j) fit.coef[static_cast<std::size_t>(j)] = beta[j];
  return fit;
}

std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  std::vector<int> fold_of(labels.size(), 0);
  std::mt19937_64 rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) fold_of[idx[k]] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }
  return fold_of;
}

double mia_score(std::span<const MiaFeatures> forget, std::span<const MiaFeatures> retain, const MiaOptions& opt) {
  if (opt.folds < 2) throw ValidationError(fmt::format("mia_score: folds must be >= 2, got {}", opt.folds));
  const auto need = static_cast<std::size_t>(opt.folds);
  if (forget.size() < need || retain.size() < need)
    throw ValidationError(fmt::format("mia_score: each class needs at least {} samples (forget {}, retain {})",
                                      opt.folds, forget.size(), retain.size()));

  std::vector<MiaFeatures> x;
  std::vector<int> y;
  x.reserve(forget.size() + retain.size());
  for (const auto& f : forget) x.push_back(f), y.push_back(1);
  for (const auto& r : retain) x.push_back(r), y.push_back(0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (double v : x[i])
      if (!std::isfinite(v)) throw ValidationError(fmt::format("mia_score: non-finite feature in sample {}", i));

  const std::vector<int> fold_of = stratified_folds(y, opt.folds, opt.seed);
  std::vector<double> accuracy(need, 0.0);

#pragma omp parallel for schedule(static)
  for (int fold = 0; fold < opt.folds; ++fold) {
    std::vector<MiaFeatures> train;
    std::vector<int> train_y;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (fold_of[i] != fold) train.push_back(x[i]), train_y.push_back(y[i]);

    const Standardizer scaler = Standardizer::fit(train);
    for (auto& r : train) r = scaler.apply(r);
    const LogisticFit model = fit_logistic_irls(train, train_y, opt);

    std::size_t held = 0, correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (fold_of[i] != fold) continue;
      ++held;
      int predicted = model.probability(scaler.apply(x[i])) > 0.5 ? 1 : 0;
      if (predicted == y[i]) ++correct;
    }
    accuracy[static_cast<std::size_t>(fold)] = static_cast<double>(correct) / static_cast<double>(held);
  }
  return std::accumulate(accuracy.begin(), accuracy.end(), 0.0) / static_cast<double>(opt.folds);
}

double mia_score(std::span<const SampleOutcome> forget, std::span<const SampleOutcome> retain, const MiaOptions& opt) {
  std::vector<MiaFeatures> f, r;
  for (const auto& s : forget) f.push_back(mia_features(s));
  for (const auto& s : retain) r.push_back(mia_features(s));
  return mia_score(f, r, opt);
}

}  // namespace unlearn
