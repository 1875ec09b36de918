#pragma once

// Composite MAE + pairwise rank loss and its (sub)gradients with respect to predictions.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fragvqa/errors.hpp"

namespace fragvqa {

struct LossWeights {
  double mae_w = 0.6;
  double rank_w = 1.0;
  double rank_margin = 0.0;
};

namespace detail {

inline void check_pair(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("prediction / target length mismatch: " + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()));
  }
  if (pred.empty()) throw ContractError("loss needs at least one sample");
}

}  // namespace detail

inline double mae_loss(std::span<const double> pred, std::span<const double> truth) {
  detail::check_pair(pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

// dL/dpred of the MAE; the subgradient at zero error is 0.
inline std::vector<double> mae_grad(std::span<const double> pred, std::span<const double> truth) {
  detail::check_pair(pred, truth);
  const double inv = 1.0 / static_cast<double>(pred.size());
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    g[i] = d > 0 ? inv : d < 0 ? -inv : 0.0;
  }
  return g;
}

// (1/N^2) sum_ij max(0, |t_i - t_j| - e_ij (p_i - p_j)), e_ij = +1 if t_i >= t_j else -1.
// Pairs whose target gap is below `margin` are ignored. Diagonal terms are zero.
inline double rank_loss(std::span<const double> pred, std::span<const double> truth, double margin = 0.0) {
  detail::check_pair(pred, truth);
  const std::size_t n = pred.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = std::abs(truth[i] - truth[j]);
      if (delta < margin) continue;
      const double e = truth[i] >= truth[j] ? 1.0 : -1.0;
      const double h = delta - e * (pred[i] - pred[j]);
      if (h > 0.0) s += h;
    }
  }
  return s / (static_cast<double>(n) * static_cast<double>(n));
}

// Subgradient of rank_loss; a hinge exactly at its kink contributes 0.
inline std::vector<double> rank_grad(std::span<const double> pred, std::span<const double> truth,
                                     double margin = 0.0) {
  detail::check_pair(pred, truth);
  const std::size_t n = pred.size();
  const double inv = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = std::abs(truth[i] - truth[j]);
      if (delta < margin) continue;
      const double e = truth[i] >= truth[j] ? 1.0 : -1.0;
      if (delta - e * (pred[i] - pred[j]) > 0.0) {
        g[i] -= e * inv;
        g[j] += e * inv;
      }
    }
  }
  return g;
}

inline double composite_loss(std::span<const double> pred, std::span<const double> truth, const LossWeights& w) {
  return w.mae_w * mae_loss(pred, truth) + w.rank_w * rank_loss(pred, truth, w.rank_margin);
}

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

inline LossAndGrad composite_loss_grad(std::span<const double> pred, std::span<const double> truth,
                                       const LossWeights& w) {
  LossAndGrad out;
  out.loss = composite_loss(pred, truth, w);
  out.grad.assign(pred.size(), 0.0);
  if (w.mae_w != 0.0) {
    const auto g = mae_grad(pred, truth);
    for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += w.mae_w * g[i];
  }
  if (w.rank_w != 0.0) {
    const auto g = rank_grad(pred, truth, w.rank_margin);
    for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] += w.rank_w * g[i];
  }
  return out;
}

}  // namespace fragvqa
