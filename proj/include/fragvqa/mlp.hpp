#pragma once

// Three-layer quality regressor: D -> H1 -> H2 -> 1, each hidden layer being
// Linear -> BatchNorm -> GELU -> Dropout, with hand-written backpropagation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fragvqa/errors.hpp"
#include "fragvqa/random.hpp"

namespace fragvqa {

struct MlpShape {
  int input = 0;
  int hidden1 = 256;
  int hidden2 = 128;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

// Trainable parameters. Weight matrices are row-major [out][in].
struct MlpParams {
  std::vector<double> w1, b1, gamma1, beta1;
  std::vector<double> w2, b2, gamma2, beta2;
  std::vector<double> w3, b3;

  static constexpr std::size_t kTensorCount = 10;

  std::array<std::vector<double>*, kTensorCount> tensors() {
    return {&w1, &b1, &gamma1, &beta1, &w2, &b2, &gamma2, &beta2, &w3, &b3};
  }
  std::array<const std::vector<double>*, kTensorCount> tensors() const {
    return {&w1, &b1, &gamma1, &beta1, &w2, &b2, &gamma2, &beta2, &w3, &b3};
  }
  static constexpr std::array<const char*, kTensorCount> names() {
    return {"w1", "b1", "gamma1", "beta1", "w2", "b2", "gamma2", "beta2", "w3", "b3"};
  }

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto* t : tensors()) n += t->size();
    return n;
  }

  static MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    auto dst = z.tensors();
    auto src = p.tensors();
    for (std::size_t i = 0; i < kTensorCount; ++i) dst[i]->assign(src[i]->size(), 0.0);
    return z;
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;
  friend bool operator==(const BatchNormStats&, const BatchNormStats&) = default;
};

enum class Mode { train, eval };

struct MlpModel {
  MlpShape shape;
  MlpParams params;
  BatchNormStats bn1, bn2;
  double dropout_p = 0.1;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  Mode mode = Mode::eval;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

inline double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x * 0.7071067811865476)); }

inline double gelu_grad(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x * 0.7071067811865476));
  const double pdf = 0.3989422804014327 * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

// He-uniform weights (bound sqrt(6 / fan_in)), zero biases, BN gamma = 1, beta = 0,
// running mean 0 / var 1.
inline MlpModel make_mlp(const MlpShape& shape, std::uint64_t seed, double dropout_p = 0.1) {
  if (shape.input < 1 || shape.hidden1 < 1 || shape.hidden2 < 1) throw UsageError("MLP sizes must be positive");
  MlpModel m;
  m.shape = shape;
  m.dropout_p = dropout_p;
  Rng rng(seed);
  auto he = [&](std::vector<double>& w, int fan_out, int fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    w.resize(static_cast<std::size_t>(fan_out) * fan_in);
    for (auto& v : w) v = rng.uniform(-bound, bound);
  };
  auto& p = m.params;
  he(p.w1, shape.hidden1, shape.input);
  p.b1.assign(static_cast<std::size_t>(shape.hidden1), 0.0);
  p.gamma1.assign(static_cast<std::size_t>(shape.hidden1), 1.0);
  p.beta1.assign(static_cast<std::size_t>(shape.hidden1), 0.0);
  he(p.w2, shape.hidden2, shape.hidden1);
  p.b2.assign(static_cast<std::size_t>(shape.hidden2), 0.0);
  p.gamma2.assign(static_cast<std::size_t>(shape.hidden2), 1.0);
  p.beta2.assign(static_cast<std::size_t>(shape.hidden2), 0.0);
  he(p.w3, 1, shape.hidden2);
  p.b3.assign(1, 0.0);
  m.bn1 = {std::vector<double>(static_cast<std::size_t>(shape.hidden1), 0.0),
           std::vector<double>(static_cast<std::size_t>(shape.hidden1), 1.0)};
  m.bn2 = {std::vector<double>(static_cast<std::size_t>(shape.hidden2), 0.0),
           std::vector<double>(static_cast<std::size_t>(shape.hidden2), 1.0)};
  return m;
}

// Row-major batch of feature rows (64-bit working copy).
struct Batch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t r) const { return std::span<const double>(data).subspan(r * cols, cols); }
};

// Activations kept by a train-mode forward pass for backward().
struct ForwardCache {
  std::size_t batch = 0;
  Batch input;
  std::vector<double> xhat1, inv_std1, y1, keep1, out1;
  std::vector<double> xhat2, inv_std2, y2, keep2, out2;
  std::vector<double> pred;
};

struct ForwardOptions {
  Rng* dropout_rng = nullptr;       // null disables dropout even in train mode
  bool update_running_stats = true;
};

namespace detail {

// Dot product with a fixed four-way summation order.
inline double dot4(const double* x, const double* w, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * w[i];
    s1 += x[i + 1] * w[i + 1];
    s2 += x[i + 2] * w[i + 2];
    s3 += x[i + 3] * w[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * w[i];
  return (s0 + s1) + (s2 + s3);
}

// out[b][o] = bias[o] + sum_i in[b][i] * w[o][i]. Rows are taken four at a time so each
// weight row is read once per group rather than once per sample.
inline void affine(std::span<const double> in, std::size_t rows, std::size_t n_in, std::span<const double> w,
                   std::span<const double> bias, std::size_t n_out, std::vector<double>& out) {
  out.assign(rows * n_out, 0.0);
  constexpr std::size_t kGroup = 4;
  for (std::size_t b0 = 0; b0 < rows; b0 += kGroup) {
    const std::size_t b1 = std::min(rows, b0 + kGroup);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* wr = w.data() + o * n_in;
      for (std::size_t b = b0; b < b1; ++b) out[b * n_out + o] = bias[o] + dot4(in.data() + b * n_in, wr, n_in);
    }
  }
}

struct HiddenLayer {
  std::span<const double> w, bias, gamma, beta;
  const BatchNormStats* stats;  // running statistics, read in eval mode
  BatchNormStats* update;       // running statistics to update in train mode, may be null
  std::size_t n_in, n_out;
};

// Linear -> BN -> GELU -> Dropout for one hidden layer.
inline void hidden_forward(const MlpModel& m, Mode mode, const HiddenLayer& L, std::span<const double> in,
                           std::size_t rows, const ForwardOptions& opt, std::vector<double>& xhat,
                           std::vector<double>& inv_std, std::vector<double>& y, std::vector<double>& keep, std::vector<double>& out) {
  std::vector<double> z;
  affine(in, rows, L.n_in, L.w, L.bias, L.n_out, z);
  xhat.assign(rows * L.n_out, 0.0);
  inv_std.assign(L.n_out, 0.0);
  const bool train = mode == Mode::train;
  for (std::size_t o = 0; o < L.n_out; ++o) {
    double mu, var;
    if (train) {
      double s = 0.0;
      for (std::size_t b = 0; b < rows; ++b) s += z[b * L.n_out + o];
      mu = s / static_cast<double>(rows);
      double ss = 0.0;
      for (std::size_t b = 0; b < rows; ++b) {
        const double d = z[b * L.n_out + o] - mu;
        ss += d * d;
      }
      var = ss / static_cast<double>(rows);
      if (opt.update_running_stats && L.update) {
        const double unbiased = ss / static_cast<double>(rows - 1);
        L.update->mean[o] = (1.0 - m.bn_momentum) * L.update->mean[o] + m.bn_momentum * mu;
        L.update->var[o] = (1.0 - m.bn_momentum) * L.update->var[o] + m.bn_momentum * unbiased;
      }
    } else {
      mu = L.stats->mean[o];
      var = L.stats->var[o];
    }
    const double is = 1.0 / std::sqrt(var + m.bn_eps);
    inv_std[o] = is;
    for (std::size_t b = 0; b < rows; ++b) xhat[b * L.n_out + o] = (z[b * L.n_out + o] - mu) * is;
  }
  y.resize(rows * L.n_out);
  out.resize(rows * L.n_out);
  keep.assign(rows * L.n_out, 1.0);
  const bool drop = train && opt.dropout_rng != nullptr && m.dropout_p > 0.0;
  const double scale = drop ? 1.0 / (1.0 - m.dropout_p) : 1.0;
  for (std::size_t b = 0; b < rows; ++b) {
    for (std::size_t o = 0; o < L.n_out; ++o) {
      const std::size_t k = b * L.n_out + o;
      y[k] = L.gamma[o] * xhat[k] + L.beta[o];
      if (drop) keep[k] = opt.dropout_rng->uniform() >= m.dropout_p ? scale : 0.0;
      out[k] = gelu(y[k]) * keep[k];
    }
  }
}

// Backward through Dropout -> GELU -> BN -> Linear. Returns d(loss)/d(input).
inline std::vector<double> hidden_backward(const HiddenLayer& L, std::span<const double> in, std::size_t rows,
                                           const std::vector<double>& xhat, const std::vector<double>& inv_std,
                                           const std::vector<double>& y, const std::vector<double>& keep,
                                           std::vector<double> d_out, std::vector<double>& gw,
                                           std::vector<double>& gb, std::vector<double>& ggamma,
                                           std::vector<double>& gbeta, bool need_input_grad) {
  const std::size_t n = L.n_out;
  // d_out becomes dL/dy.
  for (std::size_t k = 0; k < d_out.size(); ++k) d_out[k] *= keep[k] * gelu_grad(y[k]);
  std::vector<double> dz(rows * n);
  const double inv_b = 1.0 / static_cast<double>(rows);
  for (std::size_t o = 0; o < n; ++o) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < rows; ++b) {
      const std::size_t k = b * n + o;
      sum_dy += d_out[k];
      sum_dy_xhat += d_out[k] * xhat[k];
    }
    ggamma[o] += sum_dy_xhat;
    gbeta[o] += sum_dy;
    // dxhat = dy * gamma; dz = inv_std / B * (B dxhat - sum dxhat - xhat sum(dxhat xhat))
    const double g = L.gamma[o];
    for (std::size_t b = 0; b < rows; ++b) {
      const std::size_t k = b * n + o;
      dz[k] = g * inv_std[o] * inv_b *
              (static_cast<double>(rows) * d_out[k] - sum_dy - xhat[k] * sum_dy_xhat);
    }
  }
  // Weight gradients accumulate over the batch in sample order; outputs are processed in
  // groups so each input row is read once per group.
  constexpr std::size_t kGroup = 8;
  for (std::size_t o0 = 0; o0 < n; o0 += kGroup) {
    const std::size_t o1 = std::min(n, o0 + kGroup);
    for (std::size_t b = 0; b < rows; ++b) {
      const double* x = in.data() + b * L.n_in;
      for (std::size_t o = o0; o < o1; ++o) {
        const double d = dz[b * n + o];
        double* gwr = gw.data() + o * L.n_in;
        for (std::size_t i = 0; i < L.n_in; ++i) gwr[i] += d * x[i];
      }
    }
    for (std::size_t o = o0; o < o1; ++o) {
      double sb = 0.0;
      for (std::size_t b = 0; b < rows; ++b) sb += dz[b * n + o];
      gb[o] += sb;
    }
  }
  std::vector<double> d_in;
  if (need_input_grad) {
    d_in.assign(rows * L.n_in, 0.0);
    for (std::size_t b = 0; b < rows; ++b) {
      double* di = d_in.data() + b * L.n_in;
      for (std::size_t o = 0; o < n; ++o) {
        const double d = dz[b * n + o];
        const double* wr = L.w.data() + o * L.n_in;
        for (std::size_t i = 0; i < L.n_in; ++i) di[i] += d * wr[i];
      }
    }
  }
  return d_in;
}

inline void check_input(const MlpModel& m, Mode mode, const Batch& x) {
  if (x.cols != static_cast<std::size_t>(m.shape.input)) {
    throw ShapeError("feature dimension " + std::to_string(x.cols) + " does not match model input " +
                     std::to_string(m.shape.input));
  }
  if (x.rows == 0) throw ContractError("empty batch");
  if (mode == Mode::train && x.rows < 2) {
    throw ContractError("train-mode forward needs a batch of at least 2 (batch-norm statistics)");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw FormatError("non-finite value in regressor input");
  }
}

inline ForwardCache forward_impl(const MlpModel& m, Mode mode, BatchNormStats* up1, BatchNormStats* up2,
                                const Batch& x, const ForwardOptions& opt) {
  check_input(m, mode, x);
  const auto& p = m.params;
  ForwardCache c;
  c.batch = x.rows;
  c.input = x;
  const auto h1 = static_cast<std::size_t>(m.shape.hidden1);
  const auto h2 = static_cast<std::size_t>(m.shape.hidden2);
  HiddenLayer l1{p.w1, p.b1, p.gamma1, p.beta1, &m.bn1, up1, x.cols, h1};
  hidden_forward(m, mode, l1, x.data, x.rows, opt, c.xhat1, c.inv_std1, c.y1, c.keep1, c.out1);
  HiddenLayer l2{p.w2, p.b2, p.gamma2, p.beta2, &m.bn2, up2, h1, h2};
  hidden_forward(m, mode, l2, c.out1, x.rows, opt, c.xhat2, c.inv_std2, c.y2, c.keep2, c.out2);
  affine(c.out2, x.rows, h2, p.w3, p.b3, 1, c.pred);
  return c;
}

}  // namespace detail

// Forward pass. In train mode BN uses batch statistics (optionally updating running
// statistics) and dropout is applied when a dropout RNG is supplied.
inline ForwardCache forward(MlpModel& m, const Batch& x, const ForwardOptions& opt = {}) {
  return detail::forward_impl(m, m.mode, &m.bn1, &m.bn2, x, opt);
}

// Eval-mode prediction; never mutates the model.
inline std::vector<double> predict_batch(const MlpModel& model, const Batch& x) {
  return detail::forward_impl(model, Mode::eval, nullptr, nullptr, x, {}).pred;
}

// Gradients of the loss given dL/dpred for a cached train-mode forward pass.
inline MlpParams backward(const MlpModel& m, const ForwardCache& c, std::span<const double> d_pred) {
  if (d_pred.size() != c.batch) throw ShapeError("gradient length does not match batch");
  const auto& p = m.params;
  MlpParams g = MlpParams::zeros_like(p);
  const std::size_t rows = c.batch;
  const auto h1 = static_cast<std::size_t>(m.shape.hidden1);
  const auto h2 = static_cast<std::size_t>(m.shape.hidden2);
  std::vector<double> d_out2(rows * h2);
  for (std::size_t b = 0; b < rows; ++b) {
    g.b3[0] += d_pred[b];
    for (std::size_t o = 0; o < h2; ++o) {
      g.w3[o] += d_pred[b] * c.out2[b * h2 + o];
      d_out2[b * h2 + o] = d_pred[b] * p.w3[o];
    }
  }
  detail::HiddenLayer l2{p.w2, p.b2, p.gamma2, p.beta2, nullptr, nullptr, h1, h2};
  auto d_out1 = detail::hidden_backward(l2, c.out1, rows, c.xhat2, c.inv_std2, c.y2, c.keep2, std::move(d_out2),
                                        g.w2, g.b2, g.gamma2, g.beta2, true);
  detail::HiddenLayer l1{p.w1, p.b1, p.gamma1, p.beta1, nullptr, nullptr, c.input.cols, h1};
  detail::hidden_backward(l1, c.input.data, rows, c.xhat1, c.inv_std1, c.y1, c.keep1, std::move(d_out1), g.w1,
                          g.b1, g.gamma1, g.beta1, false);
  return g;
}

}  // namespace fragvqa
