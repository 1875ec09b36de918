#pragma once

// Independent reference implementations used to check the library. Everything here is
// written from the definitions, favouring obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "fragvqa/image.hpp"
#include "fragvqa/mlp.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Fragmentation

inline std::vector<std::uint64_t> patch_sums(const fragvqa::Image& cur, const fragvqa::Image& prev, int p) {
  std::vector<std::uint64_t> out;
  for (int r = 0; r + p <= cur.height(); r += p) {
    for (int c = 0; c + p <= cur.width(); c += p) {
      std::uint64_t s = 0;
      for (int y = r; y < r + p; ++y)
        for (int x = c; x < c + p; ++x)
          for (int k = 0; k < 3; ++k) {
            const int d = cur.at(x, y, k) - prev.at(x, y, k);
            s += static_cast<std::uint64_t>(d < 0 ? -d : d);
          }
      out.push_back(s);
    }
  }
  return out;
}

// Raster indices of the top t patches: full sort on (score desc, index asc), cyclic wrap.
inline std::vector<std::size_t> top_indices(const std::vector<std::uint64_t>& scores, std::size_t t) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < t; ++k) out.push_back(idx[k % idx.size()]);
  return out;
}

inline std::uint64_t ceil_div_brute(std::uint64_t a, std::uint64_t b) {
  std::uint64_t q = 0;
  while (q * b < a) ++q;
  return q;
}

// ---------------------------------------------------------------------------
// Metrics

inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      if (w < v[i]) ++less;
      if (w == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

// Tau-b by enumerating all pairs with integer counts.
inline double kendall(const std::vector<double>& a, const std::vector<double>& b) {
  long long conc = 0, disc = 0, tie_a = 0, tie_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const int sa = (a[i] > a[j]) - (a[i] < a[j]);
      const int sb = (b[i] > b[j]) - (b[i] < b[j]);
      if (sa == 0) ++tie_a;
      if (sb == 0) ++tie_b;
      if (sa != 0 && sb != 0) (sa == sb ? conc : disc)++;
    }
  }
  const long long n0 = static_cast<long long>(a.size() * (a.size() - 1) / 2);
  return static_cast<double>(conc - disc) /
         std::sqrt(static_cast<double>(n0 - tie_a) * static_cast<double>(n0 - tie_b));
}

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// Losses, written straight from the formulas.

inline double mae(const std::vector<double>& p, const std::vector<double>& t) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::fabs(p[i] - t[i]);
  return s / static_cast<double>(p.size());
}

inline double rank(const std::vector<double>& p, const std::vector<double>& t, double margin = 0.0) {
  const double n = static_cast<double>(p.size());
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double delta = std::fabs(t[i] - t[j]);
      if (delta < margin) continue;
      const double e = t[i] >= t[j] ? 1.0 : -1.0;
      s += std::max(0.0, delta - e * (p[i] - p[j]));
    }
  }
  return s / (n * n);
}

inline double composite(const std::vector<double>& p, const std::vector<double>& t, double mae_w, double rank_w) {
  return mae_w * mae(p, t) + rank_w * rank(p, t);
}

// ---------------------------------------------------------------------------
// MLP

inline double gelu(double x) { return 0.5 * x * std::erfc(-x / std::sqrt(2.0)); }

// Activations of one forward pass, kept per unit so single-parameter perturbations can be
// propagated without recomputing everything.
struct MlpTrace {
  std::size_t batch = 0, d = 0, h1 = 0, h2 = 0;
  std::vector<std::vector<double>> z1, a1;  // [unit][sample]
  std::vector<std::vector<double>> z2, a2;
  std::vector<double> pred;
};

// Batch-norm (batch statistics or running statistics) -> affine -> GELU for one unit.
inline std::vector<double> bn_gelu(const std::vector<double>& z, double gamma, double beta, bool batch_stats,
                                   double run_mean, double run_var, double eps) {
  double mu = run_mean, var = run_var;
  if (batch_stats) {
    mu = 0;
    for (double v : z) mu += v;
    mu /= static_cast<double>(z.size());
    var = 0;
    for (double v : z) var += (v - mu) * (v - mu);
    var /= static_cast<double>(z.size());
  }
  std::vector<double> out(z.size());
  for (std::size_t b = 0; b < z.size(); ++b) out[b] = gelu(gamma * (z[b] - mu) / std::sqrt(var + eps) + beta);
  return out;
}

// Straight-line forward pass without dropout. `batch_stats` selects train-mode BN.
inline MlpTrace forward(const fragvqa::MlpModel& m, const std::vector<std::vector<double>>& x, bool batch_stats) {
  const auto& p = m.params;
  MlpTrace t;
  t.batch = x.size();
  t.d = static_cast<std::size_t>(m.shape.input);
  t.h1 = static_cast<std::size_t>(m.shape.hidden1);
  t.h2 = static_cast<std::size_t>(m.shape.hidden2);
  t.z1.assign(t.h1, std::vector<double>(t.batch));
  for (std::size_t u = 0; u < t.h1; ++u)
    for (std::size_t b = 0; b < t.batch; ++b) {
      double s = p.b1[u];
      for (std::size_t i = 0; i < t.d; ++i) s += p.w1[u * t.d + i] * x[b][i];
      t.z1[u][b] = s;
    }
  for (std::size_t u = 0; u < t.h1; ++u)
    t.a1.push_back(bn_gelu(t.z1[u], p.gamma1[u], p.beta1[u], batch_stats, m.bn1.mean[u], m.bn1.var[u], m.bn_eps));
  t.z2.assign(t.h2, std::vector<double>(t.batch));
  for (std::size_t u = 0; u < t.h2; ++u)
    for (std::size_t b = 0; b < t.batch; ++b) {
      double s = p.b2[u];
      for (std::size_t i = 0; i < t.h1; ++i) s += p.w2[u * t.h1 + i] * t.a1[i][b];
      t.z2[u][b] = s;
    }
  for (std::size_t u = 0; u < t.h2; ++u)
    t.a2.push_back(bn_gelu(t.z2[u], p.gamma2[u], p.beta2[u], batch_stats, m.bn2.mean[u], m.bn2.var[u], m.bn_eps));
  t.pred.assign(t.batch, p.b3[0]);
  for (std::size_t b = 0; b < t.batch; ++b)
    for (std::size_t u = 0; u < t.h2; ++u) t.pred[b] += p.w3[u] * t.a2[u][b];
  return t;
}

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_abs = 0.0;
  double worst_rel = 0.0;
  std::string worst_name;
};

// Central finite differences of the composite loss (train-mode BN, no dropout) for every
// parameter, compared against `analytic`. Each perturbed loss is evaluated exactly, but only
// the units downstream of the perturbed parameter are recomputed.
inline GradCheckResult finite_difference_check(const fragvqa::MlpModel& model,
                                               const std::vector<std::vector<double>>& x,
                                               const std::vector<double>& y, double mae_w, double rank_w,
                                               const fragvqa::MlpParams& analytic, double eps, double abs_tol,
                                               double rel_tol) {
  fragvqa::MlpModel m = model;
  const MlpTrace base = forward(m, x, true);
  const std::size_t B = base.batch, D = base.d, H1 = base.h1, H2 = base.h2;
  auto& p = m.params;

  auto loss_of = [&](const std::vector<double>& pred) { return composite(pred, y, mae_w, rank_w); };

  // Layer-2 unit u recomputed from a modified z2 column.
  auto pred_with_unit2 = [&](std::size_t u, const std::vector<double>& z2u) {
    const auto a2u = bn_gelu(z2u, p.gamma2[u], p.beta2[u], true, 0, 1, m.bn_eps);
    std::vector<double> pred = base.pred;
    for (std::size_t b = 0; b < B; ++b) pred[b] += p.w3[u] * (a2u[b] - base.a2[u][b]);
    return pred;
  };
  // Layer-1 unit u recomputed from a modified z1 column, then all of layer 2.
  auto pred_with_unit1 = [&](std::size_t u, const std::vector<double>& z1u) {
    const auto a1u = bn_gelu(z1u, p.gamma1[u], p.beta1[u], true, 0, 1, m.bn_eps);
    std::vector<double> pred(B, p.b3[0]);
    for (std::size_t v = 0; v < H2; ++v) {
      std::vector<double> z2v = base.z2[v];
      for (std::size_t b = 0; b < B; ++b) z2v[b] += p.w2[v * H1 + u] * (a1u[b] - base.a1[u][b]);
      const auto a2v = bn_gelu(z2v, p.gamma2[v], p.beta2[v], true, 0, 1, m.bn_eps);
      for (std::size_t b = 0; b < B; ++b) pred[b] += p.w3[v] * a2v[b];
    }
    return pred;
  };
  auto pred_full_layer3 = [&]() {
    std::vector<double> pred(B, p.b3[0]);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t v = 0; v < H2; ++v) pred[b] += p.w3[v] * base.a2[v][b];
    return pred;
  };

  GradCheckResult res;
  auto check = [&](const std::string& name, double& param, double grad, const std::function<std::vector<double>()>& eval) {
    const double saved = param;
    param = saved + eps;
    const double lp = loss_of(eval());
    param = saved - eps;
    const double lm = loss_of(eval());
    param = saved;
    const double fd = (lp - lm) / (2 * eps);
    const double abs_err = std::fabs(fd - grad);
    const double rel_err = abs_err / std::max(std::fabs(fd), std::fabs(grad));
    ++res.checked;
    const bool ok = abs_err <= abs_tol || rel_err <= rel_tol;
    if (!ok) ++res.failures;
    if (abs_err > res.worst_abs) {
      res.worst_abs = abs_err;
      res.worst_rel = std::isfinite(rel_err) ? rel_err : 0.0;
      res.worst_name = name;
    }
  };

  const auto& g = analytic;
  for (std::size_t u = 0; u < H1; ++u) {
    for (std::size_t i = 0; i < D; ++i) {
      check("w1[" + std::to_string(u) + "," + std::to_string(i) + "]", p.w1[u * D + i], g.w1[u * D + i], [&] {
        std::vector<double> z = base.z1[u];
        const double dw = p.w1[u * D + i] - model.params.w1[u * D + i];
        for (std::size_t b = 0; b < B; ++b) z[b] += dw * x[b][i];
        return pred_with_unit1(u, z);
      });
    }
    check("b1[" + std::to_string(u) + "]", p.b1[u], g.b1[u], [&] {
      std::vector<double> z = base.z1[u];
      for (auto& v : z) v += p.b1[u] - model.params.b1[u];
      return pred_with_unit1(u, z);
    });
    check("gamma1[" + std::to_string(u) + "]", p.gamma1[u], g.gamma1[u], [&] { return pred_with_unit1(u, base.z1[u]); });
    check("beta1[" + std::to_string(u) + "]", p.beta1[u], g.beta1[u], [&] { return pred_with_unit1(u, base.z1[u]); });
  }
  for (std::size_t u = 0; u < H2; ++u) {
    for (std::size_t i = 0; i < H1; ++i) {
      check("w2[" + std::to_string(u) + "," + std::to_string(i) + "]", p.w2[u * H1 + i], g.w2[u * H1 + i], [&] {
        std::vector<double> z = base.z2[u];
        const double dw = p.w2[u * H1 + i] - model.params.w2[u * H1 + i];
        for (std::size_t b = 0; b < B; ++b) z[b] += dw * base.a1[i][b];
        return pred_with_unit2(u, z);
      });
    }
    check("b2[" + std::to_string(u) + "]", p.b2[u], g.b2[u], [&] {
      std::vector<double> z = base.z2[u];
      for (auto& v : z) v += p.b2[u] - model.params.b2[u];
      return pred_with_unit2(u, z);
    });
    check("gamma2[" + std::to_string(u) + "]", p.gamma2[u], g.gamma2[u], [&] { return pred_with_unit2(u, base.z2[u]); });
    check("beta2[" + std::to_string(u) + "]", p.beta2[u], g.beta2[u], [&] { return pred_with_unit2(u, base.z2[u]); });
    check("w3[" + std::to_string(u) + "]", p.w3[u], g.w3[u], pred_full_layer3);
  }
  check("b3", p.b3[0], g.b3[0], pred_full_layer3);
  return res;
}

}  // namespace oracle
