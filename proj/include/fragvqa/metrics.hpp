#pragma once

// Agreement metrics between predicted and subjective scores.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fragvqa/errors.hpp"

namespace fragvqa {

// Raised when a correlation is undefined (constant input, fewer than two samples).
class UndefinedCorrelation : public Error {
 public:
  explicit UndefinedCorrelation(const std::string& what) : Error(ErrorKind::contract, what) {}
};

namespace detail {

inline void check_metric_input(std::span<const double> a, std::span<const double> b, std::size_t min_n) {
  if (a.size() != b.size()) {
    throw ShapeError("metric inputs differ in length: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.size() < min_n) {
    throw UndefinedCorrelation("need at least " + std::to_string(min_n) + " samples, got " +
                               std::to_string(a.size()));
  }
}

}  // namespace detail

// 1-based ranks; tied values share the average of the ranks they span.
inline std::vector<double> fractional_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

inline double plcc(std::span<const double> pred, std::span<const double> truth) {
  detail::check_metric_input(pred, truth, 2);
  const double n = static_cast<double>(pred.size());
  const double ma = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mb = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double da = pred[i] - ma, db = truth[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedCorrelation("correlation undefined for a constant vector");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

inline double srcc(std::span<const double> pred, std::span<const double> truth) {
  detail::check_metric_input(pred, truth, 2);
  const auto ra = fractional_ranks(pred);
  const auto rb = fractional_ranks(truth);
  return plcc(ra, rb);
}

namespace detail {

// Number of inversions in v (pairs i < j with v[i] > v[j]); sorts v.
inline std::int64_t count_inversions(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo,
                                     std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t inv = count_inversions(v, tmp, lo, mid) + count_inversions(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += static_cast<std::int64_t>(mid - i);
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return inv;
}

// Sum over tie groups of t(t-1)/2 for a sorted range, grouping by `same`.
template <typename Same>
std::int64_t tied_pairs(std::size_t n, Same same) {
  std::int64_t total = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && same(i, j)) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

}  // namespace detail

// Kendall tau-b in O(n log n) (Knight's algorithm).
inline double krcc(std::span<const double> pred, std::span<const double> truth) {
  detail::check_metric_input(pred, truth, 2);
  const std::size_t n = pred.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pred[a] != pred[b] ? pred[a] < pred[b] : truth[a] < truth[b];
  });
  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t ties_x =
      detail::tied_pairs(n, [&](std::size_t i, std::size_t j) { return pred[order[i]] == pred[order[j]]; });
  const std::int64_t ties_xy = detail::tied_pairs(n, [&](std::size_t i, std::size_t j) {
    return pred[order[i]] == pred[order[j]] && truth[order[i]] == truth[order[j]];
  });
  std::vector<double> ys(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = truth[order[i]];
  const std::int64_t swaps = detail::count_inversions(ys, tmp, 0, n);
  const std::int64_t ties_y = detail::tied_pairs(n, [&](std::size_t i, std::size_t j) { return ys[i] == ys[j]; });
  const std::int64_t num = n0 - ties_x - ties_y + ties_xy - 2 * swaps;
  const std::int64_t da = n0 - ties_x, db = n0 - ties_y;
  if (da == 0 || db == 0) throw UndefinedCorrelation("Kendall tau undefined: all pairs tied");
  return std::clamp(static_cast<double>(num) / std::sqrt(static_cast<double>(da) * static_cast<double>(db)), -1.0,
                    1.0);
}

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
  detail::check_metric_input(pred, truth, 1);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

struct EvalResult {
  double srcc = 0.0;
  double plcc = 0.0;
  double krcc = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
  std::size_t repeat_index = 0;
};

inline EvalResult evaluate(std::span<const double> pred, std::span<const double> truth, std::size_t repeat = 0) {
  return EvalResult{srcc(pred, truth), plcc(pred, truth), krcc(pred, truth), rmse(pred, truth), pred.size(), repeat};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : (v[m - 1] + v[m]) / 2.0;
}

// Median of each metric taken independently across runs.
inline EvalResult median_result(std::span<const EvalResult> runs) {
  if (runs.empty()) throw ContractError("no evaluation runs");
  auto col = [&](auto member) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(r.*member);
    return median(std::move(v));
  };
  EvalResult out;
  out.srcc = col(&EvalResult::srcc);
  out.plcc = col(&EvalResult::plcc);
  out.krcc = col(&EvalResult::krcc);
  out.rmse = col(&EvalResult::rmse);
  out.n = runs.front().n;
  out.repeat_index = runs.size();
  return out;
}

}  // namespace fragvqa
