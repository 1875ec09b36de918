#pragma once

// Regressor training: seeded train/validation split, minibatch SGD with momentum and
// weight decay, cosine learning-rate decay, stochastic weight averaging over the final
// epochs, and best-checkpoint selection on validation RMSE.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fragvqa/errors.hpp"
#include "fragvqa/loss.hpp"
#include "fragvqa/metrics.hpp"
#include "fragvqa/mlp.hpp"
#include "fragvqa/optim.hpp"
#include "fragvqa/random.hpp"

namespace fragvqa {

struct TrainConfig {
  int epochs = 200;
  double lr0 = 1e-2;
  double weight_decay = 5e-4;
  double momentum = 0.9;
  std::size_t batch_size = 256;
  double mae_w = 0.6;
  double rank_w = 1.0;
  double rank_margin = 0.0;
  double swa_start_frac = 0.75;
  std::uint64_t seed = 0;
  double split = 0.8;
  double dropout = 0.1;
  int hidden1 = 256;
  int hidden2 = 128;

  LossWeights loss_weights() const { return {mae_w, rank_w, rank_margin}; }

  // Settings for training from scratch on a large corpus.
  static TrainConfig large_scale() {
    TrainConfig c;
    c.epochs = 50;
    c.lr0 = 1e-1;
    c.weight_decay = 5e-3;
    return c;
  }
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw UsageError("epochs must be >= 1");
  if (!(c.split > 0.0 && c.split < 1.0)) throw UsageError("split must lie in (0, 1)");
  if (c.mae_w < 0.0 || c.rank_w < 0.0) throw UsageError("loss weights must be non-negative");
  if (c.rank_margin < 0.0) throw UsageError("rank margin must be non-negative");
  if (!(c.lr0 > 0.0)) throw UsageError("learning rate must be positive");
  if (c.weight_decay < 0.0 || c.momentum < 0.0) throw UsageError("weight decay and momentum must be >= 0");
  if (c.batch_size < 2) throw UsageError("batch size must be >= 2");
  if (c.swa_start_frac < 0.0 || c.swa_start_frac > 1.0) throw UsageError("swa_start_frac must lie in [0, 1]");
  if (c.dropout < 0.0 || c.dropout >= 1.0) throw UsageError("dropout must lie in [0, 1)");
}

// Learning rate used during `epoch`: cosine decay, held at lr0 once SWA has started.
inline int swa_start_epoch(const TrainConfig& c) {
  return static_cast<int>(std::ceil(c.swa_start_frac * c.epochs));
}

inline double scheduled_lr(const TrainConfig& c, int epoch) {
  return epoch >= swa_start_epoch(c) ? c.lr0 : cosine_lr(c.lr0, epoch, c.epochs);
}

// Float feature rows, one per video.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  std::span<const float> row(std::size_t r) const { return std::span<const float>(data).subspan(r * cols, cols); }

  void push_row(std::span<const float> v) {
    if (rows == 0 && cols == 0) cols = v.size();
    if (v.size() != cols) throw ShapeError("feature row length mismatch");
    data.insert(data.end(), v.begin(), v.end());
    ++rows;
  }
};

inline Batch gather(const FeatureMatrix& x, std::span<const std::size_t> idx) {
  Batch b;
  b.rows = idx.size();
  b.cols = x.cols;
  b.data.resize(b.rows * b.cols);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = x.row(idx[r]);
    std::copy(src.begin(), src.end(), b.data.begin() + static_cast<std::ptrdiff_t>(r * b.cols));
  }
  return b;
}

inline std::vector<double> gather(std::span<const double> y, std::span<const std::size_t> idx) {
  std::vector<double> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(y[i]);
  return out;
}

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle, first round(fraction * n) items go to the training side.
inline Split split_indices(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)), idx.end());
  return s;
}

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_rmse = 0.0;
  double val_srcc = 0.0;  // NaN when undefined (constant predictions)
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> log;
  std::string selected;  // "swa" or "best"
  double best_val_rmse = 0.0;
  int best_epoch = -1;
  double swa_val_rmse = std::numeric_limits<double>::quiet_NaN();
  Split split;
};

inline double safe_srcc(std::span<const double> a, std::span<const double> b) {
  try {
    return srcc(a, b);
  } catch (const UndefinedCorrelation&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

// Replaces BN running statistics with those of one full pass over `x` (no dropout).
inline void recompute_bn_stats(MlpModel& m, const Batch& x) {
  m.mode = Mode::train;
  m.bn_momentum = 1.0;
  forward(m, x, ForwardOptions{nullptr, true});
  m.bn_momentum = 0.1;
  m.mode = Mode::eval;
}

// Minibatch boundaries; a trailing batch of one sample is merged into its predecessor.
inline std::vector<std::pair<std::size_t, std::size_t>> minibatches(std::size_t n, std::size_t batch) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t lo = 0; lo < n; lo += batch) out.emplace_back(lo, std::min(n, lo + batch));
  if (out.size() > 1 && out.back().second - out.back().first == 1) {
    out.pop_back();
    out.back().second = n;
  }
  return out;
}

inline TrainResult train(const FeatureMatrix& x, std::span<const double> labels, const TrainConfig& cfg) {
  validate(cfg);
  if (labels.size() != x.rows) throw ShapeError("label count does not match feature rows");
  if (x.rows < 4) throw UsageError("training needs at least 4 labelled videos, got " + std::to_string(x.rows));
  for (double y : labels) {
    if (!std::isfinite(y)) throw FormatError("non-finite label");
  }

  TrainResult result;
  result.split = split_indices(x.rows, cfg.split, cfg.seed);
  const auto& tr = result.split.train;
  const auto& va = result.split.test;
  if (va.size() < 2) {
    throw UsageError("validation split has " + std::to_string(va.size()) + " item(s); at least 2 are required");
  }
  if (tr.size() < 2) throw UsageError("training split needs at least 2 items");

  const Batch train_all = gather(x, tr);
  const Batch val_x = gather(x, va);
  const auto val_y = gather(labels, va);

  MlpModel model = make_mlp({static_cast<int>(x.cols), cfg.hidden1, cfg.hidden2}, cfg.seed ^ 0x9e3779b97f4a7c15ull,
                            cfg.dropout);
  SgdMomentum opt(model.params, cfg.momentum, cfg.weight_decay);
  SwaAverager swa;
  Rng rng(cfg.seed + 1);
  const auto weights = cfg.loss_weights();
  const int swa_start = swa_start_epoch(cfg);

  MlpModel best = model;
  result.best_val_rmse = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order = tr;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = scheduled_lr(cfg, epoch);
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    model.mode = Mode::train;
    for (auto [lo, hi] : minibatches(order.size(), cfg.batch_size)) {
      std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      const Batch bx = gather(x, idx);
      const auto by = gather(labels, idx);
      const auto cache = forward(model, bx, ForwardOptions{&rng, true});
      const auto lg = composite_loss_grad(cache.pred, by, weights);
      loss_sum += lg.loss * static_cast<double>(idx.size());
      opt.step(model.params, backward(model, cache, lg.grad), lr);
    }
    model.mode = Mode::eval;

    const auto val_pred = predict_batch(model, val_x);
    EpochLog entry{epoch, lr, loss_sum / static_cast<double>(order.size()), rmse(val_pred, val_y),
                   safe_srcc(val_pred, val_y)};
    result.log.push_back(entry);
    if (entry.val_rmse < result.best_val_rmse) {
      result.best_val_rmse = entry.val_rmse;
      result.best_epoch = epoch;
      best = model;
    }
    if (epoch >= swa_start) swa.add(model.params);
  }

  result.model = best;
  result.selected = "best";
  if (swa.count() > 0) {
    MlpModel swa_model = model;
    swa_model.params = swa.average();
    recompute_bn_stats(swa_model, train_all);
    result.swa_val_rmse = rmse(predict_batch(swa_model, val_x), val_y);
    if (result.swa_val_rmse <= result.best_val_rmse) {
      result.model = std::move(swa_model);
      result.selected = "swa";
    }
  }
  result.model.mode = Mode::eval;
  return result;
}

inline std::vector<double> predict(const MlpModel& model, const FeatureMatrix& x) {
  std::vector<std::size_t> idx(x.rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return predict_batch(model, gather(x, idx));
}

inline double predict(const MlpModel& model, std::span<const float> features) {
  Batch b;
  b.rows = 1;
  b.cols = features.size();
  b.data.assign(features.begin(), features.end());
  return predict_batch(model, b).front();
}

}  // namespace fragvqa
