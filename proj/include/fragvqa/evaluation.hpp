#pragma once

// Repeated-split and k-fold evaluation harnesses.

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "fragvqa/errors.hpp"
#include "fragvqa/metrics.hpp"
#include "fragvqa/train.hpp"

namespace fragvqa {

inline constexpr std::size_t kDefaultRepeats = 21;

struct RepeatedEval {
  EvalResult median;
  std::vector<EvalResult> runs;
};

// Trains on a seeded split and scores the held-out side. Exposed so the repetition
// logic can be exercised with an injected runner.
using SplitRunner = std::function<EvalResult(std::size_t repeat_index, std::uint64_t seed)>;

inline RepeatedEval repeated_eval(std::size_t repeats, std::uint64_t seed_base, const SplitRunner& run) {
  if (repeats < 1) throw UsageError("repeats must be >= 1");
  RepeatedEval out;
  for (std::size_t r = 0; r < repeats; ++r) {
    EvalResult e = run(r, seed_base + r);
    e.repeat_index = r;
    out.runs.push_back(e);
  }
  out.median = median_result(out.runs);
  return out;
}

// Outer split (cfg.split for training, remainder for test) per repeat; the training
// side is split again internally for checkpoint selection.
inline RepeatedEval repeated_eval(const FeatureMatrix& x, std::span<const double> labels, const TrainConfig& cfg,
                                  std::size_t repeats = kDefaultRepeats) {
  if (labels.size() != x.rows) throw ShapeError("label count does not match feature rows");
  return repeated_eval(repeats, cfg.seed, [&](std::size_t, std::uint64_t seed) {
    const Split outer = split_indices(x.rows, cfg.split, seed);
    if (outer.test.size() < 2) throw UsageError("test split needs at least 2 items");
    TrainConfig c = cfg;
    c.seed = seed;
    FeatureMatrix xt;
    for (auto i : outer.train) xt.push_row(x.row(i));
    const auto yt = gather(labels, outer.train);
    const TrainResult tr = train(xt, yt, c);
    const auto pred = predict_batch(tr.model, gather(x, outer.test));
    return evaluate(pred, gather(labels, outer.test));
  });
}

// k-fold cross-validation; fold f holds out every index whose shuffled position is
// congruent to f modulo k. Returns the per-fold results and their per-metric median.
inline RepeatedEval kfold_eval(const FeatureMatrix& x, std::span<const double> labels, const TrainConfig& cfg,
                               std::size_t k) {
  if (k < 2) throw UsageError("k-fold needs k >= 2");
  if (labels.size() != x.rows) throw ShapeError("label count does not match feature rows");
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.seed);
  rng.shuffle(std::span<std::size_t>(order));
  return repeated_eval(k, cfg.seed, [&](std::size_t fold, std::uint64_t seed) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i = 0; i < order.size(); ++i) (i % k == fold ? te : tr).push_back(order[i]);
    if (te.size() < 2) throw UsageError("each fold needs at least 2 items");
    TrainConfig c = cfg;
    c.seed = seed;
    FeatureMatrix xt;
    for (auto i : tr) xt.push_row(x.row(i));
    const auto yt = gather(labels, tr);
    const TrainResult result = train(xt, yt, c);
    const auto pred = predict_batch(result.model, gather(x, te));
    return evaluate(pred, gather(labels, te));
  });
}

}  // namespace fragvqa
