#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fragvqa/errors.hpp"
#include "fragvqa/mlp.hpp"

namespace fragvqa {

// lr0 * (1 + cos(pi * epoch / epochs)) / 2
inline double cosine_lr(double lr0, int epoch, int epochs) {
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  return lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(epochs))) / 2.0;
}

// SGD with classical momentum and L2 weight decay folded into the gradient:
//   g' = g + wd * w;  buf = momentum * buf + g';  w -= lr * buf
class SgdMomentum {
 public:
  SgdMomentum(const MlpParams& like, double momentum, double weight_decay)
      : buffers_(MlpParams::zeros_like(like)), momentum_(momentum), weight_decay_(weight_decay) {}

  void step(MlpParams& params, const MlpParams& grads, double lr) {
    auto p = params.tensors();
    auto g = grads.tensors();
    auto b = buffers_.tensors();
    for (std::size_t t = 0; t < MlpParams::kTensorCount; ++t) {
      auto& pw = *p[t];
      const auto& gw = *g[t];
      auto& bw = *b[t];
      for (std::size_t i = 0; i < pw.size(); ++i) {
        const double gi = gw[i] + weight_decay_ * pw[i];
        bw[i] = first_ ? gi : momentum_ * bw[i] + gi;
        pw[i] -= lr * bw[i];
      }
    }
    first_ = false;
  }

  const MlpParams& buffers() const noexcept { return buffers_; }

 private:
  MlpParams buffers_;
  double momentum_;
  double weight_decay_;
  bool first_ = true;
};

// Running equal-weight average of parameter snapshots, kept as an exact sum.
class SwaAverager {
 public:
  void add(const MlpParams& params) {
    if (count_ == 0) {
      sum_ = params;
    } else {
      auto s = sum_.tensors();
      auto p = params.tensors();
      for (std::size_t t = 0; t < MlpParams::kTensorCount; ++t) {
        for (std::size_t i = 0; i < s[t]->size(); ++i) (*s[t])[i] += (*p[t])[i];
      }
    }
    ++count_;
  }

  std::size_t count() const noexcept { return count_; }

  MlpParams average() const {
    if (count_ == 0) throw ContractError("SWA average requested before any snapshot");
    MlpParams avg = sum_;
    const double n = static_cast<double>(count_);
    for (auto* t : avg.tensors()) {
      for (auto& v : *t) v /= n;
    }
    return avg;
  }

 private:
  MlpParams sum_;
  std::size_t count_ = 0;
};

}  // namespace fragvqa
