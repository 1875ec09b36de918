#pragma once

// Feature backends: a neutral boundary between the pipeline and the pretrained motion /
// spatial backbones. The toy backend is a closed-form stand-in with the same shapes;
// the neural backend runs exported ONNX graphs when ONNX Runtime is available.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragvqa/errors.hpp"
#include "fragvqa/image.hpp"

#if defined(FRAGVQA_WITH_ONNXRUNTIME)
#include <onnxruntime_cxx_api.h>
#endif

namespace fragvqa {

enum class BackendKind { toy_deterministic, neural_interchange };

struct BackendSpec {
  BackendKind kind = BackendKind::toy_deterministic;
  std::filesystem::path model_path;  // models directory (neural only)
  int slow_dim = 2048;
  int fast_dim = 256;
  int spatial_dim = 1024;
  int input_size = 224;
  int clip_len = 32;
  int slow_subsample = 4;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};

  int motion_dim() const noexcept { return slow_dim + fast_dim; }
  int fused_dim() const noexcept { return 3 * (motion_dim() + spatial_dim); }
};

inline void validate(const BackendSpec& spec) {
  if (spec.slow_dim < 1 || spec.fast_dim < 1 || spec.spatial_dim < 1) {
    throw UsageError("backend feature dimensions must be positive");
  }
  if (spec.input_size < 1) throw UsageError("backend input size must be positive");
  if (spec.clip_len < 1) throw UsageError("clip length must be positive");
  if (spec.slow_subsample < 1 || spec.slow_subsample > spec.clip_len) {
    throw UsageError("slow subsample must lie in [1, clip_len]");
  }
  for (double s : spec.std) {
    if (!(s > 0.0)) throw UsageError("normalization std must be positive");
  }
}

// Reads <models_dir>/manifest.json into a spec.
inline BackendSpec load_manifest(const std::filesystem::path& models_dir, BackendSpec base = {}) {
  const auto path = models_dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw BackendError("model manifest not found: " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    base.kind = BackendKind::neural_interchange;
    base.model_path = models_dir;
    base.spatial_dim = j.at("spatial_dim").get<int>();
    base.clip_len = j.value("clip_len", 32);
    base.slow_subsample = j.value("slow_subsample", 4);
    base.slow_dim = j.value("slow_dim", 2048);
    base.fast_dim = j.value("fast_dim", 256);
    base.input_size = j.value("input_size", base.input_size);
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto stdv = j.at("std").get<std::vector<double>>();
    if (mean.size() != 3 || stdv.size() != 3) throw BackendError("manifest mean/std must have 3 entries");
    for (int c = 0; c < 3; ++c) {
      base.mean[static_cast<std::size_t>(c)] = mean[static_cast<std::size_t>(c)];
      base.std[static_cast<std::size_t>(c)] = stdv[static_cast<std::size_t>(c)];
    }
    return base;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError("bad model manifest " + path.string() + ": " + e.what());
  }
}

// Uniform index rounding from `length` source frames to `target` output frames.
inline std::vector<std::size_t> temporal_indices(std::size_t length, std::size_t target) {
  std::vector<std::size_t> idx(target);
  for (std::size_t j = 0; j < target; ++j) {
    const auto i = static_cast<std::size_t>(std::floor((static_cast<double>(j) + 0.5) * length / target));
    idx[j] = std::min(i, length - 1);
  }
  return idx;
}

class FeatureBackend {
 public:
  explicit FeatureBackend(BackendSpec spec) : spec_(std::move(spec)) { validate(spec_); }
  virtual ~FeatureBackend() = default;

  const BackendSpec& spec() const noexcept { return spec_; }
  virtual std::string id() const = 0;

  // Slow and fast pathway features, pooled and concatenated (slow first).
  std::vector<double> extract_motion(std::span<const Image> stack) {
    check_stack(stack);
    const auto idx = temporal_indices(stack.size(), static_cast<std::size_t>(spec_.clip_len));
    std::vector<const Image*> fast;
    std::vector<const Image*> slow;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      fast.push_back(&stack[idx[j]]);
      if (j % static_cast<std::size_t>(spec_.slow_subsample) == 0) slow.push_back(&stack[idx[j]]);
    }
    auto out = run_motion(slow, fast);
    check_output(out, static_cast<std::size_t>(spec_.motion_dim()), "motion");
    return out;
  }

  // Per-frame spatial features, pooled, then averaged over the stack.
  std::vector<double> extract_spatial(std::span<const Image> stack) {
    check_stack(stack);
    std::vector<double> acc(static_cast<std::size_t>(spec_.spatial_dim), 0.0);
    for (const auto& frame : stack) {
      const auto f = run_spatial(frame);
      check_output(f, acc.size(), "spatial");
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
    }
    for (auto& v : acc) v /= static_cast<double>(stack.size());
    return acc;
  }

 protected:
  virtual std::vector<double> run_motion(std::span<const Image* const> slow, std::span<const Image* const> fast) = 0;
  virtual std::vector<double> run_spatial(const Image& frame) = 0;

  // Per-channel lookup tables: byte -> (x / 255 - mean) / std.
  std::array<std::array<double, 256>, 3> normalization_tables() const {
    std::array<std::array<double, 256>, 3> t{};
    for (std::size_t c = 0; c < 3; ++c) {
      for (int v = 0; v < 256; ++v) {
        t[c][static_cast<std::size_t>(v)] = (v / 255.0 - spec_.mean[c]) / spec_.std[c];
      }
    }
    return t;
  }

 private:
  void check_stack(std::span<const Image> stack) const {
    if (stack.empty()) throw BackendError("empty input stack");
    for (const auto& im : stack) {
      if (im.width() != spec_.input_size || im.height() != spec_.input_size) {
        throw BackendError("input tensor shape mismatch: got " + std::to_string(stack.size()) + "x" +
                           std::to_string(im.height()) + "x" + std::to_string(im.width()) + "x3, backend expects " +
                           "Lx" + std::to_string(spec_.input_size) + "x" + std::to_string(spec_.input_size) + "x3");
      }
    }
  }

  static void check_output(const std::vector<double>& v, std::size_t expected, const char* branch) {
    if (v.size() != expected) {
      throw BackendError(std::string(branch) + " output has " + std::to_string(v.size()) + " values, expected " +
                         std::to_string(expected));
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw BackendError(std::string(branch) + " backend produced a non-finite value");
    }
  }

  BackendSpec spec_;
};

// ---------------------------------------------------------------------------
// Toy backend

inline constexpr int kToyGrid = 4;
inline constexpr std::size_t kToyBaseFeatures = 3 + 3 + kToyGrid * kToyGrid + 3 + kToyGrid * kToyGrid;

// Closed-form features of a normalized stack: channel means, channel variances, gradient
// energy per cell of a 4x4 grid, temporal-difference energy per channel and per cell.
// The 41 base values are tiled with a per-tile scale and truncated to `dim`.
inline std::vector<double> toy_backend_eval(std::span<const Image* const> stack, std::size_t dim,
                                            const std::array<std::array<double, 256>, 3>& lut) {
  std::array<double, kToyBaseFeatures> base{};
  if (stack.empty()) throw BackendError("empty input stack");
  const int w = stack[0]->width();
  const int h = stack[0]->height();
  double* mean = base.data();
  double* var = base.data() + 3;
  double* grad = base.data() + 6;
  double* tdiff = base.data() + 6 + kToyGrid * kToyGrid;
  double* tcell = tdiff + 3;

  std::array<double, 3> sum{}, sum_sq{};
  std::array<double, kToyGrid * kToyGrid> grad_sum{}, tcell_sum{};
  std::array<double, kToyGrid * kToyGrid> cell_count{};
  std::array<double, 3> tsum{};
  // Per-thread scratch so repeated calls do not churn the allocator.
  thread_local std::vector<double> cur, prev;
  cur.resize(static_cast<std::size_t>(w) * h * 3);
  prev.resize(cur.size());

  for (std::size_t t = 0; t < stack.size(); ++t) {
    const Image& im = *stack[t];
    if (im.width() != w || im.height() != h) throw BackendError("stack frames differ in size");
    auto px = im.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) cur[i] = lut[i % 3][px[i]];
    for (int y = 0; y < h; ++y) {
      const int cy = y * kToyGrid / h;
      for (int x = 0; x < w; ++x) {
        const int cell = cy * kToyGrid + x * kToyGrid / w;
        const std::size_t o = (static_cast<std::size_t>(y) * w + x) * 3;
        double g = 0.0, td = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double v = cur[o + c];
          sum[static_cast<std::size_t>(c)] += v;
          sum_sq[static_cast<std::size_t>(c)] += v * v;
          const double dx = x + 1 < w ? cur[o + 3 + c] - v : 0.0;
          const double dy = y + 1 < h ? cur[o + static_cast<std::size_t>(w) * 3 + c] - v : 0.0;
          g += dx * dx + dy * dy;
          if (t > 0) {
            const double d = v - prev[o + c];
            tsum[static_cast<std::size_t>(c)] += d * d;
            td += std::abs(d);
          }
        }
        grad_sum[static_cast<std::size_t>(cell)] += g;
        tcell_sum[static_cast<std::size_t>(cell)] += td;
        if (t == 0) cell_count[static_cast<std::size_t>(cell)] += 1.0;
      }
    }
    prev.swap(cur);
  }

  const double n = static_cast<double>(stack.size()) * w * h;
  for (std::size_t c = 0; c < 3; ++c) {
    mean[c] = sum[c] / n;
    var[c] = std::max(0.0, sum_sq[c] / n - mean[c] * mean[c]);
  }
  const double frames = static_cast<double>(stack.size());
  const double pairs = std::max(1.0, frames - 1.0);
  for (std::size_t k = 0; k < grad_sum.size(); ++k) {
    const double cells = std::max(1.0, cell_count[k]);
    grad[k] = grad_sum[k] / (cells * frames);
    tcell[k] = tcell_sum[k] / (cells * pairs);
  }
  for (std::size_t c = 0; c < 3; ++c) tdiff[c] = tsum[c] / (pairs * w * h);

  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const std::size_t tile = k / kToyBaseFeatures;
    out[k] = base[k % kToyBaseFeatures] / (1.0 + static_cast<double>(tile % 16) * 0.125);
  }
  return out;
}

class ToyBackend final : public FeatureBackend {
 public:
  explicit ToyBackend(BackendSpec spec) : FeatureBackend(std::move(spec)), lut_(normalization_tables()) {}

  std::string id() const override {
    const auto& s = spec();
    return "toy-" + std::to_string(s.slow_dim) + "+" + std::to_string(s.fast_dim) + "-" +
           std::to_string(s.spatial_dim);
  }

  // Direct access to the closed-form evaluator for a whole stack.
  std::vector<double> eval(std::span<const Image> stack, std::size_t dim) const {
    std::vector<const Image*> ptrs;
    for (const auto& im : stack) ptrs.push_back(&im);
    return toy_backend_eval(ptrs, dim, lut_);
  }

 protected:
  std::vector<double> run_motion(std::span<const Image* const> slow, std::span<const Image* const> fast) override {
    auto out = toy_backend_eval(slow, static_cast<std::size_t>(spec().slow_dim), lut_);
    auto f = toy_backend_eval(fast, static_cast<std::size_t>(spec().fast_dim), lut_);
    out.insert(out.end(), f.begin(), f.end());
    return out;
  }

  std::vector<double> run_spatial(const Image& frame) override {
    const Image* one[] = {&frame};
    return toy_backend_eval(one, static_cast<std::size_t>(spec().spatial_dim), lut_);
  }

 private:
  std::array<std::array<double, 256>, 3> lut_;
};

// ---------------------------------------------------------------------------
// Neural backend
//
// Graph contract (written by the export scripts):
//   motion model : inputs "slow" [1,3,clip_len/slow_subsample,s,s] and "fast" [1,3,clip_len,s,s]
//                  (float32, normalized), output [1, slow_dim + fast_dim]
//   spatial model: input [1,3,s,s], output [1, spatial_dim]

// NCTHW float tensor from a list of frames.
inline std::vector<float> pack_clip(std::span<const Image* const> frames,
                                    const std::array<std::array<double, 256>, 3>& lut) {
  const std::size_t t_len = frames.size();
  const std::size_t hw = static_cast<std::size_t>(frames[0]->width()) * frames[0]->height();
  std::vector<float> out(3 * t_len * hw);
  for (std::size_t t = 0; t < t_len; ++t) {
    auto px = frames[t]->pixels();
    for (std::size_t i = 0; i < hw; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        out[(c * t_len + t) * hw + i] = static_cast<float>(lut[c][px[i * 3 + c]]);
      }
    }
  }
  return out;
}

#if defined(FRAGVQA_WITH_ONNXRUNTIME)

class OnnxBackend final : public FeatureBackend {
 public:
  explicit OnnxBackend(BackendSpec spec)
      : FeatureBackend(std::move(spec)),
        lut_(normalization_tables()),
        env_(ORT_LOGGING_LEVEL_WARNING, "fragvqa") {
    Ort::SessionOptions opts;
    opts.SetIntraOpNumThreads(1);
    opts.SetExecutionMode(ExecutionMode::ORT_SEQUENTIAL);
    const auto manifest = read_manifest_json();
    motion_ = open_session(this->spec().model_path / manifest.at("motion_model").get<std::string>(), opts);
    spatial_ = open_session(this->spec().model_path / manifest.at("spatial_model").get<std::string>(), opts);
  }

  std::string id() const override { return "onnx-" + std::to_string(spec().spatial_dim); }

 protected:
  std::vector<double> run_motion(std::span<const Image* const> slow, std::span<const Image* const> fast) override {
    const auto s = static_cast<std::int64_t>(spec().input_size);
    auto slow_data = pack_clip(slow, lut_);
    auto fast_data = pack_clip(fast, lut_);
    const std::array<std::int64_t, 5> slow_shape{1, 3, static_cast<std::int64_t>(slow.size()), s, s};
    const std::array<std::int64_t, 5> fast_shape{1, 3, static_cast<std::int64_t>(fast.size()), s, s};
    std::array<Ort::Value, 2> inputs{
        Ort::Value::CreateTensor<float>(mem_, slow_data.data(), slow_data.size(), slow_shape.data(), 5),
        Ort::Value::CreateTensor<float>(mem_, fast_data.data(), fast_data.size(), fast_shape.data(), 5)};
    return run(*motion_, inputs.data(), inputs.size());
  }

  std::vector<double> run_spatial(const Image& frame) override {
    const auto s = static_cast<std::int64_t>(spec().input_size);
    const Image* one[] = {&frame};
    auto data = pack_clip(one, lut_);
    const std::array<std::int64_t, 4> shape{1, 3, s, s};
    Ort::Value input = Ort::Value::CreateTensor<float>(mem_, data.data(), data.size(), shape.data(), 4);
    return run(*spatial_, &input, 1);
  }

 private:
  nlohmann::json read_manifest_json() const {
    std::ifstream in(spec().model_path / "manifest.json");
    nlohmann::json j;
    in >> j;
    return j;
  }

  std::unique_ptr<Ort::Session> open_session(const std::filesystem::path& path, const Ort::SessionOptions& opts) {
    if (!std::filesystem::exists(path)) throw BackendError("model file missing: " + path.string());
    try {
      return std::make_unique<Ort::Session>(env_, path.c_str(), opts);
    } catch (const Ort::Exception& e) {
      throw BackendError("cannot load model " + path.string() + ": " + e.what());
    }
  }

  std::vector<double> run(Ort::Session& session, Ort::Value* inputs, std::size_t count) {
    Ort::AllocatorWithDefaultOptions alloc;
    std::vector<Ort::AllocatedStringPtr> name_holders;
    std::vector<const char*> in_names;
    for (std::size_t i = 0; i < count; ++i) {
      name_holders.push_back(session.GetInputNameAllocated(i, alloc));
      in_names.push_back(name_holders.back().get());
    }
    name_holders.push_back(session.GetOutputNameAllocated(0, alloc));
    const char* out_name = name_holders.back().get();
    try {
      auto outs = session.Run(Ort::RunOptions{nullptr}, in_names.data(), inputs, count, &out_name, 1);
      const auto n = outs[0].GetTensorTypeAndShapeInfo().GetElementCount();
      const float* p = outs[0].GetTensorData<float>();
      return std::vector<double>(p, p + n);
    } catch (const Ort::Exception& e) {
      throw BackendError(std::string("inference failed: ") + e.what());
    }
  }

  std::array<std::array<double, 256>, 3> lut_;
  Ort::Env env_;
  Ort::MemoryInfo mem_ = Ort::MemoryInfo::CreateCpu(OrtArenaAllocator, OrtMemTypeDefault);
  std::unique_ptr<Ort::Session> motion_;
  std::unique_ptr<Ort::Session> spatial_;
};

#endif

inline bool neural_backend_available() noexcept {
#if defined(FRAGVQA_WITH_ONNXRUNTIME)
  return true;
#else
  return false;
#endif
}

inline std::unique_ptr<FeatureBackend> make_backend(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendKind::toy_deterministic:
      return std::make_unique<ToyBackend>(spec);
    case BackendKind::neural_interchange: {
      const auto resolved = load_manifest(spec.model_path, spec);
#if defined(FRAGVQA_WITH_ONNXRUNTIME)
      return std::make_unique<OnnxBackend>(resolved);
#else
      throw BackendError("neural backend requested for " + resolved.model_path.string() +
                         " but this build has no ONNX Runtime support");
#endif
    }
  }
  throw BackendError("unknown backend kind");
}

}  // namespace fragvqa
