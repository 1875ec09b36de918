#pragma once

// Patch-difference fragmentation of consecutive frame pairs.
//
// For each frame pair the absolute residual is divided into a p x p grid, patches are
// ranked by their summed residual, and the top T = ceil(s^2 / p^2) patches are tiled
// into an s x s mosaic. The same coordinates are used to cut patches from the current
// frame, so residual mosaic and frame mosaic stay position-aligned slot by slot.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fragvqa/errors.hpp"
#include "fragvqa/image.hpp"

namespace fragvqa {

enum class ResizeFilter { bilinear };

struct FragConfig {
  int patch_size = 16;
  int target_size = 224;
  ResizeFilter resize_filter = ResizeFilter::bilinear;
};

inline void validate(const FragConfig& cfg) {
  if (cfg.patch_size < 1) throw UsageError("patch size must be >= 1");
  if (cfg.target_size < 1) throw UsageError("target size must be >= 1");
  if (cfg.patch_size > cfg.target_size) {
    throw UsageError("patch size " + std::to_string(cfg.patch_size) + " exceeds target size " +
                     std::to_string(cfg.target_size));
  }
}

// |cur - prev| per sample. Same geometry as the source frames.
struct Residual {
  std::int64_t source_index = 0;
  Image values;

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
};

struct PatchCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const PatchCoord&, const PatchCoord&) = default;
};

struct PatchScore {
  int grid_row = 0;
  int grid_col = 0;
  std::uint64_t score = 0;
};

// Scores of all complete patches, raster order.
struct PatchGrid {
  int rows = 0;
  int cols = 0;
  std::vector<PatchScore> scores;

  std::size_t size() const noexcept { return scores.size(); }
  const PatchScore& at(int r, int c) const { return scores[static_cast<std::size_t>(r) * cols + c]; }
};

struct FragmentTriplet {
  std::int64_t source_index = 0;
  Image resized_frame;
  Image frag_residual;
  Image frag_frame;
  std::vector<PatchCoord> coords;
  std::vector<std::uint64_t> scores;  // score of coords[k], kept for debug dumps
};

inline Residual compute_residual(const Frame& cur, const Frame& prev) {
  if (!cur.image.same_shape(prev.image)) {
    throw ShapeError("residual operands differ in size: " + std::to_string(cur.width()) + "x" +
                     std::to_string(cur.height()) + " vs " + std::to_string(prev.width()) + "x" +
                     std::to_string(prev.height()));
  }
  if (cur.index != prev.index + 1) {
    throw ContractError("residual requires consecutive frames, got indices " + std::to_string(prev.index) +
                        " and " + std::to_string(cur.index));
  }
  Image out(cur.width(), cur.height());
  auto a = cur.image.pixels();
  auto b = prev.image.pixels();
  auto o = out.pixels();
  for (std::size_t i = 0; i < o.size(); ++i) {
    o[i] = static_cast<std::uint8_t>(a[i] > b[i] ? a[i] - b[i] : b[i] - a[i]);
  }
  return Residual{cur.index, std::move(out)};
}

// Sum of residual samples (all three channels) per complete p x p patch. Edge strips that
// do not fill a whole patch are ignored.
inline PatchGrid patch_scores(const Image& residual, int p) {
  if (p < 1) throw UsageError("patch size must be >= 1");
  PatchGrid grid;
  grid.rows = residual.height() / p;
  grid.cols = residual.width() / p;
  if (grid.rows == 0 || grid.cols == 0) {
    throw FormatError("patch size " + std::to_string(p) + " leaves an empty grid for a " +
                      std::to_string(residual.width()) + "x" + std::to_string(residual.height()) + " frame");
  }
  grid.scores.resize(static_cast<std::size_t>(grid.rows) * grid.cols);
  std::vector<std::uint64_t> col_sums(static_cast<std::size_t>(grid.cols));
  const std::size_t patch_span = static_cast<std::size_t>(p) * kChannels;
  for (int gr = 0; gr < grid.rows; ++gr) {
    std::fill(col_sums.begin(), col_sums.end(), 0);
    for (int y = gr * p; y < (gr + 1) * p; ++y) {
      auto row = residual.row(y);
      for (int gc = 0; gc < grid.cols; ++gc) {
        const std::uint8_t* src = row.data() + static_cast<std::size_t>(gc) * patch_span;
        std::uint32_t acc = 0;
        for (std::size_t i = 0; i < patch_span; ++i) acc += src[i];
        col_sums[static_cast<std::size_t>(gc)] += acc;
      }
    }
    for (int gc = 0; gc < grid.cols; ++gc) {
      grid.scores[static_cast<std::size_t>(gr) * grid.cols + gc] =
          PatchScore{gr, gc, col_sums[static_cast<std::size_t>(gc)]};
    }
  }
  return grid;
}

inline PatchGrid patch_scores(const Residual& residual, int p) { return patch_scores(residual.values, p); }

// Number of patches needed to fill an s x s input: ceil(s^2 / p^2).
constexpr std::size_t top_t_count(std::int64_t s, std::int64_t p) noexcept {
  const auto area = s * s;
  const auto patch = p * p;
  return static_cast<std::size_t>((area + patch - 1) / patch);
}

// Top-T patches by descending score, ties broken by ascending raster index. A grid with
// fewer than T patches is repeated cyclically in ranked order.
inline std::vector<PatchCoord> select_top_patches(const PatchGrid& grid, std::size_t t) {
  if (grid.scores.empty()) throw FormatError("cannot select patches from an empty grid");
  std::vector<PatchCoord> out;
  if (t == 0) return out;
  std::vector<std::uint32_t> order(grid.scores.size());
  std::iota(order.begin(), order.end(), 0u);
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    const auto sa = grid.scores[a].score, sb = grid.scores[b].score;
    return sa != sb ? sa > sb : a < b;
  };
  const std::size_t ranked = std::min(t, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(ranked), order.end(), better);
  out.reserve(t);
  for (std::size_t k = 0; k < t; ++k) {
    const auto& s = grid.scores[order[k % ranked]];
    out.push_back({s.grid_row, s.grid_col});
  }
  return out;
}

namespace detail {

// Shared slot layout for fragment assembly. `copy_row(r, c, y, w, dst)` writes w pixels of
// row y of patch (r, c) to dst.
template <typename CopyRow>
Image assemble_slots(int src_w, int src_h, std::span<const PatchCoord> coords, int p, int s, CopyRow copy_row) {
  if (p < 1 || s < 1) throw UsageError("patch and target size must be >= 1");
  const std::size_t expected = top_t_count(s, p);
  if (coords.size() != expected) {
    throw ContractError("fragment needs " + std::to_string(expected) + " coordinates, got " +
                        std::to_string(coords.size()));
  }
  const int slots_per_row = (s + p - 1) / p;
  Image canvas(s, s);
  for (std::size_t k = 0; k < coords.size(); ++k) {
    const auto [r, c] = coords[k];
    if (r < 0 || c < 0 || (r + 1) * p > src_h || (c + 1) * p > src_w) {
      throw IndexError("patch (" + std::to_string(r) + "," + std::to_string(c) + ") lies outside the " +
                       std::to_string(src_w) + "x" + std::to_string(src_h) + " source");
    }
    const int dy0 = static_cast<int>(k / static_cast<std::size_t>(slots_per_row)) * p;
    const int dx0 = static_cast<int>(k % static_cast<std::size_t>(slots_per_row)) * p;
    if (dy0 >= s) break;
    const int h = std::min(p, s - dy0);
    const int w = std::min(p, s - dx0);
    for (int y = 0; y < h; ++y) {
      copy_row(r, c, y, w, canvas.row(dy0 + y).data() + static_cast<std::size_t>(dx0) * kChannels);
    }
  }
  return canvas;
}

}  // namespace detail

// Tiles source patches into an s x s canvas. Destination slots are laid out in raster
// order on a ceil(s/p)-wide grid; slot k receives the patch at coords[k]. Slots that run
// past the canvas edge get the top-left crop of their patch; unused slots stay black.
inline Image assemble_fragment(const Image& source, std::span<const PatchCoord> coords, int p, int s) {
  return detail::assemble_slots(source.width(), source.height(), coords, p, s,
                                [&](int r, int c, int y, int w, std::uint8_t* dst) {
                                  const std::uint8_t* src = source.row(r * p + y).data() +
                                                            static_cast<std::size_t>(c) * p * kChannels;
                                  std::copy_n(src, static_cast<std::size_t>(w) * kChannels, dst);
                                });
}

// Same as assemble_fragment(compute_residual(cur, prev).values, ...) without materializing
// the full-frame residual.
inline Image assemble_residual_fragment(const Image& cur, const Image& prev, std::span<const PatchCoord> coords,
                                        int p, int s) {
  if (!cur.same_shape(prev)) throw ShapeError("residual operands differ in size");
  return detail::assemble_slots(cur.width(), cur.height(), coords, p, s,
                                [&](int r, int c, int y, int w, std::uint8_t* dst) {
                                  const std::size_t off = static_cast<std::size_t>(c) * p * kChannels;
                                  const std::uint8_t* a = cur.row(r * p + y).data() + off;
                                  const std::uint8_t* b = prev.row(r * p + y).data() + off;
                                  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * kChannels; ++i) {
                                    dst[i] = static_cast<std::uint8_t>(a[i] > b[i] ? a[i] - b[i] : b[i] - a[i]);
                                  }
                                });
}

// Patch scores of |cur - prev| computed in one pass over both frames.
inline PatchGrid pair_patch_scores(const Image& cur, const Image& prev, int p) {
  if (!cur.same_shape(prev)) throw ShapeError("residual operands differ in size");
  if (p < 1) throw UsageError("patch size must be >= 1");
  PatchGrid grid;
  grid.rows = cur.height() / p;
  grid.cols = cur.width() / p;
  if (grid.rows == 0 || grid.cols == 0) {
    throw FormatError("patch size " + std::to_string(p) + " leaves an empty grid for a " +
                      std::to_string(cur.width()) + "x" + std::to_string(cur.height()) + " frame");
  }
  grid.scores.resize(static_cast<std::size_t>(grid.rows) * grid.cols);
  std::vector<std::uint64_t> col_sums(static_cast<std::size_t>(grid.cols));
  const std::size_t patch_span = static_cast<std::size_t>(p) * kChannels;
  for (int gr = 0; gr < grid.rows; ++gr) {
    std::fill(col_sums.begin(), col_sums.end(), 0);
    for (int y = gr * p; y < (gr + 1) * p; ++y) {
      const std::uint8_t* ra = cur.row(y).data();
      const std::uint8_t* rb = prev.row(y).data();
      for (int gc = 0; gc < grid.cols; ++gc) {
        const std::size_t off = static_cast<std::size_t>(gc) * patch_span;
        std::uint32_t acc = 0;
        for (std::size_t i = 0; i < patch_span; ++i) {
          const int d = static_cast<int>(ra[off + i]) - static_cast<int>(rb[off + i]);
          acc += static_cast<std::uint32_t>(d < 0 ? -d : d);
        }
        col_sums[static_cast<std::size_t>(gc)] += acc;
      }
    }
    for (int gc = 0; gc < grid.cols; ++gc) {
      grid.scores[static_cast<std::size_t>(gr) * grid.cols + gc] =
          PatchScore{gr, gc, col_sums[static_cast<std::size_t>(gc)]};
    }
  }
  return grid;
}

// Bilinear resize to out_w x out_h with half-pixel centres and edge clamping.
inline Image resize_bilinear(const Image& src, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw UsageError("resize target must be >= 1");
  if (src.width() == out_w && src.height() == out_h) return src;
  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double x = (o + 0.5) * scale - 0.5;
      x = std::clamp(x, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(x));
      const int i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, x - i0};
    }
    return t;
  };
  const auto tx = taps(src.width(), out_w);
  const auto ty = taps(src.height(), out_h);
  Image out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const auto& vy = ty[static_cast<std::size_t>(y)];
    auto r0 = src.row(vy.i0);
    auto r1 = src.row(vy.i1);
    auto dst = out.row(y);
    for (int x = 0; x < out_w; ++x) {
      const auto& vx = tx[static_cast<std::size_t>(x)];
      const std::size_t a = static_cast<std::size_t>(vx.i0) * kChannels;
      const std::size_t b = static_cast<std::size_t>(vx.i1) * kChannels;
      for (int c = 0; c < kChannels; ++c) {
        const double top = r0[a + c] + (r0[b + c] - r0[a + c]) * vx.f;
        const double bot = r1[a + c] + (r1[b + c] - r1[a + c]) * vx.f;
        const double v = top + (bot - top) * vy.f;
        dst[static_cast<std::size_t>(x) * kChannels + c] =
            static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  }
  return out;
}

inline Image resize_frame(const Frame& frame, int s) { return resize_bilinear(frame.image, s, s); }

inline FragmentTriplet fragment_pair(const Frame& prev, const Frame& cur, const FragConfig& cfg) {
  validate(cfg);
  if (!cur.image.same_shape(prev.image)) {
    throw ShapeError("frame pair differs in size: " + std::to_string(cur.width()) + "x" +
                     std::to_string(cur.height()) + " vs " + std::to_string(prev.width()) + "x" +
                     std::to_string(prev.height()));
  }
  if (cur.index != prev.index + 1) {
    throw ContractError("fragmentation requires consecutive frames, got indices " + std::to_string(prev.index) +
                        " and " + std::to_string(cur.index));
  }
  const PatchGrid grid = pair_patch_scores(cur.image, prev.image, cfg.patch_size);
  FragmentTriplet out;
  out.source_index = cur.index;
  out.coords = select_top_patches(grid, top_t_count(cfg.target_size, cfg.patch_size));
  out.scores.reserve(out.coords.size());
  for (const auto& c : out.coords) out.scores.push_back(grid.at(c.row, c.col).score);
  out.frag_residual = assemble_residual_fragment(cur.image, prev.image, out.coords, cfg.patch_size, cfg.target_size);
  out.frag_frame = assemble_fragment(cur.image, out.coords, cfg.patch_size, cfg.target_size);
  out.resized_frame = resize_frame(cur, cfg.target_size);
  return out;
}

}  // namespace fragvqa
