#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fragvqa/backend.hpp"
#include "fragvqa/chunking.hpp"
#include "fragvqa/errors.hpp"
#include "fragvqa/fragmentation.hpp"
#include "fragvqa/frame_io.hpp"

namespace fragvqa {

// Per-chunk branch outputs, one motion and one spatial vector per triplet component.
// Component order: resized frames, fragmented residuals, fragmented frames.
struct ChunkFeatures {
  std::int64_t chunk_index = 0;
  std::array<std::vector<double>, 3> motion;
  std::array<std::vector<double>, 3> spatial;
};

struct FusedChunk {
  std::int64_t chunk_index = 0;
  std::vector<double> values;
};

struct VideoFeature {
  std::vector<float> values;
  std::string backend_id;
  std::uint64_t config_hash = 0;
  std::int64_t chunk_count = 0;

  std::size_t dim() const noexcept { return values.size(); }
};

inline ChunkFeatures extract_chunk(const ChunkTriplet& chunk, FeatureBackend& backend) {
  ChunkFeatures f;
  f.chunk_index = chunk.index;
  const std::array<const std::vector<Image>*, 3> parts{&chunk.resized, &chunk.frag_residuals, &chunk.frag_frames};
  for (std::size_t k = 0; k < 3; ++k) {
    f.motion[k] = backend.extract_motion(*parts[k]);
    f.spatial[k] = backend.extract_spatial(*parts[k]);
  }
  return f;
}

// [resized:motion, resized:spatial, residual:motion, residual:spatial, frame:motion, frame:spatial]
inline FusedChunk fuse_chunk(const ChunkFeatures& f) {
  FusedChunk out;
  out.chunk_index = f.chunk_index;
  std::size_t total = 0;
  for (std::size_t k = 0; k < 3; ++k) total += f.motion[k].size() + f.spatial[k].size();
  out.values.reserve(total);
  for (std::size_t k = 0; k < 3; ++k) {
    if (f.motion[k].empty() || f.spatial[k].empty()) throw ContractError("chunk features incomplete");
    out.values.insert(out.values.end(), f.motion[k].begin(), f.motion[k].end());
    out.values.insert(out.values.end(), f.spatial[k].begin(), f.spatial[k].end());
  }
  return out;
}

namespace detail {

// Pairwise sum over rows [lo, hi) of column `col`; the tree shape depends only on the count.
inline double pairwise_sum(std::span<const FusedChunk* const> rows, std::size_t col) {
  if (rows.size() == 1) return rows[0]->values[col];
  const std::size_t half = rows.size() / 2;
  return pairwise_sum(rows.first(half), col) + pairwise_sum(rows.subspan(half), col);
}

}  // namespace detail

// Elementwise mean over chunks. Chunks are ordered by chunk_index first, so the result is
// independent of the order in which they were computed.
inline std::vector<double> aggregate_chunks(std::span<const FusedChunk> chunks) {
  if (chunks.empty()) throw FormatError("cannot aggregate zero chunks");
  std::vector<const FusedChunk*> rows;
  for (const auto& c : chunks) rows.push_back(&c);
  std::sort(rows.begin(), rows.end(),
            [](const FusedChunk* a, const FusedChunk* b) { return a->chunk_index < b->chunk_index; });
  const std::size_t dim = rows.front()->values.size();
  for (const auto* r : rows) {
    if (r->values.size() != dim) throw ShapeError("chunk feature lengths differ");
  }
  std::vector<double> out(dim);
  const double n = static_cast<double>(rows.size());
  for (std::size_t i = 0; i < dim; ++i) out[i] = detail::pairwise_sum(rows, i) / n;
  return out;
}

inline VideoFeature aggregate_video(std::span<const FusedChunk> chunks) {
  const auto mean = aggregate_chunks(chunks);
  VideoFeature v;
  v.values.reserve(mean.size());
  for (double x : mean) {
    if (!std::isfinite(x)) throw BackendError("non-finite aggregated feature");
    v.values.push_back(static_cast<float>(x));
  }
  v.chunk_count = static_cast<std::int64_t>(chunks.size());
  return v;
}

// FNV-1a over a canonical description of everything that influences features.
inline std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string describe(const FragConfig& frag, const ChunkConfig& chunk, const BackendSpec& b) {
  std::string s = "p=" + std::to_string(frag.patch_size) + ";s=" + std::to_string(frag.target_size) +
                  ";L=" + std::to_string(chunk.chunk_length) +
                  ";sampling=" + (chunk.sampling == Sampling::all_frames ? "all" : "every-other") +
                  ";kind=" + (b.kind == BackendKind::toy_deterministic ? "toy" : "neural") +
                  ";slow=" + std::to_string(b.slow_dim) + ";fast=" + std::to_string(b.fast_dim) +
                  ";spatial=" + std::to_string(b.spatial_dim) + ";clip=" + std::to_string(b.clip_len) +
                  ";sub=" + std::to_string(b.slow_subsample);
  for (int c = 0; c < 3; ++c) {
    s += ";m" + std::to_string(b.mean[static_cast<std::size_t>(c)]) + ";d" +
         std::to_string(b.std[static_cast<std::size_t>(c)]);
  }
  return s;
}

// Stage timings collected while extracting a video (seconds).
struct StageTimes {
  double decode = 0.0;
  double fragment = 0.0;
  double extract = 0.0;
};

// Runs decode -> fragment -> chunk -> extract -> fuse -> aggregate over one video.
// Frames are streamed; at most one chunk's worth of triplets is held in memory.
template <typename Clock = std::chrono::steady_clock>
VideoFeature extract_video(FrameSource& source, const FragConfig& frag, const ChunkConfig& chunk_cfg,
                           FeatureBackend& backend, StageTimes* times = nullptr) {
  validate(frag);
  if (backend.spec().input_size != frag.target_size) {
    throw UsageError("backend input size " + std::to_string(backend.spec().input_size) +
                     " differs from fragment target size " + std::to_string(frag.target_size));
  }
  auto seconds = [](auto a, auto b) { return std::chrono::duration<double>(b - a).count(); };
  StreamingChunker chunker(source.meta(), chunk_cfg);
  std::vector<FusedChunk> fused;
  auto consume = [&](std::vector<ChunkTriplet> ready) {
    for (auto& c : ready) {
      const auto t0 = Clock::now();
      fused.push_back(fuse_chunk(extract_chunk(c, backend)));
      if (times) times->extract += seconds(t0, Clock::now());
    }
  };

  auto t0 = Clock::now();
  std::optional<Frame> prev = source.next();
  if (times) times->decode += seconds(t0, Clock::now());
  if (!prev) throw FormatError("video contains no frames");
  for (;;) {
    t0 = Clock::now();
    std::optional<Frame> cur = source.next();
    if (times) times->decode += seconds(t0, Clock::now());
    if (!cur) break;
    t0 = Clock::now();
    auto triplet = fragment_pair(*prev, *cur, frag);
    if (times) times->fragment += seconds(t0, Clock::now());
    consume(chunker.push(std::move(triplet)));
    prev = std::move(cur);
  }
  if (chunker.accepted() == 0) throw FormatError("video needs at least two frames to form a residual");
  consume(chunker.finish());

  VideoFeature v = aggregate_video(fused);
  v.backend_id = backend.id();
  v.config_hash = fnv1a(describe(frag, chunk_cfg, backend.spec()));
  return v;
}

}  // namespace fragvqa
