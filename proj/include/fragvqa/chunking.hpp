#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "fragvqa/errors.hpp"
#include "fragvqa/fragmentation.hpp"
#include "fragvqa/frame_io.hpp"

namespace fragvqa {

enum class Sampling { all_frames, every_other_frame };

struct ChunkConfig {
  // Frames per chunk. 0 means "same as the chunk stride" (one contiguous second per chunk).
  int chunk_length = 0;
  Sampling sampling = Sampling::all_frames;
};

struct ChunkTriplet {
  std::int64_t index = 0;
  std::vector<Image> resized;
  std::vector<Image> frag_residuals;
  std::vector<Image> frag_frames;
  int pad_count = 0;

  std::size_t length() const noexcept { return resized.size(); }
};

// Chunk stride and length after sampling has been applied.
struct ChunkGeometry {
  int stride = 1;
  int length = 1;
  int decimation = 1;
};

inline int frames_per_second(const Rational& rate) {
  const auto fr = static_cast<int>(std::llround(rate.value()));
  return std::max(fr, 1);
}

inline ChunkGeometry chunk_geometry(const VideoMeta& meta, const ChunkConfig& cfg) {
  if (cfg.chunk_length < 0) throw UsageError("chunk length must be >= 0");
  ChunkGeometry g;
  g.stride = frames_per_second(meta.frame_rate);
  if (cfg.sampling == Sampling::every_other_frame) {
    g.decimation = 2;
    g.stride = (g.stride + 1) / 2;
  }
  g.length = cfg.chunk_length > 0 ? cfg.chunk_length : g.stride;
  return g;
}

// Number of chunks for n available triplets: max(1, floor(n / stride)).
inline std::int64_t chunk_count(std::int64_t available, int stride) {
  if (available <= 0) return 0;
  return std::max<std::int64_t>(1, available / stride);
}

// Incremental chunker: triplets are pushed in source order and whole chunks are released
// as soon as their contents (and existence) are known. Only triplets still needed by a
// pending chunk are retained.
class StreamingChunker {
 public:
  StreamingChunker(const VideoMeta& meta, const ChunkConfig& cfg) : geom_(chunk_geometry(meta, cfg)) {}

  const ChunkGeometry& geometry() const noexcept { return geom_; }

  std::vector<ChunkTriplet> push(FragmentTriplet triplet) {
    if (finished_) throw ContractError("push after finish");
    const bool keep = (raw_seen_++ % geom_.decimation) == 0;
    if (keep) {
      buffer_.push_back(std::move(triplet));
      ++accepted_;
    }
    std::vector<ChunkTriplet> ready;
    // Chunk i exists once (i + 1) * stride triplets have been accepted, and can be cut
    // once its last frame is present.
    while (true) {
      const std::int64_t start = next_chunk_ * geom_.stride;
      const bool exists = accepted_ >= (next_chunk_ + 1) * geom_.stride;
      const bool complete = accepted_ >= start + geom_.length;
      if (!exists || !complete) break;
      ready.push_back(cut(accepted_));
    }
    return ready;
  }

  std::vector<ChunkTriplet> finish() {
    finished_ = true;
    std::vector<ChunkTriplet> out;
    const std::int64_t total = chunk_count(accepted_, geom_.stride);
    while (next_chunk_ < total) out.push_back(cut(accepted_));
    buffer_.clear();
    return out;
  }

  std::int64_t accepted() const noexcept { return accepted_; }

 private:
  ChunkTriplet cut(std::int64_t available) {
    const std::int64_t start = next_chunk_ * geom_.stride;
    const std::int64_t end = std::min<std::int64_t>(start + geom_.length, available);
    ChunkTriplet chunk;
    chunk.index = next_chunk_;
    chunk.resized.reserve(static_cast<std::size_t>(geom_.length));
    chunk.frag_residuals.reserve(static_cast<std::size_t>(geom_.length));
    chunk.frag_frames.reserve(static_cast<std::size_t>(geom_.length));
    for (std::int64_t i = start; i < end; ++i) {
      const auto& t = buffer_[static_cast<std::size_t>(i - base_)];
      chunk.resized.push_back(t.resized_frame);
      chunk.frag_residuals.push_back(t.frag_residual);
      chunk.frag_frames.push_back(t.frag_frame);
    }
    chunk.pad_count = static_cast<int>(geom_.length - (end - start));
    for (int k = 0; k < chunk.pad_count; ++k) {
      chunk.resized.push_back(chunk.resized.back());
      chunk.frag_residuals.push_back(chunk.frag_residuals.back());
      chunk.frag_frames.push_back(chunk.frag_frames.back());
    }
    ++next_chunk_;
    // Drop triplets that no later chunk can reference.
    const std::int64_t keep_from = next_chunk_ * geom_.stride;
    while (base_ < keep_from && !buffer_.empty()) {
      buffer_.pop_front();
      ++base_;
    }
    return chunk;
  }

  ChunkGeometry geom_;
  std::deque<FragmentTriplet> buffer_;
  std::int64_t base_ = 0;  // accepted-sequence index of buffer_.front()
  std::int64_t raw_seen_ = 0;
  std::int64_t accepted_ = 0;
  std::int64_t next_chunk_ = 0;
  bool finished_ = false;
};

// Groups an ordered triplet sequence into fixed-length chunks starting every f_r triplets.
inline std::vector<ChunkTriplet> chunk_triplets(std::span<const FragmentTriplet> triplets, const VideoMeta& meta,
                                                const ChunkConfig& cfg) {
  if (triplets.empty()) throw FormatError("cannot chunk an empty video (no frame pairs)");
  for (std::size_t i = 1; i < triplets.size(); ++i) {
    if (triplets[i].source_index <= triplets[i - 1].source_index) {
      throw ContractError("triplets must be ordered by source index");
    }
  }
  StreamingChunker chunker(meta, cfg);
  std::vector<ChunkTriplet> out;
  for (const auto& t : triplets) {
    for (auto& c : chunker.push(t)) out.push_back(std::move(c));
  }
  for (auto& c : chunker.finish()) out.push_back(std::move(c));
  return out;
}

}  // namespace fragvqa
