#include <gtest/gtest.h>

#include <random>

#include "fragvqa/chunking.hpp"
#include "test_util.hpp"

using namespace fragvqa;

namespace {

// Triplet whose three images encode its position so chunk contents can be traced.
FragmentTriplet tagged(std::int64_t i) {
  FragmentTriplet t;
  t.source_index = i + 1;
  auto tag = [&](std::uint8_t comp) {
    Image img(2, 1);
    img.at(0, 0, 0) = static_cast<std::uint8_t>(i & 0xff);
    img.at(1, 0, 0) = static_cast<std::uint8_t>(i >> 8);
    img.at(0, 0, 1) = comp;
    return img;
  };
  t.resized_frame = tag(0);
  t.frag_residual = tag(1);
  t.frag_frame = tag(2);
  return t;
}

std::int64_t tag_of(const Image& img) { return img.at(0, 0, 0) + 256 * img.at(1, 0, 0); }

std::vector<FragmentTriplet> sequence(std::int64_t n) {
  std::vector<FragmentTriplet> out;
  for (std::int64_t i = 0; i < n; ++i) out.push_back(tagged(i));
  return out;
}

VideoMeta meta_fps(std::int64_t num, std::int64_t den = 1) { return VideoMeta{2, 1, {num, den}, std::nullopt}; }

}  // namespace

TEST(Chunking, ExactDivision) {
  const auto trip = sequence(60);
  const auto chunks = chunk_triplets(trip, meta_fps(30), ChunkConfig{30});
  ASSERT_EQ(chunks.size(), 2u);
  for (const auto& c : chunks) {
    EXPECT_EQ(c.pad_count, 0);
    EXPECT_EQ(c.length(), 30u);
  }
  EXPECT_EQ(tag_of(chunks[1].resized.front()), 30);
}

TEST(Chunking, TrailingFramesBeyondLastStrideAreDropped) {
  const auto chunks = chunk_triplets(sequence(45), meta_fps(30), ChunkConfig{30});
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].pad_count, 0);
  for (int k = 0; k < 30; ++k) EXPECT_EQ(tag_of(chunks[0].frag_frames[static_cast<std::size_t>(k)]), k);
}

TEST(Chunking, ShortVideoIsPaddedWithLastEntry) {
  const auto chunks = chunk_triplets(sequence(10), meta_fps(30), ChunkConfig{30});
  ASSERT_EQ(chunks.size(), 1u);
  const auto& c = chunks[0];
  EXPECT_EQ(c.pad_count, 20);
  ASSERT_EQ(c.length(), 30u);
  for (std::size_t k = 10; k < 30; ++k) {
    EXPECT_EQ(c.resized[k], c.resized[9]);
    EXPECT_EQ(c.frag_residuals[k], c.frag_residuals[9]);
    EXPECT_EQ(c.frag_frames[k], c.frag_frames[9]);
  }
  EXPECT_EQ(tag_of(c.resized[29]), 9);
}

TEST(Chunking, GeometryDefaultsAndRounding) {
  EXPECT_EQ(chunk_geometry(meta_fps(30000, 1001), {}).stride, 30);
  EXPECT_EQ(chunk_geometry(meta_fps(30000, 1001), {}).length, 30);
  EXPECT_EQ(chunk_geometry(meta_fps(25), {0, Sampling::every_other_frame}).stride, 13);
  EXPECT_EQ(chunk_geometry(meta_fps(25), {8}).length, 8);
  EXPECT_EQ(chunk_geometry(meta_fps(1, 10), {}).stride, 1);
  EXPECT_THROW(chunk_geometry(meta_fps(30), {-1}), UsageError);
}

TEST(Chunking, EmptyAndUnorderedInput) {
  EXPECT_THROW(chunk_triplets({}, meta_fps(30), {}), FormatError);
  auto t = sequence(3);
  std::swap(t[0], t[2]);
  EXPECT_THROW(chunk_triplets(t, meta_fps(30), {}), ContractError);
}

// Enumerates the stated start/stride/pad rule directly and compares against the chunker
// over many (N', fps, L_c, sampling) combinations.
TEST(Chunking, MatchesIndexEnumeration) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> n_dist(1, 200), fps_dist(1, 60), len_dist(0, 70);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = n_dist(rng), fps = fps_dist(rng), len = len_dist(rng);
    const auto sampling = trial % 2 ? Sampling::every_other_frame : Sampling::all_frames;
    const auto chunks = chunk_triplets(sequence(n), meta_fps(fps), ChunkConfig{len, sampling});

    std::vector<std::int64_t> kept;
    for (int i = 0; i < n; i += (sampling == Sampling::every_other_frame ? 2 : 1)) kept.push_back(i);
    const int stride = sampling == Sampling::every_other_frame ? (fps + 1) / 2 : fps;
    const int lc = len > 0 ? len : stride;
    const auto avail = static_cast<std::int64_t>(kept.size());
    const std::int64_t m = std::max<std::int64_t>(1, avail / stride);
    ASSERT_EQ(static_cast<std::int64_t>(chunks.size()), m) << n << " " << fps << " " << len;
    for (std::int64_t i = 0; i < m; ++i) {
      const auto& c = chunks[static_cast<std::size_t>(i)];
      EXPECT_EQ(c.index, i);
      ASSERT_EQ(c.length(), static_cast<std::size_t>(lc));
      const std::int64_t start = i * stride;
      const std::int64_t real = std::min<std::int64_t>(lc, avail - start);
      EXPECT_EQ(c.pad_count, lc - real);
      for (std::int64_t k = 0; k < lc; ++k) {
        const std::int64_t src = kept[static_cast<std::size_t>(start + std::min(k, real - 1))];
        ASSERT_EQ(tag_of(c.resized[static_cast<std::size_t>(k)]), src);
        ASSERT_EQ(tag_of(c.frag_residuals[static_cast<std::size_t>(k)]), src);
        ASSERT_EQ(c.frag_residuals[static_cast<std::size_t>(k)].at(0, 0, 1), 1);
        ASSERT_EQ(tag_of(c.frag_frames[static_cast<std::size_t>(k)]), src);
      }
    }
  }
}

TEST(Chunking, StreamingReleasesChunksEarlyAndMatchesBatch) {
  StreamingChunker chunker(meta_fps(10), ChunkConfig{10});
  std::vector<ChunkTriplet> streamed;
  std::size_t released_before_finish = 0;
  for (const auto& t : sequence(35)) {
    for (auto& c : chunker.push(t)) streamed.push_back(std::move(c));
  }
  released_before_finish = streamed.size();
  for (auto& c : chunker.finish()) streamed.push_back(std::move(c));
  EXPECT_EQ(released_before_finish, 3u);
  const auto batch = chunk_triplets(sequence(35), meta_fps(10), ChunkConfig{10});
  ASSERT_EQ(streamed.size(), batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    EXPECT_EQ(streamed[i].resized, batch[i].resized);
    EXPECT_EQ(streamed[i].pad_count, batch[i].pad_count);
  }
  EXPECT_THROW(chunker.push(tagged(99)), ContractError);
}

TEST(Chunking, Deterministic) {
  const auto a = chunk_triplets(sequence(77), meta_fps(24), ChunkConfig{32});
  const auto b = chunk_triplets(sequence(77), meta_fps(24), ChunkConfig{32});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].frag_frames, b[i].frag_frames);
}
