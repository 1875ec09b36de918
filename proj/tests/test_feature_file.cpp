#include <gtest/gtest.h>

#include "fragvqa/feature_file.hpp"
#include "test_util.hpp"

using namespace fragvqa;

namespace {

FeatureSet sample_set() {
  FeatureSet s;
  s.dim = 3;
  s.records.push_back({"alpha", {1.0f, -2.5f, 3.0e-8f}, "videos/alpha.y4m", 3.5, 2});
  s.records.push_back({"β-video", {0.0f, 1e30f, -0.0f}, "videos/b.y4m", std::nullopt, 1});
  return s;
}

}  // namespace

TEST(Dvqf, LayoutIsLittleEndian) {
  const auto bytes = encode_dvqf(sample_set());
  ASSERT_GE(bytes.size(), 16u);
  EXPECT_EQ(bytes.substr(0, 4), "DVQF");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);  // version
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3);  // dim
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 2);  // video count
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 5);  // id length
  EXPECT_EQ(bytes.substr(20, 5), "alpha");
  // 1.0f = 0x3f800000, little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[25]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[28]), 0x3f);
  EXPECT_EQ(bytes.size(), 16u + (4 + 5 + 12) + (4 + std::string("β-video").size() + 12));
}

TEST(Dvqf, RoundTripIsBitExact) {
  const auto set = sample_set();
  const auto back = decode_dvqf(encode_dvqf(set));
  ASSERT_EQ(back.dim, 3u);
  ASSERT_EQ(back.records.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.records[i].id, set.records[i].id);
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back.records[i].values[k]),
                std::bit_cast<std::uint32_t>(set.records[i].values[k]));
    }
  }
  EXPECT_EQ(encode_dvqf(back), encode_dvqf(set));
}

TEST(Dvqf, EmptySetIsValid) {
  FeatureSet empty;
  empty.dim = 9984;
  const auto bytes = encode_dvqf(empty);
  EXPECT_EQ(bytes.size(), 16u);
  const auto back = decode_dvqf(bytes);
  EXPECT_EQ(back.dim, 9984u);
  EXPECT_TRUE(back.records.empty());
}

TEST(Dvqf, CorruptInputs) {
  auto bytes = encode_dvqf(sample_set());
  EXPECT_THROW(decode_dvqf("DVQ"), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_dvqf(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_dvqf(bad_version), FormatError);
  EXPECT_THROW(decode_dvqf(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(decode_dvqf(bytes + "x"), FormatError);
  auto huge_count = encode_dvqf(FeatureSet{4, {}});
  huge_count[15] = '\x7f';
  EXPECT_THROW(decode_dvqf(huge_count), FormatError);
  FeatureSet wrong = sample_set();
  wrong.records[1].values.pop_back();
  EXPECT_THROW(encode_dvqf(wrong), ShapeError);
}

TEST(Dvqf, SaveLoadMergesSidecar) {
  testutil::TempDir dir("dvqf");
  const auto path = dir / "f.dvqf";
  save_features(path, sample_set());
  EXPECT_FALSE(std::filesystem::exists(dir / "f.dvqf.tmp"));
  const auto back = load_features(path);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(back.records[0].path, "videos/alpha.y4m");
  EXPECT_EQ(back.records[0].mos, 3.5);
  EXPECT_EQ(back.records[0].chunk_count, 2);
  EXPECT_FALSE(back.records[1].mos.has_value());
  EXPECT_NE(back.find("β-video"), nullptr);
  EXPECT_EQ(back.find("gamma"), nullptr);

  std::filesystem::remove(dir / "f.dvqf.json");
  const auto bare = load_features(path);
  EXPECT_TRUE(bare.records[0].path.empty());
  EXPECT_THROW(load_features(dir / "missing.dvqf"), IoError);
}
