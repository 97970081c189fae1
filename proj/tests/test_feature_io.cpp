#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "bvqa/errors.hpp"
#include "bvqa/fusion.hpp"
#include "bvqa/manifest.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/tensor_file.hpp"
#include "support/synthetic.hpp"

using namespace bvqa;
using bvqa::testing::fresh_dir;

namespace {

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

// Builds the byte stream field by field, independently of the encoder.
std::vector<std::uint8_t> hand_encode(const Shape& dims, const std::vector<float>& values, std::uint32_t version = 1,
                                      std::uint32_t dtype = 0, const char* magic = "BVQF") {
  std::vector<std::uint8_t> b(magic, magic + 4);
  put_u32(b, version);
  put_u32(b, dtype);
  put_u32(b, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u64(b, d);
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(b, bits);
  }
  return b;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

RawTensor random_raw(Rng& rng, std::size_t rank) {
  RawTensor r;
  std::size_t count = 1;
  for (std::size_t k = 0; k < rank; ++k) {
    r.dims.push_back(1 + rng.below(5));
    count *= r.dims.back();
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = static_cast<std::uint32_t>(rng.below(1ull << 32));
    float f;
    std::memcpy(&f, &bits, 4);
    if (!std::isfinite(f)) f = static_cast<float>(rng.normal());
    r.values.push_back(f);
  }
  return r;
}

}  // namespace

TEST(TensorFile, LayoutMatchesHandEncoding) {
  const RawTensor t{{2, 3}, {1.0f, -2.5f, 0.0f, 3.25f, 1e-30f, -7.0f}};
  EXPECT_EQ(encode_tensor(t), hand_encode(t.dims, t.values));
  EXPECT_EQ(decode_tensor(hand_encode(t.dims, t.values)), t);
}

TEST(TensorFile, RoundTripBitExactUpToRankFour) {
  Rng rng(1);
  const auto dir = fresh_dir("tensor_roundtrip");
  for (int s = 0; s < 200; ++s) {
    const RawTensor t = random_raw(rng, rng.below(5));
    const auto path = dir / "t.bvqf";
    write_tensor_file(path, t);
    const RawTensor back = read_tensor_file(path);
    ASSERT_EQ(back.dims, t.dims);
    ASSERT_EQ(std::memcmp(back.values.data(), t.values.data(), 4 * t.values.size()), 0);
  }
}

TEST(TensorFile, TruncatedPayloadNamesByteCounts) {
  auto bytes = hand_encode({2, 2}, {1, 2, 3, 4});
  bytes.resize(bytes.size() - 3);
  const std::string msg = error_of([&] { decode_tensor(bytes, "clip.bvqf"); });
  EXPECT_NE(msg.find("clip.bvqf"), std::string::npos) << msg;
  EXPECT_NE(msg.find("13"), std::string::npos) << msg;
  EXPECT_NE(msg.find("16"), std::string::npos) << msg;
  EXPECT_THROW(decode_tensor(bytes), DataError);
}

TEST(TensorFile, RejectsBadHeaders) {
  EXPECT_THROW(decode_tensor(hand_encode({1}, {1}, 1, 0, "XVQF")), DataError);
  EXPECT_THROW(decode_tensor(hand_encode({1}, {1}, 2, 0)), DataError);
  EXPECT_THROW(decode_tensor(hand_encode({1}, {1}, 1, 1)), DataError);
  EXPECT_THROW(decode_tensor(std::vector<std::uint8_t>{'B', 'V'}), DataError);
  auto trailing = hand_encode({1}, {1});
  trailing.push_back(0);
  EXPECT_THROW(decode_tensor(trailing), DataError);
  EXPECT_THROW(read_tensor_file("/nonexistent/x.bvqf"), DataError);
}

TEST(TensorFile, DoubleConversions) {
  const Tensor t = Tensor::from({2}, {0.1, 2.0});
  const RawTensor r = to_raw(t);
  EXPECT_EQ(r.values[0], 0.1f);
  EXPECT_EQ(to_tensor(r)[0], static_cast<double>(0.1f));
  EXPECT_EQ(to_tensor(r).shape(), (Shape{2}));
}

TEST(GapGsp, Examples) {
  const Tensor constant = gap_gsp_pool(Tensor::full({2, 3, 4, 5}, 1.5));
  ASSERT_EQ(constant.shape(), (Shape{2, 10}));
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t c = 0; c < 5; ++c) {
      EXPECT_EQ(constant.at(t, c), 1.5);
      EXPECT_EQ(constant.at(t, 5 + c), 0.0);
    }
  }
  Rng rng(2);
  std::vector<double> v(7 * 2048);
  for (double& x : v) x = rng.normal();
  const Tensor single = gap_gsp_pool(Tensor::from({7, 1, 1, 2048}, v));
  EXPECT_EQ(single.shape(), (Shape{7, kSpatialChannels}));
  EXPECT_EQ(single.at(3, 10), v[3 * 2048 + 10]);
  EXPECT_EQ(single.at(3, 2048 + 10), 0.0);
  EXPECT_THROW(gap_gsp_pool(Tensor::zeros({2, 0, 3, 4})), DataError);
}

TEST(GapGsp, MatchesDirectStatisticsAndCommutesWithChannelPermutation) {
  Rng rng(3);
  const std::size_t t_len = 3, h = 4, w = 3, c = 6;
  std::vector<double> v(t_len * h * w * c);
  for (double& x : v) x = rng.uniform(-2, 2);
  const Tensor pooled = gap_gsp_pool(Tensor::from({t_len, h, w, c}, v));
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t k = 0; k < c; ++k) {
      double s = 0, ss = 0;
      for (std::size_t p = 0; p < h * w; ++p) s += v[(t * h * w + p) * c + k];
      const double m = s / (h * w);
      for (std::size_t p = 0; p < h * w; ++p) ss += std::pow(v[(t * h * w + p) * c + k] - m, 2);
      EXPECT_NEAR(pooled.at(t, k), m, 1e-12);
      EXPECT_NEAR(pooled.at(t, c + k), std::sqrt(ss / (h * w)), 1e-12);
    }
  }
  std::vector<std::size_t> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<double> pv(v.size());
  for (std::size_t i = 0; i < v.size() / c; ++i) {
    for (std::size_t k = 0; k < c; ++k) pv[i * c + k] = v[i * c + perm[k]];
  }
  const Tensor pp = gap_gsp_pool(Tensor::from({t_len, h, w, c}, pv));
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t k = 0; k < c; ++k) {
      EXPECT_EQ(pp.at(t, k), pooled.at(t, perm[k]));
      EXPECT_EQ(pp.at(t, c + k), pooled.at(t, c + perm[k]));
    }
  }
}

TEST(Subsample, Examples) {
  auto seq = [](std::size_t n) {
    std::vector<double> v(n * 2);
    for (std::size_t i = 0; i < n; ++i) v[2 * i] = v[2 * i + 1] = static_cast<double>(i);
    return Tensor::from({n, 2}, v);
  };
  const Tensor four = temporal_subsample(seq(4));
  EXPECT_EQ(four.shape(), (Shape{2, 2}));
  EXPECT_EQ(four.at(1, 0), 2.0);
  EXPECT_EQ(temporal_subsample(seq(1)).shape(), (Shape{1, 2}));
  const Tensor five = temporal_subsample(seq(5));
  ASSERT_EQ(five.shape(), (Shape{3, 2}));
  EXPECT_EQ(five.at(2, 1), 4.0);
}

TEST(Fuse, ExamplesAndInjectivity) {
  Rng rng(4);
  std::vector<double> s(10 * kSpatialChannels), m(10 * kMotionChannels);
  for (double& x : s) x = rng.normal();
  for (double& x : m) x = rng.normal();
  const Tensor spatial = Tensor::from({10, kSpatialChannels}, s);
  const Tensor motion = Tensor::from({10, kMotionChannels}, m);
  const Tensor f = fuse(spatial, motion);
  ASSERT_EQ(f.shape(), (Shape{10, kFusedChannels}));
  for (std::size_t t = 0; t < 10; ++t) {
    for (std::size_t c = 0; c < kSpatialChannels; ++c) ASSERT_EQ(f.at(t, c), spatial.at(t, c));
    for (std::size_t c = 0; c < kMotionChannels; ++c) ASSERT_EQ(f.at(t, kSpatialChannels + c), motion.at(t, c));
  }
  EXPECT_THROW(fuse(spatial, Tensor::zeros({9, kMotionChannels})), DataError);
}

TEST(Fuse, StreamsSubsampleSpatialFirst) {
  FeatureSequence spatial{"v", Tensor::zeros({20, kSpatialChannels}), Stream::kSpatial, 1};
  FeatureSequence motion{"v", Tensor::zeros({10, kMotionChannels}), Stream::kMotion, 2};
  const FeatureSequence fused = fuse_streams(spatial, motion);
  EXPECT_EQ(fused.stream, Stream::kFused);
  EXPECT_EQ(fused.data.shape(), (Shape{10, kFusedChannels}));
  EXPECT_NO_THROW(fused.validate());
  FeatureSequence wrong{"w", Tensor::zeros({4, 100}), Stream::kSpatial, 1};
  EXPECT_THROW(wrong.validate(), DataError);
  EXPECT_EQ(parse_stream("motion"), Stream::kMotion);
  EXPECT_THROW(parse_stream("audio"), ConfigError);
}

TEST(Manifest, RoundTripPreservesOrder) {
  const auto dir = fresh_dir("manifest_roundtrip");
  Manifest m;
  m.split = "val";
  m.seed = 11;
  for (int i = 9; i >= 0; --i) {
    const std::string file = "f" + std::to_string(i) + ".bvqf";
    write_tensor_file(dir / file, {{1, 2}, {0, 0}});
    m.records.push_back({"vid" + std::to_string(i), 1.5 + i, i % 2 ? std::optional<double>(0.3) : std::nullopt,
                         i < 5 ? "a" : "b", file});
  }
  save_manifest(dir / "m.json", m);
  const Manifest back = load_manifest(dir / "m.json");
  EXPECT_EQ(back.records, m.records);
  EXPECT_EQ(back.split, "val");
  EXPECT_EQ(back.seed, 11u);
  EXPECT_EQ(back.database_ids(), (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(back.feature_path(back.records[0]), dir / "f9.bvqf");
}

TEST(Manifest, Errors) {
  const auto dir = fresh_dir("manifest_errors");
  const std::string missing = R"({"split":"train","records":[
    {"video_id":"a","mos":1,"database_id":"d","fused_feature_path":"gone1.bvqf"},
    {"video_id":"b","mos":2,"database_id":"d","fused_feature_path":"gone2.bvqf"}]})";
  const std::string msg = error_of([&] { parse_manifest(missing, dir); });
  EXPECT_NE(msg.find("gone1.bvqf"), std::string::npos) << msg;
  EXPECT_NE(msg.find("gone2.bvqf"), std::string::npos) << msg;
  EXPECT_NO_THROW(parse_manifest(missing, dir, false));

  const std::string dup = R"({"records":[
    {"video_id":"a","mos":1,"database_id":"d","fused_feature_path":"x"},
    {"video_id":"a","mos":2,"database_id":"d","fused_feature_path":"y"}]})";
  EXPECT_THROW(parse_manifest(dup, dir, false), DataError);
  EXPECT_THROW(parse_manifest(R"({"records":[], "extra": 1})", dir, false), DataError);
  EXPECT_THROW(parse_manifest(R"({"records":[{"video_id":"a","mos":1,"database_id":"d",
    "fused_feature_path":"x","colour":"red"}]})",
                              dir, false),
               DataError);
  EXPECT_THROW(parse_manifest("{not json", dir, false), DataError);
  EXPECT_THROW(load_manifest(dir / "absent.json"), DataError);
}

TEST(Manifest, SplitIsSixtyTwentyTwentyAndDeterministic) {
  Manifest all;
  all.split = "all";
  for (int i = 0; i < 100; ++i) all.records.push_back({"v" + std::to_string(i), 1.0 * i, std::nullopt, "d", "x"});
  const ManifestSplits a = split_manifest(all, 5);
  const ManifestSplits b = split_manifest(all, 5);
  EXPECT_EQ(a.train.records.size(), 60u);
  EXPECT_EQ(a.val.records.size(), 20u);
  EXPECT_EQ(a.test.records.size(), 20u);
  EXPECT_EQ(a.train.records, b.train.records);
  EXPECT_EQ(a.test.records, b.test.records);
  EXPECT_EQ(a.train.seed, 5u);
  EXPECT_EQ(a.val.split, "val");
  std::set<std::string> ids;
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    for (const auto& r : part->records) ids.insert(r.video_id);
  }
  EXPECT_EQ(ids.size(), 100u);
  EXPECT_NE(split_manifest(all, 6).train.records, a.train.records);
  EXPECT_THROW(split_manifest(all, 1, 0.9, 0.2), ConfigError);
}
