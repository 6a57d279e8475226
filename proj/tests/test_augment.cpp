// Copyright 2026 The segkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "segkit/augment.hpp"

namespace segkit {
namespace {

AugmentConfig neutral_config() {
  AugmentConfig c;
  c.brightness_delta_max = 0;
  c.contrast_range = {1, 1};
  c.saturation_range = {1, 1};
  c.hue_delta_max = 0;
  return c;
}

Sample blank_sample(int h, int w, Rgb fill) { return Sample{ImageBuffer(h, w, fill), {}}; }

Instance rect_instance(std::int64_t id, int h, int w, PixelRect r, std::int64_t cat = 1) {
  BinaryMask m(h, w);
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) m.set(y, x);
  return Instance{id, cat, std::move(m), false};
}

// ---------------------------------------------------------------------------
// Photometric

TEST(PhotometricTest, NeutralRangesLeaveImageUnchanged) {
  RandomStream rng(3);
  RandomStream data(11);
  Sample s{oracle::random_image(data, 16, 9), {rect_instance(1, 16, 9, {1, 1, 3, 3})}};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(photometric_distortion(s, neutral_config(), rng), s);
}

TEST(PhotometricTest, FixedSeedIsReproducible) {
  RandomStream data(5);
  const Sample s{oracle::random_image(data, 12, 17), {}};
  AugmentConfig cfg;
  RandomStream a(42), b(42);
  const Sample first = photometric_distortion(s, cfg, a);
  EXPECT_EQ(photometric_distortion(s, cfg, b), first);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(PhotometricTest, BrightnessOnlyMatchesImagingOp) {
  AugmentConfig cfg = neutral_config();
  cfg.brightness_delta_max = 32;
  RandomStream data(8);
  const Sample s{oracle::random_image(data, 6, 6), {}};
  int applied = 0;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    RandomStream rng(seed), replay(seed);
    const bool fire = replay.bernoulli(0.5);
    const double delta = replay.uniform(-32, 32);
    const Sample out = photometric_distortion(s, cfg, rng);
    const ImageBuffer expect = fire ? photometric_adjust(s.image, photo_op::Brightness{delta}) : s.image;
    EXPECT_EQ(out.image, expect) << seed;
    applied += fire ? 1 : 0;
  }
  EXPECT_GT(applied, 10);
  EXPECT_LT(applied, 54);
}

TEST(PhotometricTest, BrightnessPlus32Saturates) {
  RandomStream data(2);
  const ImageBuffer img = oracle::random_image(data, 10, 10);
  const ImageBuffer out = photometric_adjust(img, photo_op::Brightness{32});
  for (std::size_t i = 0; i < img.pixels().size(); ++i) {
    EXPECT_EQ(out.pixels()[i], std::min(img.pixels()[i] + 32, 255));
  }
}

TEST(PhotometricTest, DrawCountIsFixed) {
  RandomStream data(4);
  const Sample s{oracle::random_image(data, 4, 4), {}};
  for (std::uint64_t seed = 0; seed < 32; ++seed) {
    RandomStream rng(seed), reference(seed);
    photometric_distortion(s, AugmentConfig{}, rng);
    for (int i = 0; i < 8; ++i) reference.next_u64();
    EXPECT_EQ(rng.next_u64(), reference.next_u64());
  }
}

// ---------------------------------------------------------------------------
// Copy-paste

TEST(CopyPasteTest, ZeroInstancesDrawnLeavesTargetUnchanged) {
  AugmentConfig cfg;
  cfg.copy_paste_max_instances = 0;
  RandomStream data(1), rng(2);
  const Sample target = oracle::random_disjoint_sample(data, 20, 20, 3);
  Sample source = oracle::random_disjoint_sample(data, 20, 20, 3);
  source.instances.push_back(rect_instance(99, 20, 20, {0, 0, 5, 5}));
  EXPECT_EQ(copy_paste(target, source, cfg, rng), target);
}

TEST(CopyPasteTest, FullCoverDropsTargetInstance) {
  AugmentConfig cfg;
  cfg.visibility_threshold = 0.1;
  cfg.copy_paste_max_instances = 1;
  Sample target = blank_sample(10, 10, {10, 20, 30});
  target.instances.push_back(rect_instance(7, 10, 10, {2, 2, 4, 4}));
  Sample source = blank_sample(10, 10, {200, 100, 50});
  source.instances.push_back(rect_instance(1, 10, 10, {2, 2, 4, 4}, 2));
  RandomStream rng(0);
  const Sample out = copy_paste(target, source, cfg, rng);
  ASSERT_EQ(out.instances.size(), 1u);
  EXPECT_EQ(out.instances[0].id, 8);
  EXPECT_EQ(out.instances[0].category_id, 2);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      const bool inside = y >= 2 && y < 6 && x >= 2 && x < 6;
      EXPECT_EQ(out.image.at(y, x), (inside ? Rgb{200, 100, 50} : Rgb{10, 20, 30}));
    }
  }
}

TEST(CopyPasteTest, OverlappingPastesBecomeDisjoint) {
  AugmentConfig cfg;
  cfg.copy_paste_max_instances = 2;
  cfg.visibility_threshold = 0.0;
  Sample target = blank_sample(8, 8, {0, 0, 0});
  Sample source = blank_sample(8, 8, {255, 255, 255});
  source.instances.push_back(rect_instance(1, 8, 8, {0, 0, 5, 5}));
  source.instances.push_back(rect_instance(2, 8, 8, {3, 3, 5, 5}));
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    RandomStream rng(seed);
    const CopyPasteResult r = copy_paste_detailed(target, source, cfg, rng);
    EXPECT_EQ(oracle::check_copy_paste(target, source, r.pasted, cfg.visibility_threshold, r.sample), "");
    if (r.pasted.size() != 2) continue;
    const BinaryMask& lo = r.sample.instances[0].mask;
    const BinaryMask& hi = r.sample.instances[1].mask;
    EXPECT_EQ(oracle::count_and(lo, hi), 0);
    EXPECT_EQ(oracle::count_or(lo, hi), 25 + 25 - 4);
  }
}

TEST(CopyPasteTest, RandomCompositesMatchPixelOracle) {
  RandomStream data(77);
  for (int t = 0; t < 60; ++t) {
    AugmentConfig cfg;
    cfg.visibility_threshold = data.uniform();
    cfg.copy_paste_max_instances = static_cast<int>(data.uniform_int(1, 5));
    const int h = static_cast<int>(data.uniform_int(4, 24));
    const int w = static_cast<int>(data.uniform_int(4, 24));
    const Sample target = oracle::random_disjoint_sample(data, h, w, 4);
    Sample source = oracle::random_disjoint_sample(data, static_cast<int>(data.uniform_int(4, 24)),
                                                   static_cast<int>(data.uniform_int(4, 24)), 4);
    if (source.instances.empty()) continue;
    RandomStream rng = data.child(t);
    const CopyPasteResult r = copy_paste_detailed(target, source, cfg, rng);
    EXPECT_EQ(oracle::check_copy_paste(target, source, r.pasted, cfg.visibility_threshold, r.sample), "")
        << "case " << t;
  }
}

TEST(CopyPasteTest, SourceWithoutPasteableInstancesIsAnError) {
  AugmentConfig cfg;
  RandomStream rng(1);
  Sample target = blank_sample(4, 4, {});
  Sample source = blank_sample(4, 4, {});
  EXPECT_THROW(copy_paste(target, source, cfg, rng), Error);
  Instance crowd = rect_instance(1, 4, 4, {0, 0, 2, 2});
  crowd.iscrowd = true;
  source.instances.push_back(crowd);
  try {
    copy_paste(target, source, cfg, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kEmptySource);
  }
}

TEST(CopyPasteTest, Deterministic) {
  RandomStream data(31);
  const Sample target = oracle::random_disjoint_sample(data, 30, 20, 4);
  Sample source = oracle::random_disjoint_sample(data, 15, 25, 4);
  source.instances.push_back(rect_instance(50, 15, 25, {1, 1, 6, 6}));
  RandomStream a(9), b(9);
  EXPECT_EQ(copy_paste(target, source, AugmentConfig{}, a), copy_paste(target, source, AugmentConfig{}, b));
}

// ---------------------------------------------------------------------------
// Geometric

TEST(GeometricTest, SquareInputScaledThenPadded) {
  AugmentConfig cfg;
  Sample s = blank_sample(1000, 1000, {1, 2, 3});
  s.instances.push_back(rect_instance(1, 1000, 1000, {0, 0, 1000, 1000}));
  const GeometricResult r = apply_geometric(s, cfg, GeometricDraw{820, 0.3, 0.7, false});
  EXPECT_EQ(r.resized_height, 820);
  EXPECT_EQ(r.resized_width, 820);
  EXPECT_EQ(r.crop, (PixelRect{0, 0, 820, 820}));
  EXPECT_EQ(r.sample.image.height(), 1440);
  EXPECT_EQ(r.sample.image.width(), 1920);
  EXPECT_EQ(r.sample.image.at(819, 819), (Rgb{1, 2, 3}));
  EXPECT_EQ(r.sample.image.at(820, 0), kDefaultPadFill);
  EXPECT_EQ(r.sample.image.at(0, 820), kDefaultPadFill);
  ASSERT_EQ(r.sample.instances.size(), 1u);
  EXPECT_EQ(r.sample.instances[0].bbox(), (BBox{0, 0, 820, 820}));
}

TEST(GeometricTest, LongSideCapApplies) {
  AugmentConfig cfg;
  const Sample s = blank_sample(1000, 5000, {});
  const GeometricResult r = apply_geometric(s, cfg, GeometricDraw{1000, 0.0, 0.0, false});
  EXPECT_EQ(r.resized_height, 736);
  EXPECT_EQ(r.resized_width, 3680);
  EXPECT_EQ(r.crop.w, 1920);
  EXPECT_EQ(r.crop.h, 736);
  EXPECT_EQ(r.sample.image.width(), 1920);
  EXPECT_EQ(r.sample.image.height(), 1440);
}

TEST(GeometricTest, CropPlacementCoversBothEnds) {
  AugmentConfig cfg;
  const Sample s = blank_sample(100, 500, {});
  EXPECT_EQ(apply_geometric(s, cfg, GeometricDraw{1000, 0.0, 0.0, false}).crop.x, 0);
  EXPECT_EQ(apply_geometric(s, cfg, GeometricDraw{1000, 0.999999, 0.0, false}).crop.x, 3680 - 1920);
}

TEST(GeometricTest, FlipMirrorsMasks) {
  AugmentConfig cfg;
  cfg.scale_short_range = {10, 10};
  cfg.crop_pad_target = {12, 10};
  Sample s = blank_sample(10, 10, {});
  s.instances.push_back(rect_instance(1, 10, 10, {0, 0, 2, 10}));
  const GeometricResult r = apply_geometric(s, cfg, GeometricDraw{10, 0, 0, true});
  EXPECT_EQ(r.sample.instances[0].bbox(), (BBox{10, 0, 2, 10}));
}

TEST(GeometricTest, InstancesCroppedAwayAreDropped) {
  AugmentConfig cfg;
  cfg.scale_short_range = {10, 10};
  cfg.crop_pad_target = {10, 10};
  Sample s = blank_sample(10, 40, {});
  s.instances.push_back(rect_instance(1, 10, 40, {35, 0, 5, 5}));
  s.instances.push_back(rect_instance(2, 10, 40, {0, 0, 5, 5}));
  const GeometricResult r = apply_geometric(s, cfg, GeometricDraw{10, 0.0, 0.0, false});
  ASSERT_EQ(r.sample.instances.size(), 1u);
  EXPECT_EQ(r.sample.instances[0].id, 2);
}

TEST(GeometricTest, RandomInputsRespectExtentContract) {
  AugmentConfig cfg;
  RandomStream data(123);
  for (int t = 0; t < 60; ++t) {
    const int h = static_cast<int>(data.uniform_int(1, 40));
    const int w = static_cast<int>(data.uniform_int(1, 40));
    Sample s = oracle::random_disjoint_sample(data, h, w, 2);
    RandomStream rng = data.child(t);
    const GeometricResult r = geometric_pipeline_detailed(s, cfg, rng);
    ASSERT_EQ(r.sample.image.height(), 1440);
    ASSERT_EQ(r.sample.image.width(), 1920);
    const int short_side = std::min(r.resized_height, r.resized_width);
    const int long_side = std::max(r.resized_height, r.resized_width);
    EXPECT_LE(long_side, 3680);
    if (long_side < 3680) {
      EXPECT_GE(short_side, 820);
      EXPECT_LE(short_side, 3080);
    }
    for (const auto& inst : r.sample.instances) {
      const BBox b = inst.bbox();
      EXPECT_GT(inst.area(), 0);
      EXPECT_GE(b.x, 0);
      EXPECT_GE(b.y, 0);
      EXPECT_LE(b.x + b.w, 1920);
      EXPECT_LE(b.y + b.h, 1440);
    }
  }
}

// ---------------------------------------------------------------------------
// Full chain and configuration

TEST(AugmentSampleTest, ChildStreamsAreOrderIndependent) {
  AugmentConfig cfg;
  cfg.crop_pad_target = {64, 48};
  cfg.scale_short_range = {20, 60};
  cfg.long_side_cap = 90;
  RandomStream data(6);
  const Sample a = oracle::random_disjoint_sample(data, 30, 40, 3);
  Sample src = oracle::random_disjoint_sample(data, 30, 40, 3);
  src.instances.push_back(rect_instance(40, 30, 40, {5, 5, 10, 10}));
  const RandomStream run(2024);
  const Sample first = augment_sample(a, &src, cfg, run.child(1));
  const Sample other = augment_sample(a, &src, cfg, run.child(2));
  EXPECT_EQ(augment_sample(a, &src, cfg, run.child(1)), first);
  EXPECT_NE(other.image, first.image);
  EXPECT_EQ(first.image.height(), 48);
  EXPECT_EQ(first.image.width(), 64);
}

TEST(AugmentConfigTest, JsonRoundTrip) {
  AugmentConfig c;
  c.visibility_threshold = 0.4;
  c.crop_pad_target = {640, 480};
  c.pad_fill = {1, 2, 3};
  EXPECT_EQ(augment_config_from_json(to_json(c)), c);
  EXPECT_EQ(augment_config_from_json(nlohmann::json::object()), AugmentConfig{});
}

TEST(AugmentConfigTest, RejectsInvalidValues) {
  auto code_of = [](const char* text) {
    try {
      augment_config_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(code_of(R"({"hflip_prob": 1.5})").find("/hflip_prob"), std::string::npos);
  EXPECT_NE(code_of(R"({"contrast_range": [2, 1]})").find("/contrast_range"), std::string::npos);
  EXPECT_NE(code_of(R"({"bogus": 1})").find("/bogus"), std::string::npos);
  EXPECT_NE(code_of(R"({"visibility_threshold": -0.1})").find("ConfigError"), std::string::npos);
}

}  // namespace
}  // namespace segkit
