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

#include <cmath>

#include "oracles.hpp"
#include "segkit/postprocess.hpp"

namespace segkit {
namespace {

Detection box_det(BBox b, double score, std::int64_t cat = 1, int h = 100, int w = 100) {
  BinaryMask m(h, w);
  for (int y = static_cast<int>(b.y); y < static_cast<int>(b.y + b.h); ++y)
    for (int x = static_cast<int>(b.x); x < static_cast<int>(b.x + b.w); ++x) m.set(y, x);
  return Detection{1, cat, b, rle_encode(m), score, std::nullopt};
}

std::vector<Detection> random_dets(RandomStream& rng, int n, int h, int w) {
  std::vector<Detection> out;
  for (int i = 0; i < n; ++i) {
    const int bw = static_cast<int>(rng.uniform_int(1, w));
    const int bh = static_cast<int>(rng.uniform_int(1, h));
    const int x = static_cast<int>(rng.uniform_int(0, w - bw));
    const int y = static_cast<int>(rng.uniform_int(0, h - bh));
    Detection d = box_det(BBox{double(x), double(y), double(bw), double(bh)},
                          rng.bernoulli(0.2) ? 0.5 : rng.uniform(), rng.uniform_int(1, 2), h, w);
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration

TEST(CalibrateTest, Examples) {
  Detection a = box_det({0, 0, 2, 2}, 0.9);
  a.mask_iou_pred = 0.8;
  Detection b = box_det({0, 0, 2, 2}, 0.7);
  Detection c = box_det({0, 0, 2, 2}, 0.6);
  c.mask_iou_pred = 1.0;
  const auto out = calibrate_scores({a, b, c});
  EXPECT_DOUBLE_EQ(out[0].score, 0.72);
  EXPECT_EQ(out[1], b);
  EXPECT_EQ(out[2], c);
}

TEST(CalibrateTest, CommonFactorPreservesRanking) {
  RandomStream rng(17);
  for (int t = 0; t < 100; ++t) {
    const double factor = rng.uniform(0.01, 1.0);
    std::vector<Detection> dets = random_dets(rng, 10, 8, 8);
    for (auto& d : dets) d.mask_iou_pred = factor;
    const auto out = calibrate_scores(dets);
    for (std::size_t i = 0; i < dets.size(); ++i)
      for (std::size_t j = 0; j < dets.size(); ++j)
        if (dets[i].score < dets[j].score) {
          EXPECT_LE(out[i].score, out[j].score);
        }
  }
}

// ---------------------------------------------------------------------------
// Soft-NMS

TEST(SoftNmsTest, SingleAndDisjointPassThrough) {
  const Detection one = box_det({10, 10, 20, 20}, 0.42);
  EXPECT_EQ(soft_nms({one}, SoftNmsParams{}), std::vector<Detection>{one});
  const std::vector<Detection> pair{box_det({0, 0, 10, 10}, 0.9), box_det({50, 50, 10, 10}, 0.8)};
  SoftNmsParams linear;
  linear.method = SoftNmsMethod::kLinear;
  EXPECT_EQ(soft_nms(pair, SoftNmsParams{}), pair);
  EXPECT_EQ(soft_nms(pair, linear), pair);
}

TEST(SoftNmsTest, CoincidentGaussianDecay) {
  const auto out = soft_nms({box_det({5, 5, 20, 20}, 0.9), box_det({5, 5, 20, 20}, 0.8)}, SoftNmsParams{});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].score, 0.9);
  EXPECT_NEAR(out[1].score, 0.8 * std::exp(-2.0), 1e-9);
  EXPECT_NEAR(out[1].score, 0.10827, 1e-5);
}

TEST(SoftNmsTest, LinearDecayOnlyAboveThreshold) {
  SoftNmsParams p;
  p.method = SoftNmsMethod::kLinear;
  p.iou_threshold = 0.3;
  // IoU 1/3 with the first box, above threshold.
  auto out = soft_nms({box_det({0, 0, 10, 10}, 0.9), box_det({5, 0, 10, 10}, 0.6)}, p);
  EXPECT_NEAR(out[1].score, 0.6 * (1.0 - 1.0 / 3.0), 1e-12);
  // IoU 0.25, below threshold.
  out = soft_nms({box_det({0, 0, 10, 10}, 0.9), box_det({6, 0, 10, 10}, 0.6)}, p);
  EXPECT_EQ(out[1].score, 0.6);
}

TEST(SoftNmsTest, OtherCategoriesAreNotSuppressed) {
  const auto out = soft_nms({box_det({0, 0, 10, 10}, 0.9, 1), box_det({0, 0, 10, 10}, 0.8, 2)}, SoftNmsParams{});
  EXPECT_EQ(out[1].score, 0.8);
}

TEST(SoftNmsTest, TiesGoToLowerInputIndex) {
  Detection a = box_det({0, 0, 10, 10}, 0.5);
  Detection b = box_det({40, 40, 10, 10}, 0.5);
  a.image_id = b.image_id = 1;
  b.category_id = 2;
  const auto out = soft_nms({a, b}, SoftNmsParams{});
  EXPECT_EQ(out[0].category_id, 1);
}

TEST(SoftNmsTest, TinySigmaPrunesDuplicates) {
  SoftNmsParams p;
  p.sigma = 1e-6;
  p.score_floor = 0.01;
  RandomStream rng(5);
  for (int t = 0; t < 50; ++t) {
    std::vector<Detection> dets;
    const BBox b{rng.uniform(0, 50), rng.uniform(0, 50), rng.uniform(1, 40), rng.uniform(1, 40)};
    const int n = static_cast<int>(rng.uniform_int(2, 6));
    for (int i = 0; i < n; ++i) dets.push_back(Detection{1, 1, b, RleMask{1, 1, {1}}, rng.uniform(0.02, 1.0), std::nullopt});
    EXPECT_EQ(soft_nms(dets, p).size(), 1u);
  }
}

TEST(SoftNmsTest, ScoresNeverIncreaseAndOrderDescends) {
  RandomStream rng(21);
  for (int t = 0; t < 200; ++t) {
    const auto dets = random_dets(rng, static_cast<int>(rng.uniform_int(0, 12)), 20, 20);
    SoftNmsParams p;
    p.method = rng.bernoulli(0.5) ? SoftNmsMethod::kGaussian : SoftNmsMethod::kLinear;
    p.overlap = rng.bernoulli(0.5) ? OverlapKind::kBox : OverlapKind::kMask;
    p.max_keep = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const auto out = soft_nms(dets, p);
    ASSERT_LE(out.size(), p.max_keep);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_GE(out[i].score, p.score_floor);
      if (i > 0) {
        EXPECT_LE(out[i].score, out[i - 1].score);
      }
      auto same = [&](const Detection& d) {
        return d.bbox == out[i].bbox && d.mask == out[i].mask && d.category_id == out[i].category_id &&
               d.score >= out[i].score;
      };
      EXPECT_TRUE(std::any_of(dets.begin(), dets.end(), same));
    }
  }
}

TEST(SoftNmsTest, PerImageGroupsByImage) {
  Detection a = box_det({0, 0, 10, 10}, 0.9);
  Detection b = box_det({0, 0, 10, 10}, 0.8);
  a.image_id = 7;
  b.image_id = 3;
  const auto out = soft_nms_per_image({a, b}, SoftNmsParams{});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].image_id, 3);
  EXPECT_EQ(out[0].score, 0.8);
  EXPECT_EQ(out[1].score, 0.9);
}

// ---------------------------------------------------------------------------
// TTA

TEST(TtaTest, InverseMapExamples) {
  const TtaTransform identity{1.0, false, 100, 100};
  const Detection d = box_det({10, 20, 30, 40}, 0.5);
  EXPECT_EQ(inverse_map({d}, identity), std::vector<Detection>{d});

  const TtaTransform doubled{2.0, false, 100, 100};
  Detection v = box_det({20, 40, 60, 80}, 0.5, 1, 200, 200);
  EXPECT_EQ(inverse_map({v}, doubled)[0].bbox, (BBox{10, 20, 30, 40}));

  const TtaTransform flipped{1.0, true, 100, 100};
  const auto f = inverse_map({d}, flipped)[0];
  EXPECT_EQ(f.bbox, (BBox{60, 20, 30, 40}));
  EXPECT_EQ(rle_bbox(f.mask), (BBox{60, 20, 30, 40}));
}

TEST(TtaTest, InverseMapRejectsWrongExtent) {
  const TtaTransform doubled{2.0, false, 100, 100};
  try {
    inverse_map({box_det({0, 0, 2, 2}, 0.5)}, doubled);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kShape);
  }
}

TEST(TtaTest, ViewNamesAndExtents) {
  const auto ts = default_tta_transforms(7, 9);
  ASSERT_EQ(ts.size(), 10u);
  EXPECT_EQ(ts[0].view_name(), "x1");
  EXPECT_EQ(ts[3].view_name(), "x1.5_hflip");
  EXPECT_EQ(ts[3].view_height(), 11);  // 10.5 rounds up
  EXPECT_EQ(ts[3].view_width(), 14);   // 13.5 rounds up
}

TEST(TtaTest, RoundTripIsIdentityAtIntegerScales) {
  RandomStream rng(8);
  for (int t = 0; t < 100; ++t) {
    const int h = static_cast<int>(rng.uniform_int(4, 30));
    const int w = static_cast<int>(rng.uniform_int(4, 30));
    const TtaTransform tr{static_cast<double>(rng.uniform_int(1, 3)), rng.bernoulli(0.5), h, w};
    BinaryMask m = oracle::random_blob(rng, h, w);
    Detection d{1, 1, tight_bbox(m), rle_encode(m), 0.5, std::nullopt};
    d.bbox = BBox{rng.uniform(0, w), rng.uniform(0, h), rng.uniform(0, w), rng.uniform(0, h)};
    const Detection back = inverse_map(forward_map({d}, tr), tr)[0];
    EXPECT_EQ(back.mask, d.mask);
    EXPECT_NEAR(back.bbox.x, d.bbox.x, 1e-9);
    EXPECT_NEAR(back.bbox.y, d.bbox.y, 1e-9);
    EXPECT_NEAR(back.bbox.w, d.bbox.w, 1e-9);
    EXPECT_NEAR(back.bbox.h, d.bbox.h, 1e-9);
  }
}

TEST(TtaTest, SingleIdentityGroupEqualsSoftNms) {
  RandomStream rng(12);
  for (int t = 0; t < 100; ++t) {
    const auto dets = random_dets(rng, static_cast<int>(rng.uniform_int(0, 10)), 16, 16);
    EXPECT_EQ(tta_merge({TtaGroup{dets, TtaTransform{1.0, false, 16, 16}}}, SoftNmsParams{}),
              soft_nms(dets, SoftNmsParams{}));
  }
  EXPECT_TRUE(tta_merge({}, SoftNmsParams{}).empty());
}

TEST(TtaTest, FlippedDuplicatesSuppressToOriginals) {
  SoftNmsParams p;
  p.method = SoftNmsMethod::kLinear;
  const std::vector<Detection> base{box_det({10, 10, 20, 20}, 0.9), box_det({60, 50, 30, 10}, 0.7)};
  const TtaTransform id{1.0, false, 100, 100};
  const TtaTransform flip{1.0, true, 100, 100};
  const auto merged = tta_merge({TtaGroup{base, id}, TtaGroup{forward_map(base, flip), flip}}, p);
  EXPECT_EQ(merged, soft_nms(base, p));
}

TEST(PostprocessConfigTest, ParsesAndValidates) {
  const auto c = postprocess_config_from_json(nlohmann::json::parse(
      R"({"method":"linear","iou_threshold":0.5,"max_keep":10,"overlap":"mask","calibrate":false,
          "merge":"MERGE_CONCAT_SOFTNMS"})"));
  EXPECT_FALSE(c.calibrate);
  EXPECT_EQ(c.nms.method, SoftNmsMethod::kLinear);
  EXPECT_EQ(c.nms.overlap, OverlapKind::kMask);
  EXPECT_EQ(c.nms.max_keep, 10u);
  EXPECT_THROW(postprocess_config_from_json(nlohmann::json::parse(R"({"sigma":0})")), Error);
  EXPECT_THROW(postprocess_config_from_json(nlohmann::json::parse(R"({"merge":"WBF"})")), Error);
  EXPECT_THROW(postprocess_config_from_json(nlohmann::json::parse(R"({"nope":1})")), Error);
}

TEST(PostprocessConfigTest, CalibratesBeforeSuppression) {
  Detection a = box_det({0, 0, 10, 10}, 0.9);
  a.mask_iou_pred = 0.5;
  Detection b = box_det({0, 0, 10, 10}, 0.8);
  b.mask_iou_pred = 1.0;
  const auto out = postprocess({a, b}, PostprocessConfig{});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].score, 0.8);
  EXPECT_NEAR(out[1].score, 0.45 * std::exp(-2.0), 1e-12);
}

}  // namespace
}  // namespace segkit
