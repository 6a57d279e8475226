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

#include <atomic>
#include <filesystem>

#include "oracles.hpp"
#include "segkit/harness.hpp"
#include "segkit/png_io.hpp"
#include "segkit/synthetic.hpp"

namespace segkit {
namespace {

namespace fs = std::filesystem;

SyntheticData small_data(int images = 6, int categories = 1) {
  SyntheticSpec spec;
  spec.num_images = images;
  spec.height = 96;
  spec.width = 80;
  spec.num_categories = categories;
  spec.seed = 5;
  return make_synthetic(spec);
}

OracleParams noiseless() { return OracleParams{}; }

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TEST(OracleTest, NoiselessReproducesGroundTruth) {
  const SyntheticData data = small_data();
  for (const auto& img : data.dataset.images) {
    const auto dets = oracle_infer(img.id, data.dataset, noiseless());
    const auto anns = data.dataset.annotations_for(img.id);
    ASSERT_EQ(dets.size(), anns.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
      EXPECT_EQ(dets[i].mask, anns[i]->mask);
      EXPECT_EQ(dets[i].bbox, anns[i]->bbox);
      EXPECT_EQ(dets[i].category_id, anns[i]->category_id);
      EXPECT_EQ(dets[i].score, 1.0);
      EXPECT_EQ(dets[i].mask_iou_pred, std::optional<double>(1.0));
    }
  }
  EXPECT_EQ(evaluate(oracle_infer(1, data.dataset, noiseless()), data.dataset).per_category.size(), 1u);
}

TEST(OracleTest, FullDropoutLeavesOnlyFalsePositives) {
  const SyntheticData data = small_data();
  OracleParams p;
  p.fn_rate = 1.0;
  p.fp_rate = 0.7;
  p.seed = 3;
  for (const auto& img : data.dataset.images) {
    for (const auto& d : oracle_infer(img.id, data.dataset, p)) EXPECT_LE(d.score, 0.3);
  }
}

TEST(OracleTest, UnknownImageIsRejected) {
  const SyntheticData data = small_data(1);
  try {
    oracle_infer(42, data.dataset, noiseless());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownId);
  }
}

TEST(OracleTest, JitterMovesMaskIouPrediction) {
  const SyntheticData data = small_data();
  OracleParams p;
  p.jitter_px = 4;
  p.seed = 11;
  bool any_below = false;
  for (const auto& img : data.dataset.images) {
    for (const auto& d : oracle_infer(img.id, data.dataset, p)) {
      ASSERT_TRUE(d.mask_iou_pred.has_value());
      EXPECT_GE(*d.mask_iou_pred, 0.0);
      EXPECT_LE(*d.mask_iou_pred, 1.0);
      any_below = any_below || *d.mask_iou_pred < 1.0;
    }
  }
  EXPECT_TRUE(any_below);
}

TEST(OracleTest, ParamsValidateWithPaths) {
  OracleParams p;
  p.fp_rate = 2.5;  // an expected count, not a probability
  EXPECT_NO_THROW(p.validate());
  p.fp_rate = -0.5;
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("/detector/oracle/fp_rate"), std::string::npos);
  }
}

TEST(PipelineTest, NoiselessIdentityAndFullTtaScoreOne) {
  const SyntheticData data = small_data(6, 2);
  PipelineConfig cfg;
  cfg.detector = noiseless();
  EXPECT_EQ(run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, noiseless())).report.map, 1.0);
  cfg.tta = default_tta_views();
  EXPECT_NEAR(run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, noiseless())).report.map, 1.0, 1e-6);
}

TEST(PipelineTest, DropoutLowersScoreOnSameSeed) {
  const SyntheticData data = small_data(10);
  PipelineConfig cfg;
  OracleParams p;
  p.seed = 17;
  const double full = run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, p)).report.map;
  p.fn_rate = 0.5;
  const double half = run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, p)).report.map;
  EXPECT_LT(half, full);
}

TEST(PipelineTest, JitterSweepIsNonIncreasing) {
  const SyntheticData data = small_data(10);
  PipelineConfig cfg;
  double previous = 2.0;
  for (double jitter : {0.0, 4.0, 8.0}) {
    OracleParams p;
    p.seed = 23;
    p.jitter_px = jitter;
    const double map = run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, p)).report.map;
    EXPECT_LE(map, previous) << jitter;
    previous = map;
  }
}

class CountingDetector final : public Detector {
 public:
  explicit CountingDetector(std::atomic<int>& pixels) : pixels_(pixels) {}
  std::vector<Detection> infer(const ViewContext& view) const override {
    if (view.image != nullptr && view.image->height() == view.transform.view_height() &&
        view.image->width() == view.transform.view_width()) {
      ++pixels_;
    }
    return {};
  }
  bool wants_pixels() const override { return true; }

 private:
  std::atomic<int>& pixels_;
};

TEST(PipelineTest, PixelDetectorsReceiveViewImages) {
  const SyntheticData data = small_data(3);
  PipelineConfig cfg;
  cfg.tta = {{1.0, false}, {1.5, true}};
  std::atomic<int> seen{0};
  const auto provider = [&](const ImageInfo& info) { return data.images[static_cast<std::size_t>(info.id - 1)]; };
  const auto r = run_pipeline(cfg, data.dataset, CountingDetector(seen), provider);
  EXPECT_EQ(seen.load(), 6);
  EXPECT_EQ(r.report.map, 0.0);
  EXPECT_THROW(run_pipeline(cfg, data.dataset, CountingDetector(seen)), Error);
}

TEST(PipelineTest, ResultsFilesDriveTheDetector) {
  const SyntheticData data = small_data(4);
  const fs::path dir = temp_dir("segkit_harness_files");
  write_coco(data.dataset, dir / "gt.json");
  std::vector<Detection> view0;
  std::vector<Detection> view1;
  const TtaTransform flip_tf{1.0, true, 96, 80};
  for (const auto& img : data.dataset.images) {
    auto d = oracle_infer(img.id, data.dataset, noiseless());
    view0.insert(view0.end(), d.begin(), d.end());
    auto f = forward_map(d, flip_tf);
    view1.insert(view1.end(), f.begin(), f.end());
  }
  write_results(view0, dir / "x1.json");
  write_results(view1, dir / "x1_hflip.json");
  const nlohmann::json j = nlohmann::json::parse(R"({
    "dataset": "gt.json",
    "detector": {"results_files": {"x1": "x1.json", "x1_hflip": "x1_hflip.json"}},
    "tta": [{"scale": 1.0}, {"scale": 1.0, "hflip": true}],
    "output": "merged.json"
  })");
  const PipelineConfig cfg = pipeline_config_from_json(j, dir);
  const PipelineResult r = run_pipeline(cfg);
  EXPECT_EQ(r.report.map, 1.0);
  EXPECT_EQ(load_results(dir / "merged.json"), r.merged);

  PipelineConfig missing = cfg;
  missing.tta.push_back({2.0, false});
  EXPECT_THROW(run_pipeline(missing), Error);
  fs::remove_all(dir);
}

TEST(PipelineTest, DeterministicAcrossRuns) {
  const SyntheticData data = small_data(8, 2);
  PipelineConfig cfg;
  cfg.tta = {{1.0, false}, {2.0, true}};
  OracleParams p;
  p.seed = 99;
  p.jitter_px = 3;
  p.fp_rate = 1.0;
  p.fn_rate = 0.2;
  p.score_spread = 0.2;
  p.score_mean = 0.7;
  p.maskiou_noise = 0.1;
  const auto a = run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, p));
  const auto b = run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, p));
  EXPECT_EQ(results_to_string(a.merged), results_to_string(b.merged));
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
}

TEST(PipelineConfigTest, ParsesOracleSection) {
  const nlohmann::json j = nlohmann::json::parse(R"({
    "dataset": "/data/gt.json",
    "seed": 7,
    "detector": {"oracle": {"score_distribution": [0.8, 0.1], "jitter_px": 2, "fp_rate": 0.5,
                            "fn_rate": 0.1, "maskiou_noise": 0.05}},
    "tta": [{"scale": 1.0}, {"scale": 1.5, "hflip": true}],
    "postprocess": {"method": "linear"},
    "eval": {"iou_kind": "box", "max_dets": 10}
  })");
  const PipelineConfig c = pipeline_config_from_json(j, "/elsewhere");
  EXPECT_EQ(c.dataset, fs::path("/data/gt.json"));
  const auto& p = std::get<OracleParams>(c.detector);
  EXPECT_EQ(p.seed, 7u);
  EXPECT_EQ(p.score_mean, 0.8);
  EXPECT_EQ(p.jitter_px, 2.0);
  EXPECT_EQ(c.tta.size(), 2u);
  EXPECT_TRUE(c.tta[1].hflip);
  EXPECT_EQ(c.postprocess.nms.method, SoftNmsMethod::kLinear);
  EXPECT_EQ(c.eval.iou_kind, IouKind::kBox);
  EXPECT_EQ(c.eval.max_dets, 10u);
}

TEST(PipelineConfigTest, ErrorsCarryJsonPaths) {
  auto path_of = [](const char* text) {
    try {
      pipeline_config_from_json(nlohmann::json::parse(text));
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kConfig);
      return e.message().substr(0, e.message().find(':'));
    }
    return std::string("<none>");
  };
  EXPECT_EQ(path_of(R"({"detector": {"oracle": {}}})"), "/dataset");
  EXPECT_EQ(path_of(R"({"dataset": "a", "detector": {}})"), "/detector");
  EXPECT_EQ(path_of(R"({"dataset": "a", "detector": {"oracle": {"fp_rate": 101}}})"), "/detector/oracle/fp_rate");
  EXPECT_EQ(path_of(R"({"dataset": "a", "detector": {"oracle": {}}, "tta": [{"scale": -1}]})"), "/tta/0/scale");
  EXPECT_EQ(path_of(R"({"dataset": "a", "detector": {"oracle": {}}, "postprocess": {"sigma": -1}})"),
            "/postprocess/sigma");
  EXPECT_EQ(path_of(R"({"dataset": "a", "detector": {"oracle": {}}, "extra": 1})"), "/extra");
  EXPECT_EQ(path_of(R"({"dataset": "a", "detector": {"oracle": {}}, "seed": -1})"), "/seed");
}

TEST(PipelineConfigTest, SignedIntegersAreAcceptedAsCounts) {
  nlohmann::json j = {{"dataset", "a"}, {"seed", 3}, {"detector", {{"oracle", nlohmann::json::object()}}}};
  j["postprocess"]["max_keep"] = 5;
  ASSERT_TRUE(j["seed"].is_number_integer());
  const PipelineConfig c = pipeline_config_from_json(j);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.postprocess.nms.max_keep, 5u);
}

TEST(PngTest, RoundTrip) {
  RandomStream rng(1);
  const ImageBuffer img = oracle::random_image(rng, 13, 21);
  const fs::path dir = temp_dir("segkit_png");
  write_png(img, dir / "a.png");
  EXPECT_EQ(read_png(dir / "a.png"), img);
  EXPECT_THROW(read_png(dir / "missing.png"), Error);
  fs::remove_all(dir);
}

TEST(ParallelTest, EverySlotVisitedOnceAndErrorsPropagate) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 8);
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 1000);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 5) throw Error(Errc::kIo, "boom");
               }, 4),
               Error);
}

}  // namespace
}  // namespace segkit
