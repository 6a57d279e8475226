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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "segkit/coco.hpp"
#include "segkit/error.hpp"
#include "segkit/eval.hpp"
#include "segkit/image.hpp"
#include "segkit/mask.hpp"
#include "segkit/parallel.hpp"
#include "segkit/postprocess.hpp"
#include "segkit/random.hpp"

namespace segkit {

// What a detector is told about the view it is asked to process.
struct ViewContext {
  std::int64_t image_id = 0;
  std::size_t view_index = 0;
  TtaTransform transform;
  // View pixels; only populated for detectors that ask for them.
  const ImageBuffer* image = nullptr;
};

// A detector maps one view to detections in that view's frame. Calls may
// run concurrently and must not depend on call order.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> infer(const ViewContext& view) const = 0;
  virtual bool wants_pixels() const { return false; }
};

// ---------------------------------------------------------------------------
// Oracle detector

struct OracleParams {
  std::uint64_t seed = 0;
  double score_mean = 1.0;
  double score_spread = 0.0;
  double jitter_px = 0.0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  double maskiou_noise = 0.0;

  // Expected false positives per image; bounded so the Poisson draw stays cheap.
  static constexpr double kMaxFpRate = 100.0;

  void validate(const std::string& path = "/detector/oracle") const {
    auto unit = [&](double v, const char* key) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::kConfig, path + "/" + key + ": must lie in [0, 1]");
    };
    auto nonneg = [&](double v, const char* key) {
      if (!(v >= 0.0)) throw Error(Errc::kConfig, path + "/" + key + ": must be >= 0");
    };
    unit(score_mean, "score_mean");
    if (!(fp_rate >= 0.0 && fp_rate <= kMaxFpRate)) {
      throw Error(Errc::kConfig, path + "/fp_rate: must lie in [0, 100]");
    }
    unit(fn_rate, "fn_rate");
    nonneg(score_spread, "score_spread");
    nonneg(jitter_px, "jitter_px");
    nonneg(maskiou_noise, "maskiou_noise");
  }
};

namespace detail {

inline int round_away(double v) {
  return static_cast<int>(v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5));
}

// Oracle detections for one image in its original frame, drawing from `rng`.
// The number of draws per ground-truth instance is fixed.
inline std::vector<Detection> oracle_detections(std::int64_t image_id, const Dataset& gt,
                                                const OracleParams& p, RandomStream rng) {
  const ImageInfo* info = gt.find_image(image_id);
  if (info == nullptr) throw Error(Errc::kUnknownId, "image " + std::to_string(image_id));
  const auto anns = gt.annotations_for(image_id);

  std::vector<Detection> out;
  for (const Annotation* a : anns) {
    if (a->iscrowd) continue;
    const bool dropped = rng.bernoulli(p.fn_rate);
    const double u_jitter = rng.uniform(-1.0, 1.0);
    const double u_score = rng.uniform(-1.0, 1.0);
    const double u_noise = rng.uniform(-1.0, 1.0);
    if (dropped) continue;
    const BinaryMask truth = rle_decode(a->mask);
    const BinaryMask jittered = morph(truth, round_away(u_jitter * p.jitter_px));
    if (jittered.count() == 0) continue;
    Detection d;
    d.image_id = image_id;
    d.category_id = a->category_id;
    d.mask = rle_encode(jittered);
    d.bbox = rle_bbox(d.mask);
    d.score = std::clamp(p.score_mean + p.score_spread * u_score, 0.0, 1.0);
    d.mask_iou_pred = std::clamp(mask_iou(jittered, truth) + p.maskiou_noise * u_noise, 0.0, 1.0);
    out.push_back(std::move(d));
  }

  const std::int64_t n_fp = rng.poisson(p.fp_rate);
  for (std::int64_t k = 0; k < n_fp && !gt.categories.empty(); ++k) {
    const int w = static_cast<int>(rng.uniform_int(std::max(1, info->width / 16), std::max(1, info->width / 4)));
    const int h = static_cast<int>(rng.uniform_int(std::max(1, info->height / 16), std::max(1, info->height / 4)));
    const int x = static_cast<int>(rng.uniform_int(0, info->width - w));
    const int y = static_cast<int>(rng.uniform_int(0, info->height - h));
    const auto cat = gt.categories[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(gt.categories.size()) - 1))].id;
    const double score = rng.uniform(0.0, 0.3);
    const double u_noise = rng.uniform(-1.0, 1.0);
    BinaryMask blob(info->height, info->width);
    for (int yy = y; yy < y + h; ++yy) {
      for (int xx = x; xx < x + w; ++xx) blob.set(yy, xx);
    }
    Detection d;
    d.image_id = image_id;
    d.category_id = cat;
    d.mask = rle_encode(blob);
    d.bbox = BBox{static_cast<double>(x), static_cast<double>(y), static_cast<double>(w),
                  static_cast<double>(h)};
    d.score = score;
    double best = 0.0;
    for (const Annotation* a : anns) {
      if (a->category_id == cat && !a->iscrowd) best = std::max(best, rle_iou(d.mask, a->mask));
    }
    d.mask_iou_pred = std::clamp(best + p.maskiou_noise * u_noise, 0.0, 1.0);
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace detail

// Detections derived from ground truth: each instance survives with
// probability 1 - fn_rate, its mask dilated or eroded by up to jitter_px,
// plus Poisson(fp_rate) low-scoring rectangles.
inline std::vector<Detection> oracle_infer(std::int64_t image_id, const Dataset& gt,
                                           const OracleParams& p) {
  return detail::oracle_detections(image_id, gt, p,
                                   RandomStream(p.seed).child(static_cast<std::uint64_t>(image_id), 0));
}

class OracleDetector final : public Detector {
 public:
  OracleDetector(const Dataset& gt, OracleParams params) : gt_(gt), params_(params) {}

  // Every view draws its own noise; view 0 reproduces oracle_infer.
  std::vector<Detection> infer(const ViewContext& view) const override {
    auto dets = detail::oracle_detections(
        view.image_id, gt_, params_,
        RandomStream(params_.seed).child(static_cast<std::uint64_t>(view.image_id), view.view_index));
    return forward_map(std::move(dets), view.transform);
  }

 private:
  const Dataset& gt_;
  OracleParams params_;
};

// Pre-computed detections, one results file per view name.
class ResultsFileDetector final : public Detector {
 public:
  explicit ResultsFileDetector(std::map<std::string, std::vector<Detection>> by_view)
      : by_view_(std::move(by_view)) {}

  static ResultsFileDetector load(const std::map<std::string, std::filesystem::path>& files) {
    std::map<std::string, std::vector<Detection>> by_view;
    for (const auto& [view, path] : files) by_view.emplace(view, load_results(path));
    return ResultsFileDetector(std::move(by_view));
  }

  std::vector<Detection> infer(const ViewContext& view) const override {
    const std::string name = view.transform.view_name();
    const auto it = by_view_.find(name);
    if (it == by_view_.end()) {
      throw Error(Errc::kConfig, "/detector/results_files: no results for view " + name);
    }
    std::vector<Detection> out;
    for (const auto& d : it->second) {
      if (d.image_id == view.image_id) out.push_back(d);
    }
    return out;
  }

 private:
  std::map<std::string, std::vector<Detection>> by_view_;
};

// ---------------------------------------------------------------------------
// Pipeline

struct TtaView {
  double scale = 1.0;
  bool hflip = false;
  friend bool operator==(const TtaView&, const TtaView&) = default;
};

inline std::vector<TtaView> default_tta_views() {
  std::vector<TtaView> out;
  for (double s : {1.0, 1.5, 2.0, 2.5, 3.0}) {
    for (bool flip : {false, true}) out.push_back({s, flip});
  }
  return out;
}

struct PipelineConfig {
  std::filesystem::path dataset;
  std::variant<OracleParams, std::map<std::string, std::filesystem::path>> detector = OracleParams{};
  std::vector<TtaView> tta{TtaView{}};
  PostprocessConfig postprocess;
  EvalParams eval;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> output;
};

// Relative paths resolve against `base_dir` (the config file's directory).
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j,
                                                const std::filesystem::path& base_dir = {}) {
  auto fail = [](const std::string& path, const std::string& msg) -> void {
    throw Error(Errc::kConfig, path + ": " + msg);
  };
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  if (!j.is_object()) fail("/", "pipeline config must be an object");
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> kKnown = {"dataset", "detector", "tta", "postprocess",
                                                 "eval", "seed", "output"};
    if (!kKnown.contains(key)) fail("/" + key, "unknown key");
  }

  PipelineConfig c;
  if (!j.contains("dataset") || !j["dataset"].is_string()) fail("/dataset", "expected a path string");
  c.dataset = resolve(j["dataset"].get<std::string>());

  if (j.contains("seed")) {
    if (!detail::is_count(j["seed"])) fail("/seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }

  if (!j.contains("detector") || !j["detector"].is_object()) fail("/detector", "expected an object");
  const auto& det = j["detector"];
  if (det.contains("oracle") == det.contains("results_files")) {
    fail("/detector", "expected exactly one of \"oracle\" or \"results_files\"");
  }
  if (det.contains("oracle")) {
    const auto& o = det["oracle"];
    if (!o.is_object()) fail("/detector/oracle", "expected an object");
    OracleParams p;
    p.seed = c.seed;
    for (const auto& [key, v] : o.items()) {
      const std::string at = "/detector/oracle/" + key;
      if (key == "seed") {
        if (!detail::is_count(v)) fail(at, "expected a non-negative integer");
        p.seed = v.get<std::uint64_t>();
        continue;
      }
      if (key == "score_distribution") {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
          fail(at, "expected [mean, spread]");
        }
        p.score_mean = v[0].get<double>();
        p.score_spread = v[1].get<double>();
        continue;
      }
      double* slot = key == "jitter_px"       ? &p.jitter_px
                     : key == "fp_rate"       ? &p.fp_rate
                     : key == "fn_rate"       ? &p.fn_rate
                     : key == "maskiou_noise" ? &p.maskiou_noise
                                              : nullptr;
      if (slot == nullptr) fail(at, "unknown key");
      if (!v.is_number()) fail(at, "expected a number");
      *slot = v.get<double>();
    }
    p.validate();
    c.detector = p;
  } else {
    const auto& files = det["results_files"];
    if (!files.is_object() || files.empty()) {
      fail("/detector/results_files", "expected a non-empty map from view name to path");
    }
    std::map<std::string, std::filesystem::path> m;
    for (const auto& [view, path] : files.items()) {
      if (!path.is_string()) fail("/detector/results_files/" + view, "expected a path string");
      m.emplace(view, resolve(path.get<std::string>()));
    }
    c.detector = std::move(m);
  }

  if (j.contains("tta")) {
    const auto& t = j["tta"];
    if (!t.is_array() || t.empty()) fail("/tta", "expected a non-empty list of {scale, hflip}");
    c.tta.clear();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::string at = "/tta/" + std::to_string(i);
      if (!t[i].is_object()) fail(at, "expected an object");
      TtaView v;
      if (!t[i].contains("scale") || !t[i]["scale"].is_number() || !(t[i]["scale"].get<double>() > 0.0)) {
        fail(at + "/scale", "expected a positive number");
      }
      v.scale = t[i]["scale"].get<double>();
      if (t[i].contains("hflip")) {
        if (!t[i]["hflip"].is_boolean()) fail(at + "/hflip", "expected a boolean");
        v.hflip = t[i]["hflip"].get<bool>();
      }
      c.tta.push_back(v);
    }
  }

  if (j.contains("postprocess")) c.postprocess = postprocess_config_from_json(j["postprocess"]);

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    if (!e.is_object()) fail("/eval", "expected an object");
    for (const auto& [key, v] : e.items()) {
      const std::string at = "/eval/" + key;
      if (key == "iou_kind") {
        if (v == "mask") c.eval.iou_kind = IouKind::kMask;
        else if (v == "box") c.eval.iou_kind = IouKind::kBox;
        else fail(at, "expected \"mask\" or \"box\"");
      } else if (key == "max_dets") {
        if (!detail::is_count(v) || v.get<std::size_t>() == 0) fail(at, "expected a positive count");
        c.eval.max_dets = v.get<std::size_t>();
      } else if (key == "iou_thresholds") {
        if (!v.is_array()) fail(at, "expected a list of numbers");
        c.eval.iou_thresholds.clear();
        for (const auto& x : v) {
          if (!x.is_number()) fail(at, "expected a list of numbers");
          c.eval.iou_thresholds.push_back(x.get<double>());
        }
      } else {
        fail(at, "unknown key");
      }
    }
    c.eval.validate();
  }

  if (j.contains("output")) {
    if (!j["output"].is_string()) fail("/output", "expected a path string");
    c.output = resolve(j["output"].get<std::string>());
  }
  return c;
}

struct PipelineResult {
  EvalReport report;
  std::vector<Detection> merged;  // grouped by ascending image id
};

using ImageProvider = std::function<ImageBuffer(const ImageInfo&)>;

// Per image: run the detector on every TTA view, calibrate scores, map back
// and fuse with soft-NMS; then evaluate everything against the ground truth.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const Dataset& gt,
                                   const Detector& detector,
                                   const ImageProvider& images = nullptr) {
  std::vector<const ImageInfo*> order;
  for (const auto& img : gt.images) order.push_back(&img);
  std::sort(order.begin(), order.end(),
            [](const ImageInfo* a, const ImageInfo* b) { return a->id < b->id; });

  std::vector<std::vector<Detection>> per_image(order.size());
  parallel_for(order.size(), [&](std::size_t i) {
    const ImageInfo& info = *order[i];
    std::optional<ImageBuffer> original;
    if (detector.wants_pixels()) {
      if (!images) throw Error(Errc::kConfig, "/detector: detector needs pixels but none are available");
      original = images(info);
    }
    std::vector<TtaGroup> groups;
    for (std::size_t v = 0; v < cfg.tta.size(); ++v) {
      ViewContext ctx;
      ctx.image_id = info.id;
      ctx.view_index = v;
      ctx.transform = TtaTransform{cfg.tta[v].scale, cfg.tta[v].hflip, info.height, info.width};
      std::optional<ImageBuffer> view_image;
      if (original) {
        view_image = cfg.tta[v].hflip ? hflip(*original) : *original;
        view_image = resize(*view_image, ctx.transform.view_height(), ctx.transform.view_width());
        ctx.image = &*view_image;
      }
      auto dets = detector.infer(ctx);
      if (cfg.postprocess.calibrate) dets = calibrate_scores(std::move(dets));
      groups.push_back(TtaGroup{std::move(dets), ctx.transform});
    }
    per_image[i] = tta_merge(groups, cfg.postprocess.nms);
  });

  PipelineResult result;
  for (auto& dets : per_image) {
    result.merged.insert(result.merged.end(), std::make_move_iterator(dets.begin()),
                         std::make_move_iterator(dets.end()));
  }
  result.report = evaluate(result.merged, gt, cfg.eval);
  return result;
}

// Loads the dataset and detector named by `cfg`, runs, and writes the merged
// results when an output path is configured.
inline PipelineResult run_pipeline(const PipelineConfig& cfg, const ImageProvider& images = nullptr) {
  const Dataset gt = load_coco(cfg.dataset);
  PipelineResult result;
  if (const auto* oracle = std::get_if<OracleParams>(&cfg.detector)) {
    result = run_pipeline(cfg, gt, OracleDetector(gt, *oracle), images);
  } else {
    const auto& files = std::get<std::map<std::string, std::filesystem::path>>(cfg.detector);
    result = run_pipeline(cfg, gt, ResultsFileDetector::load(files), images);
  }
  if (cfg.output) write_results(result.merged, *cfg.output);
  return result;
}

}  // namespace segkit
