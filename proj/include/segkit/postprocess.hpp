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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "segkit/coco.hpp"
#include "segkit/error.hpp"
#include "segkit/mask.hpp"

namespace segkit {

// ---------------------------------------------------------------------------
// Mask-IoU score calibration

// score <- score * mask_iou_pred wherever the prediction is present.
inline std::vector<Detection> calibrate_scores(std::vector<Detection> dets) {
  for (auto& d : dets) {
    if (d.mask_iou_pred) d.score *= *d.mask_iou_pred;
  }
  return dets;
}

// ---------------------------------------------------------------------------
// Soft-NMS

enum class SoftNmsMethod { kGaussian, kLinear };
enum class OverlapKind { kBox, kMask };

struct SoftNmsParams {
  SoftNmsMethod method = SoftNmsMethod::kGaussian;
  double sigma = 0.5;
  double iou_threshold = 0.3;
  double score_floor = 0.001;
  std::size_t max_keep = 100;
  OverlapKind overlap = OverlapKind::kBox;

  void validate() const {
    if (!(sigma > 0.0)) throw Error(Errc::kConfig, "/postprocess/sigma: must be > 0");
    if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
      throw Error(Errc::kConfig, "/postprocess/iou_threshold: must lie in [0, 1]");
    }
    if (!(score_floor >= 0.0 && score_floor <= 1.0)) {
      throw Error(Errc::kConfig, "/postprocess/score_floor: must lie in [0, 1]");
    }
  }
};

// Repeatedly emits the best remaining detection and decays the scores of
// the remaining same-category detections by their overlap with it:
//   gaussian: s *= exp(-iou^2 / sigma)
//   linear:   s *= 1 - iou, only when iou > iou_threshold
// Detections under score_floor are discarded. Equal scores go to the lower
// input index. Expects detections from a single image.
inline std::vector<Detection> soft_nms(const std::vector<Detection>& dets,
                                       const SoftNmsParams& p) {
  struct Live {
    std::size_t index;
    double score;
  };
  std::vector<Live> live;
  live.reserve(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!(dets[i].score < p.score_floor)) live.push_back({i, dets[i].score});
  }

  std::vector<Detection> out;
  while (!live.empty() && out.size() < p.max_keep) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < live.size(); ++k) {
      if (live[k].score > live[best].score ||
          (live[k].score == live[best].score && live[k].index < live[best].index)) {
        best = k;
      }
    }
    const Live top = live[best];
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(best));
    const Detection& kept = dets[top.index];
    out.push_back(kept);
    out.back().score = top.score;

    std::size_t w = 0;
    for (std::size_t k = 0; k < live.size(); ++k) {
      Live cand = live[k];
      const Detection& d = dets[cand.index];
      if (d.category_id == kept.category_id) {
        const double iou = p.overlap == OverlapKind::kBox ? box_iou(kept.bbox, d.bbox)
                                                          : rle_iou(kept.mask, d.mask);
        if (p.method == SoftNmsMethod::kGaussian) {
          cand.score *= std::exp(-(iou * iou) / p.sigma);
        } else if (iou > p.iou_threshold) {
          cand.score *= 1.0 - iou;
        }
      }
      if (!(cand.score < p.score_floor)) live[w++] = cand;
    }
    live.resize(w);
  }
  return out;
}

// Runs soft_nms independently per image; output is grouped by ascending
// image id.
inline std::vector<Detection> soft_nms_per_image(const std::vector<Detection>& dets,
                                                 const SoftNmsParams& p) {
  std::map<std::int64_t, std::vector<Detection>> by_image;
  for (const auto& d : dets) by_image[d.image_id].push_back(d);
  std::vector<Detection> out;
  for (const auto& [_, group] : by_image) {
    auto kept = soft_nms(group, p);
    out.insert(out.end(), std::make_move_iterator(kept.begin()),
               std::make_move_iterator(kept.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Test-time augmentation

// A view is the original image flipped (optionally) and then scaled.
struct TtaTransform {
  double scale = 1.0;
  bool hflipped = false;
  int original_height = 0;
  int original_width = 0;

  int view_height() const { return std::max(1, round_half_up(original_height * scale)); }
  int view_width() const { return std::max(1, round_half_up(original_width * scale)); }

  // Stable key used to name per-view results, e.g. "x1.5_hflip".
  std::string view_name() const {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), scale);
    std::string name = "x" + std::string(buf, res.ptr);
    if (hflipped) name += "_hflip";
    return name;
  }
};

inline std::vector<TtaTransform> default_tta_transforms(int height, int width) {
  std::vector<TtaTransform> out;
  for (double s : {1.0, 1.5, 2.0, 2.5, 3.0}) {
    for (bool flip : {false, true}) out.push_back(TtaTransform{s, flip, height, width});
  }
  return out;
}

// Original frame -> view frame.
inline std::vector<Detection> forward_map(std::vector<Detection> dets, const TtaTransform& t) {
  const double ow = t.original_width;
  for (auto& d : dets) {
    if (d.mask.height != t.original_height || d.mask.width != t.original_width) {
      throw Error(Errc::kShape, "detection mask does not match the original extent");
    }
    BBox b = d.bbox;
    BinaryMask m = rle_decode(d.mask);
    if (t.hflipped) {
      b = transform_box(b, box_op::HFlip{ow});
      m = hflip(m);
    }
    d.bbox = transform_box(b, box_op::Scale{t.scale});
    d.mask = rle_encode(resize(m, t.view_height(), t.view_width()));
  }
  return dets;
}

// View frame -> original frame. Scores are untouched.
inline std::vector<Detection> inverse_map(std::vector<Detection> dets, const TtaTransform& t) {
  if (!(t.scale > 0.0)) throw Error(Errc::kShape, "TTA scale must be positive");
  const double ow = t.original_width;
  for (auto& d : dets) {
    if (d.mask.height != t.view_height() || d.mask.width != t.view_width()) {
      throw Error(Errc::kShape, "mask extent " + std::to_string(d.mask.height) + "x" +
                                    std::to_string(d.mask.width) + " does not match view " +
                                    t.view_name());
    }
    BBox b{d.bbox.x / t.scale, d.bbox.y / t.scale, d.bbox.w / t.scale, d.bbox.h / t.scale};
    BinaryMask m = resize(rle_decode(d.mask), t.original_height, t.original_width);
    if (t.hflipped) {
      b = transform_box(b, box_op::HFlip{ow});
      m = hflip(m);
    }
    d.bbox = b;
    d.mask = rle_encode(m);
  }
  return dets;
}

struct TtaGroup {
  std::vector<Detection> detections;
  TtaTransform transform;
};

// Maps every view back to the original frame, concatenates in group order,
// then applies soft-NMS. Survivors keep their own masks.
inline std::vector<Detection> tta_merge(const std::vector<TtaGroup>& groups,
                                        const SoftNmsParams& p) {
  std::vector<Detection> all;
  for (const auto& g : groups) {
    auto mapped = inverse_map(g.detections, g.transform);
    all.insert(all.end(), std::make_move_iterator(mapped.begin()),
               std::make_move_iterator(mapped.end()));
  }
  return soft_nms(all, p);
}

// ---------------------------------------------------------------------------
// Configuration ("postprocess" section of the pipeline config)

struct PostprocessConfig {
  bool calibrate = true;
  SoftNmsParams nms;
};

inline PostprocessConfig postprocess_config_from_json(const nlohmann::json& j,
                                                      const std::string& path = "/postprocess") {
  PostprocessConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw Error(Errc::kConfig, path + ": expected an object");
  for (const auto& [key, v] : j.items()) {
    const std::string at = path + "/" + key;
    auto need_number = [&] {
      if (!v.is_number()) throw Error(Errc::kConfig, at + ": expected a number");
      return v.get<double>();
    };
    if (key == "calibrate") {
      if (!v.is_boolean()) throw Error(Errc::kConfig, at + ": expected a boolean");
      c.calibrate = v.get<bool>();
    } else if (key == "method") {
      const auto m = v.is_string() ? v.get<std::string>() : std::string{};
      if (m == "gaussian") c.nms.method = SoftNmsMethod::kGaussian;
      else if (m == "linear") c.nms.method = SoftNmsMethod::kLinear;
      else throw Error(Errc::kConfig, at + ": expected \"gaussian\" or \"linear\"");
    } else if (key == "sigma") {
      c.nms.sigma = need_number();
    } else if (key == "iou_threshold") {
      c.nms.iou_threshold = need_number();
    } else if (key == "score_floor") {
      c.nms.score_floor = need_number();
    } else if (key == "max_keep") {
      if (!detail::is_count(v)) throw Error(Errc::kConfig, at + ": expected a count");
      c.nms.max_keep = v.get<std::size_t>();
    } else if (key == "overlap") {
      const auto m = v.is_string() ? v.get<std::string>() : std::string{};
      if (m == "box") c.nms.overlap = OverlapKind::kBox;
      else if (m == "mask") c.nms.overlap = OverlapKind::kMask;
      else throw Error(Errc::kConfig, at + ": expected \"box\" or \"mask\"");
    } else if (key == "merge") {
      if (v != "MERGE_CONCAT_SOFTNMS") {
        throw Error(Errc::kConfig, at + ": only MERGE_CONCAT_SOFTNMS is supported");
      }
    } else {
      throw Error(Errc::kConfig, at + ": unknown key");
    }
  }
  c.nms.validate();
  return c;
}

// calibrate (optional) -> per-image soft-NMS, the order used everywhere.
inline std::vector<Detection> postprocess(std::vector<Detection> dets,
                                          const PostprocessConfig& cfg) {
  if (cfg.calibrate) dets = calibrate_scores(std::move(dets));
  return soft_nms_per_image(dets, cfg.nms);
}

}  // namespace segkit
