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
#include <cstdint>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "segkit/coco.hpp"
#include "segkit/error.hpp"
#include "segkit/mask.hpp"

// COCO-style instance segmentation AP: greedy per-image matching, pooled
// precision/recall per category, 101-point interpolated AP per IoU
// threshold, and the mean over thresholds (AP@0.50:0.95).

namespace segkit {

enum class IouKind { kMask, kBox };

struct EvalParams {
  std::vector<double> iou_thresholds = default_thresholds();
  int recall_points = 101;
  std::size_t max_dets = 100;
  IouKind iou_kind = IouKind::kMask;

  // 0.50:0.05:0.95, each value the double nearest to k/100.
  static std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int k = 50; k <= 95; k += 5) t.push_back(k / 100.0);
    return t;
  }

  void validate() const {
    if (iou_thresholds.empty()) throw Error(Errc::kConfig, "/eval/iou_thresholds: empty");
    for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
      if (!(iou_thresholds[i] >= 0.0 && iou_thresholds[i] <= 1.0)) {
        throw Error(Errc::kConfig, "/eval/iou_thresholds: values must lie in [0, 1]");
      }
      if (i > 0 && !(iou_thresholds[i] > iou_thresholds[i - 1])) {
        throw Error(Errc::kConfig, "/eval/iou_thresholds: must be strictly increasing");
      }
    }
    if (recall_points < 2) throw Error(Errc::kConfig, "/eval/recall_points: must be >= 2");
    if (max_dets < 1) throw Error(Errc::kConfig, "/eval/max_dets: must be >= 1");
  }
};

struct CategoryReport {
  std::vector<double> ap_per_threshold;
  double map = 0.0;
  friend bool operator==(const CategoryReport&, const CategoryReport&) = default;
};

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<double> ap_per_threshold;
  double map = 0.0;
  std::map<std::int64_t, CategoryReport> per_category;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct Match {
  std::size_t det_index = 0;
  std::optional<std::size_t> gt_index;
  bool ignored = false;  // unmatched but covering a crowd region
  friend bool operator==(const Match&, const Match&) = default;
};

namespace detail {

inline double overlap(const Detection& d, const Annotation& g, IouKind kind) {
  if (kind == IouKind::kBox) {
    if (!g.iscrowd) return box_iou(d.bbox, g.bbox);
    const double a = d.bbox.area();
    return a > 0.0 ? box_intersection(d.bbox, g.bbox) / a : 0.0;
  }
  if (d.mask.height != g.mask.height || d.mask.width != g.mask.width) {
    throw Error(Errc::kShapeMismatch, "detection mask extent differs from its image");
  }
  if (!g.iscrowd) return rle_iou(d.mask, g.mask);
  // Crowd regions: intersection over the detection's own area.
  const auto a = rle_area(d.mask);
  return a > 0 ? static_cast<double>(rle_intersection(d.mask, g.mask)) / static_cast<double>(a)
               : 0.0;
}

// Detection indices by descending score, ties by index, truncated.
inline std::vector<std::size_t> ranked(const std::vector<Detection>& dets, std::size_t max_dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  if (order.size() > max_dets) order.resize(max_dets);
  return order;
}

// Greedy matching given the overlap matrix ious[rank][gt].
inline std::vector<Match> greedy_match(const std::vector<std::size_t>& order,
                                       const std::vector<std::vector<double>>& ious,
                                       const std::vector<Detection>& dets,
                                       const std::vector<Annotation>& gts, double thr) {
  std::vector<bool> taken(gts.size(), false);
  std::vector<Match> out;
  out.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Detection& d = dets[order[r]];
    Match m{order[r], std::nullopt, false};
    double best = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].iscrowd || taken[g] || gts[g].category_id != d.category_id) continue;
      const double iou = ious[r][g];
      if (iou >= thr && iou > best) {
        best = iou;
        m.gt_index = g;
      }
    }
    if (m.gt_index) {
      taken[*m.gt_index] = true;
    } else {
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].iscrowd && gts[g].category_id == d.category_id && ious[r][g] >= thr) {
          m.ignored = true;
          break;
        }
      }
    }
    out.push_back(m);
  }
  return out;
}

inline std::vector<std::vector<double>> overlap_matrix(const std::vector<std::size_t>& order,
                                                       const std::vector<Detection>& dets,
                                                       const std::vector<Annotation>& gts,
                                                       IouKind kind) {
  std::vector<std::vector<double>> ious(order.size(), std::vector<double>(gts.size(), 0.0));
  for (std::size_t r = 0; r < order.size(); ++r) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (dets[order[r]].category_id == gts[g].category_id) {
        ious[r][g] = overlap(dets[order[r]], gts[g], kind);
      }
    }
  }
  return ious;
}

}  // namespace detail

// Matches one image's detections against its ground truth at threshold
// `thr`. Entries come back in processing order (descending score).
inline std::vector<Match> match_image(const std::vector<Detection>& dets,
                                      const std::vector<Annotation>& gts, double thr,
                                      const EvalParams& p) {
  const auto order = detail::ranked(dets, p.max_dets);
  const auto ious = detail::overlap_matrix(order, dets, gts, p.iou_kind);
  return detail::greedy_match(order, ious, dets, gts, thr);
}

// `tp` lists non-ignored detections by descending score (true = matched).
// Returns nullopt when there is nothing to score: no ground truth and no
// detections.
inline std::optional<double> average_precision(const std::vector<bool>& tp,
                                               std::int64_t total_gt, const EvalParams& p) {
  if (total_gt == 0) {
    if (tp.empty()) return std::nullopt;
    return 0.0;
  }
  const std::size_t n = tp.size();
  std::vector<std::int64_t> tp_cum(n);
  std::vector<double> precision(n);
  std::int64_t tps = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tps += tp[i] ? 1 : 0;
    tp_cum[i] = tps;
    precision[i] = static_cast<double>(tps) / static_cast<double>(i + 1);
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  // Recall point k is k / (R - 1); recall(i) >= k / (R - 1) is checked in
  // integers to avoid rounding at the boundaries.
  const std::int64_t steps = p.recall_points - 1;
  double sum = 0.0;
  std::size_t i = 0;
  for (std::int64_t k = 0; k <= steps; ++k) {
    while (i < n && tp_cum[i] * steps < k * total_gt) ++i;
    if (i == n) break;
    sum += precision[i];
  }
  return sum / static_cast<double>(p.recall_points);
}

inline EvalReport evaluate(const std::vector<Detection>& dets, const Dataset& gt,
                           const EvalParams& p = {}) {
  p.validate();
  std::set<std::int64_t> category_ids;
  for (const auto& c : gt.categories) category_ids.insert(c.id);
  std::map<std::int64_t, std::size_t> image_order;
  {
    std::vector<std::int64_t> ids;
    for (const auto& img : gt.images) ids.push_back(img.id);
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) image_order[ids[i]] = i;
  }
  for (const auto& d : dets) {
    if (!image_order.contains(d.image_id)) {
      throw Error(Errc::kUnknownId, "detection references unknown image_id " +
                                        std::to_string(d.image_id));
    }
    if (!category_ids.contains(d.category_id)) {
      throw Error(Errc::kUnknownId, "detection references unknown category_id " +
                                        std::to_string(d.category_id));
    }
  }

  // Bucket by (category, image).
  std::map<std::pair<std::int64_t, std::size_t>, std::vector<Detection>> det_cells;
  std::map<std::pair<std::int64_t, std::size_t>, std::vector<Annotation>> gt_cells;
  for (const auto& d : dets) det_cells[{d.category_id, image_order.at(d.image_id)}].push_back(d);
  std::map<std::int64_t, std::int64_t> npos;
  for (const auto& a : gt.annotations) {
    gt_cells[{a.category_id, image_order.at(a.image_id)}].push_back(a);
    if (!a.iscrowd) ++npos[a.category_id];
  }

  const std::size_t nthr = p.iou_thresholds.size();
  EvalReport report;
  report.thresholds = p.iou_thresholds;
  report.ap_per_threshold.assign(nthr, 0.0);

  static const std::vector<Detection> kNoDets;
  static const std::vector<Annotation> kNoGts;
  for (std::int64_t cat : category_ids) {
    const auto np = npos.find(cat);
    if (np == npos.end() || np->second == 0) continue;

    struct Scored {
      double score;
      bool tp;
    };
    std::vector<std::vector<Scored>> pooled(nthr);
    for (std::size_t img = 0; img < image_order.size(); ++img) {
      const auto dit = det_cells.find({cat, img});
      const auto git = gt_cells.find({cat, img});
      const auto& cell_dets = dit == det_cells.end() ? kNoDets : dit->second;
      const auto& cell_gts = git == gt_cells.end() ? kNoGts : git->second;
      if (cell_dets.empty()) continue;
      const auto order = detail::ranked(cell_dets, p.max_dets);
      const auto ious = detail::overlap_matrix(order, cell_dets, cell_gts, p.iou_kind);
      for (std::size_t t = 0; t < nthr; ++t) {
        for (const Match& m : detail::greedy_match(order, ious, cell_dets, cell_gts,
                                                   p.iou_thresholds[t])) {
          if (m.ignored) continue;
          pooled[t].push_back({cell_dets[m.det_index].score, m.gt_index.has_value()});
        }
      }
    }

    CategoryReport cr;
    for (std::size_t t = 0; t < nthr; ++t) {
      auto& seq = pooled[t];
      std::stable_sort(seq.begin(), seq.end(),
                       [](const Scored& a, const Scored& b) { return a.score > b.score; });
      std::vector<bool> tp;
      tp.reserve(seq.size());
      for (const auto& s : seq) tp.push_back(s.tp);
      cr.ap_per_threshold.push_back(average_precision(tp, np->second, p).value_or(0.0));
    }
    cr.map = std::accumulate(cr.ap_per_threshold.begin(), cr.ap_per_threshold.end(), 0.0) /
             static_cast<double>(nthr);
    report.per_category.emplace(cat, std::move(cr));
  }

  if (!report.per_category.empty()) {
    for (std::size_t t = 0; t < nthr; ++t) {
      double sum = 0.0;
      for (const auto& [_, cr] : report.per_category) sum += cr.ap_per_threshold[t];
      report.ap_per_threshold[t] = sum / static_cast<double>(report.per_category.size());
    }
  }
  report.map = std::accumulate(report.ap_per_threshold.begin(), report.ap_per_threshold.end(),
                               0.0) /
               static_cast<double>(nthr);
  return report;
}

// ---------------------------------------------------------------------------
// JSON form: {"map": m, "ap_per_threshold": {"0.50": ap, ...},
//             "per_category": {"<id>": {"map": m, "ap_per_threshold": {...}}}}

inline std::string threshold_key(double t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  auto per_threshold = [&](const std::vector<double>& aps) {
    nlohmann::ordered_json o = nlohmann::ordered_json::object();
    for (std::size_t t = 0; t < r.thresholds.size(); ++t) o[threshold_key(r.thresholds[t])] = aps[t];
    return o;
  };
  nlohmann::ordered_json j;
  j["map"] = r.map;
  j["ap_per_threshold"] = per_threshold(r.ap_per_threshold);
  nlohmann::ordered_json cats = nlohmann::ordered_json::object();
  for (const auto& [id, cr] : r.per_category) {
    cats[std::to_string(id)] = {{"map", cr.map}, {"ap_per_threshold", per_threshold(cr.ap_per_threshold)}};
  }
  j["per_category"] = std::move(cats);
  return j;
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.map = j.at("map").get<double>();
    // Keys are fixed-width "0.NN" strings, so lexicographic order is numeric.
    for (const auto& [key, ap] : j.at("ap_per_threshold").items()) {
      r.thresholds.push_back(std::stod(key));
      r.ap_per_threshold.push_back(ap.get<double>());
    }
    if (j.contains("per_category")) {
      for (const auto& [key, cj] : j.at("per_category").items()) {
        CategoryReport cr;
        cr.map = cj.at("map").get<double>();
        for (const auto& [_, ap] : cj.at("ap_per_threshold").items()) {
          cr.ap_per_threshold.push_back(ap.get<double>());
        }
        r.per_category.emplace(std::stoll(key), std::move(cr));
      }
    }
  } catch (const std::exception& e) {
    throw Error(Errc::kSchema, std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

}  // namespace segkit
