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
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "segkit/error.hpp"
#include "segkit/mask.hpp"

namespace segkit {

struct ImageInfo {
  std::int64_t id = 0;
  std::string file_name;
  int height = 0;
  int width = 0;
  friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
  friend bool operator==(const Category&, const Category&) = default;
};

// Ground-truth instance. bbox and area always describe `mask`; the loader
// recomputes them rather than trusting the file.
struct Annotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  BBox bbox;
  RleMask mask;
  std::int64_t area = 0;
  bool iscrowd = false;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Detection {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  BBox bbox;
  RleMask mask;
  double score = 0.0;
  // Output of a mask-IoU head, when the detector has one.
  std::optional<double> mask_iou_pred;
  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Dataset {
  std::vector<ImageInfo> images;
  std::vector<Annotation> annotations;
  std::vector<Category> categories;

  const ImageInfo* find_image(std::int64_t id) const {
    for (const auto& img : images) {
      if (img.id == id) return &img;
    }
    return nullptr;
  }

  std::vector<const Annotation*> annotations_for(std::int64_t image_id) const {
    std::vector<const Annotation*> out;
    for (const auto& a : annotations) {
      if (a.image_id == image_id) out.push_back(&a);
    }
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline Annotation make_annotation(std::int64_t id, std::int64_t image_id,
                                  std::int64_t category_id, const BinaryMask& mask,
                                  bool iscrowd = false) {
  Annotation a;
  a.id = id;
  a.image_id = image_id;
  a.category_id = category_id;
  a.mask = rle_encode(mask);
  a.bbox = rle_bbox(a.mask);
  a.area = rle_area(a.mask);
  a.iscrowd = iscrowd;
  return a;
}

// ---------------------------------------------------------------------------
// COCO compressed RLE strings: each count (after the first two, as a delta
// against the count two positions back) is written as little-endian 5-bit
// groups with a continuation bit, offset into printable ASCII from '0'.

inline std::string rle_to_string(const RleMask& rle) {
  std::string s;
  const auto& cnts = rle.counts;
  for (std::size_t i = 0; i < cnts.size(); ++i) {
    std::int64_t x = cnts[i];
    if (i > 2) x -= static_cast<std::int64_t>(cnts[i - 2]);
    bool more = true;
    while (more) {
      std::int64_t c = x & 0x1f;
      x >>= 5;
      more = (c & 0x10) ? x != -1 : x != 0;
      if (more) c |= 0x20;
      s.push_back(static_cast<char>(c + 48));
    }
  }
  return s;
}

inline RleMask rle_from_string(std::string_view s, int height, int width) {
  RleMask rle{height, width, {}};
  std::size_t p = 0;
  while (p < s.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= s.size()) throw Error(Errc::kMalformedRle, "truncated RLE string");
      const int c = static_cast<unsigned char>(s[p]) - 48;
      if (c < 0 || c > 63 || k >= 12) {
        throw Error(Errc::kMalformedRle, "invalid character in RLE string");
      }
      x |= static_cast<std::int64_t>(c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
    }
    const std::size_t m = rle.counts.size();
    if (m > 2) x += static_cast<std::int64_t>(rle.counts[m - 2]);
    if (x < 0 || x > UINT32_MAX) throw Error(Errc::kMalformedRle, "RLE count out of range");
    rle.counts.push_back(static_cast<std::uint32_t>(x));
  }
  return rle;
}

// ---------------------------------------------------------------------------
// Polygon rasterization: a pixel is foreground when its center lies inside
// any polygon under the even-odd rule.

inline BinaryMask rasterize_polygons(const std::vector<std::vector<double>>& polygons,
                                     int height, int width) {
  BinaryMask mask(height, width);
  std::vector<double> xs;
  for (const auto& poly : polygons) {
    if (poly.size() < 6 || poly.size() % 2 != 0) {
      throw Error(Errc::kMask, "polygon needs an even number (>= 6) of coordinates");
    }
    const std::size_t n = poly.size() / 2;
    for (int y = 0; y < height; ++y) {
      const double yc = y + 0.5;
      xs.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const double x0 = poly[2 * i], y0 = poly[2 * i + 1];
        const double x1 = poly[2 * ((i + 1) % n)], y1 = poly[2 * ((i + 1) % n) + 1];
        if ((y0 <= yc) != (y1 <= yc)) {
          xs.push_back(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
        }
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
        // Centers x + 0.5 in [xs[i], xs[i+1]).
        const double lo = std::ceil(xs[i] - 0.5);
        const double hi = std::ceil(xs[i + 1] - 0.5);
        const int x_begin = static_cast<int>(std::clamp(lo, 0.0, static_cast<double>(width)));
        const int x_end = static_cast<int>(std::clamp(hi, 0.0, static_cast<double>(width)));
        for (int x = x_begin; x < x_end; ++x) mask.set(y, x);
      }
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

using json = nlohmann::json;

inline const json& require(const json& obj, std::string_view key, std::string_view where) {
  if (!obj.is_object()) throw Error(Errc::kSchema, std::string(where) + " is not an object");
  const auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(Errc::kSchema, std::string(where) + ": missing field '" + std::string(key) + "'");
  }
  return *it;
}

template <typename T>
T require_as(const json& obj, std::string_view key, std::string_view where) {
  const json& v = require(obj, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::kSchema, std::string(where) + ": field '" + std::string(key) +
                                   "' has the wrong type");
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::kIo, "write failed for " + path.string());
}

inline json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::kParse, std::string(what) + ": " + e.what());
  }
}

inline RleMask rle_from_json(const json& seg, int height, int width, std::string_view where) {
  const auto size = require(seg, "size", where);
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() ||
      !size[1].is_number_integer()) {
    throw Error(Errc::kMask, std::string(where) + ": RLE size must be [h, w]");
  }
  const int h = size[0].get<int>();
  const int w = size[1].get<int>();
  if (height > 0 && (h != height || w != width)) {
    throw Error(Errc::kMask, std::string(where) + ": RLE size does not match image");
  }
  const auto& counts = require(seg, "counts", where);
  RleMask rle;
  try {
    if (counts.is_string()) {
      rle = rle_from_string(counts.get<std::string>(), h, w);
    } else if (counts.is_array()) {
      rle = RleMask{h, w, {}};
      for (const auto& c : counts) {
        if (!c.is_number_integer() || c.get<std::int64_t>() < 0) {
          throw Error(Errc::kMalformedRle, "negative or non-integer count");
        }
        rle.counts.push_back(c.get<std::uint32_t>());
      }
    } else {
      throw Error(Errc::kMalformedRle, "counts must be a string or an array");
    }
    // Canonicalize (merges interior zero runs) and validate the total.
    return rle_encode(rle_decode(rle));
  } catch (const Error& e) {
    if (e.code() == Errc::kMask) throw;
    throw Error(Errc::kMask, std::string(where) + ": " + e.what());
  }
}

inline std::int64_t require_id(const json& obj, std::string_view key, std::string_view where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) {
    throw Error(Errc::kSchema, std::string(where) + ": field '" + std::string(key) +
                                   "' must be an integer");
  }
  return v.get<std::int64_t>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dataset ingestion

inline Dataset parse_coco(std::string_view text) {
  using detail::json;
  const json root = detail::parse_json(text, "COCO annotation file");
  if (!root.is_object()) throw Error(Errc::kSchema, "top level must be an object");

  Dataset ds;
  std::map<std::int64_t, std::size_t> image_index;
  for (const auto& img : detail::require(root, "images", "root")) {
    ImageInfo info;
    info.id = detail::require_id(img, "id", "images[]");
    info.file_name = img.value("file_name", std::string{});
    info.height = detail::require_as<int>(img, "height", "images[]");
    info.width = detail::require_as<int>(img, "width", "images[]");
    if (info.height < 1 || info.width < 1) {
      throw Error(Errc::kSchema, "image " + std::to_string(info.id) + " has empty extent");
    }
    if (!image_index.emplace(info.id, ds.images.size()).second) {
      throw Error(Errc::kSchema, "duplicate image id " + std::to_string(info.id));
    }
    ds.images.push_back(std::move(info));
  }

  std::set<std::int64_t> category_ids;
  if (root.contains("categories")) {
    for (const auto& cat : root["categories"]) {
      Category c;
      c.id = detail::require_id(cat, "id", "categories[]");
      c.name = cat.value("name", std::string{});
      if (!category_ids.insert(c.id).second) {
        throw Error(Errc::kSchema, "duplicate category id " + std::to_string(c.id));
      }
      ds.categories.push_back(std::move(c));
    }
  }

  std::set<std::int64_t> ann_ids;
  for (const auto& ann : detail::require(root, "annotations", "root")) {
    Annotation a;
    a.id = detail::require_id(ann, "id", "annotations[]");
    const std::string where = "annotation " + std::to_string(a.id);
    a.image_id = detail::require_id(ann, "image_id", where);
    a.category_id = detail::require_id(ann, "category_id", where);
    if (!ann_ids.insert(a.id).second) {
      throw Error(Errc::kSchema, "duplicate annotation id " + std::to_string(a.id));
    }
    const auto img_it = image_index.find(a.image_id);
    if (img_it == image_index.end()) {
      throw Error(Errc::kSchema, where + ": unknown image_id " + std::to_string(a.image_id));
    }
    if (!category_ids.contains(a.category_id)) {
      throw Error(Errc::kSchema,
                  where + ": unknown category_id " + std::to_string(a.category_id));
    }
    const ImageInfo& img = ds.images[img_it->second];
    const auto crowd = ann.find("iscrowd");
    a.iscrowd = crowd != ann.end() && ((crowd->is_boolean() && crowd->get<bool>()) ||
                                       (crowd->is_number() && crowd->get<double>() != 0.0));
    const json& seg = detail::require(ann, "segmentation", where);
    if (seg.is_array()) {
      std::vector<std::vector<double>> polys;
      for (const auto& poly : seg) {
        if (!poly.is_array()) throw Error(Errc::kMask, where + ": polygon must be an array");
        std::vector<double> coords;
        for (const auto& v : poly) {
          if (!v.is_number()) throw Error(Errc::kMask, where + ": non-numeric polygon coordinate");
          coords.push_back(v.get<double>());
        }
        polys.push_back(std::move(coords));
      }
      try {
        a.mask = rle_encode(rasterize_polygons(polys, img.height, img.width));
      } catch (const Error& e) {
        throw Error(Errc::kMask, where + ": " + e.what());
      }
    } else if (seg.is_object()) {
      a.mask = detail::rle_from_json(seg, img.height, img.width, where);
    } else {
      throw Error(Errc::kMask, where + ": unsupported segmentation encoding");
    }
    a.bbox = rle_bbox(a.mask);
    a.area = rle_area(a.mask);
    ds.annotations.push_back(std::move(a));
  }
  return ds;
}

inline Dataset load_coco(const std::filesystem::path& path) {
  return parse_coco(detail::read_file(path));
}

namespace detail {

// True for any JSON integer >= 0, whether stored signed or unsigned.
inline bool is_count(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

inline nlohmann::ordered_json rle_json(const RleMask& rle) {
  nlohmann::ordered_json seg;
  seg["size"] = {rle.height, rle.width};
  seg["counts"] = rle_to_string(rle);
  return seg;
}

inline nlohmann::ordered_json bbox_json(const BBox& b) { return {b.x, b.y, b.w, b.h}; }

}  // namespace detail

// Serializes a dataset with masks as compressed RLE.
inline std::string coco_to_string(const Dataset& ds) {
  nlohmann::ordered_json root;
  root["images"] = nlohmann::ordered_json::array();
  for (const auto& img : ds.images) {
    root["images"].push_back(
        {{"id", img.id}, {"file_name", img.file_name}, {"height", img.height}, {"width", img.width}});
  }
  root["annotations"] = nlohmann::ordered_json::array();
  for (const auto& a : ds.annotations) {
    root["annotations"].push_back({{"id", a.id},
                                   {"image_id", a.image_id},
                                   {"category_id", a.category_id},
                                   {"segmentation", detail::rle_json(a.mask)},
                                   {"area", a.area},
                                   {"bbox", detail::bbox_json(a.bbox)},
                                   {"iscrowd", a.iscrowd ? 1 : 0}});
  }
  root["categories"] = nlohmann::ordered_json::array();
  for (const auto& c : ds.categories) {
    root["categories"].push_back({{"id", c.id}, {"name", c.name}});
  }
  return root.dump();
}

inline void write_coco(const Dataset& ds, const std::filesystem::path& path) {
  detail::write_file(path, coco_to_string(ds));
}

// ---------------------------------------------------------------------------
// Detection results

inline std::string results_to_string(const std::vector<Detection>& dets) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& d : dets) {
    nlohmann::ordered_json o;
    o["image_id"] = d.image_id;
    o["category_id"] = d.category_id;
    o["segmentation"] = detail::rle_json(d.mask);
    o["bbox"] = detail::bbox_json(d.bbox);
    o["score"] = d.score;
    if (d.mask_iou_pred) o["mask_iou_pred"] = *d.mask_iou_pred;
    arr.push_back(std::move(o));
  }
  return arr.dump();
}

inline void write_results(const std::vector<Detection>& dets, const std::filesystem::path& path) {
  detail::write_file(path, results_to_string(dets));
}

inline std::vector<Detection> parse_results(std::string_view text) {
  using detail::json;
  const json root = detail::parse_json(text, "results file");
  if (!root.is_array()) throw Error(Errc::kSchema, "results must be a JSON array");
  std::vector<Detection> dets;
  dets.reserve(root.size());
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& o = root[i];
    const std::string where = "results[" + std::to_string(i) + "]";
    Detection d;
    d.image_id = detail::require_id(o, "image_id", where);
    d.category_id = detail::require_id(o, "category_id", where);
    d.mask = detail::rle_from_json(detail::require(o, "segmentation", where), 0, 0, where);
    d.score = detail::require_as<double>(o, "score", where);
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      throw Error(Errc::kSchema, where + ": score outside [0, 1]");
    }
    if (o.contains("bbox")) {
      const auto b = detail::require_as<std::vector<double>>(o, "bbox", where);
      if (b.size() != 4) throw Error(Errc::kSchema, where + ": bbox must have 4 values");
      d.bbox = BBox{b[0], b[1], b[2], b[3]};
    } else {
      d.bbox = rle_bbox(d.mask);
    }
    if (o.contains("mask_iou_pred") && !o["mask_iou_pred"].is_null()) {
      const double p = detail::require_as<double>(o, "mask_iou_pred", where);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(Errc::kSchema, where + ": mask_iou_pred outside [0, 1]");
      }
      d.mask_iou_pred = p;
    }
    dets.push_back(std::move(d));
  }
  return dets;
}

inline std::vector<Detection> load_results(const std::filesystem::path& path) {
  return parse_results(detail::read_file(path));
}

}  // namespace segkit
