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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "segkit/coco.hpp"
#include "segkit/error.hpp"
#include "segkit/image.hpp"
#include "segkit/mask.hpp"
#include "segkit/random.hpp"

namespace segkit {

// An annotation carried in bitmap form while it is being augmented.
struct Instance {
  std::int64_t id = 0;
  std::int64_t category_id = 0;
  BinaryMask mask;
  bool iscrowd = false;

  std::int64_t area() const { return mask.count(); }
  BBox bbox() const { return tight_bbox(mask); }
  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Sample {
  ImageBuffer image;
  std::vector<Instance> instances;
  friend bool operator==(const Sample&, const Sample&) = default;
};

inline Sample make_sample(ImageBuffer image, const Dataset& ds, std::int64_t image_id) {
  Sample s{std::move(image), {}};
  for (const Annotation* a : ds.annotations_for(image_id)) {
    BinaryMask m = rle_decode(a->mask);
    if (m.height() != s.image.height() || m.width() != s.image.width()) {
      throw Error(Errc::kShapeMismatch, "annotation " + std::to_string(a->id) +
                                            " does not match image extent");
    }
    s.instances.push_back(Instance{a->id, a->category_id, std::move(m), a->iscrowd});
  }
  return s;
}

inline std::vector<Annotation> to_annotations(const Sample& s, std::int64_t image_id) {
  std::vector<Annotation> out;
  out.reserve(s.instances.size());
  for (const auto& inst : s.instances) {
    out.push_back(make_annotation(inst.id, image_id, inst.category_id, inst.mask, inst.iscrowd));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Range&, const Range&) = default;
};

struct Extent2 {
  int width = 0;
  int height = 0;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

struct AugmentConfig {
  double brightness_delta_max = 32.0;
  Range contrast_range{0.5, 1.5};
  Range saturation_range{0.5, 1.5};
  double hue_delta_max = 18.0;
  Range scale_short_range{820.0, 3080.0};
  double long_side_cap = 3680.0;
  Extent2 crop_pad_target{1920, 1440};
  double hflip_prob = 0.5;
  int copy_paste_max_instances = 4;
  double visibility_threshold = 0.25;
  Rgb pad_fill = kDefaultPadFill;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;

  void validate() const {
    auto fail = [](const std::string& path, const std::string& msg) {
      throw Error(Errc::kConfig, path + ": " + msg);
    };
    if (!(brightness_delta_max >= 0.0)) fail("/brightness_delta_max", "must be >= 0");
    if (!(contrast_range.lo <= contrast_range.hi) || contrast_range.lo < 0.0) {
      fail("/contrast_range", "must be an ordered non-negative range");
    }
    if (!(saturation_range.lo <= saturation_range.hi) || saturation_range.lo < 0.0) {
      fail("/saturation_range", "must be an ordered non-negative range");
    }
    if (!(hue_delta_max >= 0.0)) fail("/hue_delta_max", "must be >= 0");
    if (!(scale_short_range.lo <= scale_short_range.hi) || !(scale_short_range.lo >= 1.0)) {
      fail("/scale_short_range", "must be an ordered range of positive lengths");
    }
    if (!(long_side_cap >= 1.0)) fail("/long_side_cap", "must be >= 1");
    if (crop_pad_target.width < 1 || crop_pad_target.height < 1) {
      fail("/crop_pad_target", "must be a positive (width, height)");
    }
    if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) fail("/hflip_prob", "must lie in [0, 1]");
    if (copy_paste_max_instances < 0) fail("/copy_paste_max_instances", "must be >= 0");
    if (!(visibility_threshold >= 0.0 && visibility_threshold <= 1.0)) {
      fail("/visibility_threshold", "must lie in [0, 1]");
    }
  }
};

inline nlohmann::ordered_json to_json(const AugmentConfig& c) {
  return {{"brightness_delta_max", c.brightness_delta_max},
          {"contrast_range", {c.contrast_range.lo, c.contrast_range.hi}},
          {"saturation_range", {c.saturation_range.lo, c.saturation_range.hi}},
          {"hue_delta_max", c.hue_delta_max},
          {"scale_short_range", {c.scale_short_range.lo, c.scale_short_range.hi}},
          {"long_side_cap", c.long_side_cap},
          {"crop_pad_target", {c.crop_pad_target.width, c.crop_pad_target.height}},
          {"hflip_prob", c.hflip_prob},
          {"copy_paste_max_instances", c.copy_paste_max_instances},
          {"visibility_threshold", c.visibility_threshold},
          {"pad_fill", {c.pad_fill.r, c.pad_fill.g, c.pad_fill.b}}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline AugmentConfig augment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::kConfig, "/: augment config must be an object");
  AugmentConfig c;
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw Error(Errc::kConfig, std::string("/") + key + ": expected a number");
    out = j[key].get<double>();
  };
  auto pair = [&](const char* key, double& a, double& b) {
    if (!j.contains(key)) return;
    const auto& v = j[key];
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw Error(Errc::kConfig, std::string("/") + key + ": expected [lo, hi]");
    }
    a = v[0].get<double>();
    b = v[1].get<double>();
  };
  static const char* const kKeys[] = {
      "brightness_delta_max", "contrast_range", "saturation_range", "hue_delta_max",
      "scale_short_range", "long_side_cap", "crop_pad_target", "hflip_prob",
      "copy_paste_max_instances", "visibility_threshold", "pad_fill"};
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKeys)) {
      throw Error(Errc::kConfig, "/" + key + ": unknown key");
    }
  }
  number("brightness_delta_max", c.brightness_delta_max);
  pair("contrast_range", c.contrast_range.lo, c.contrast_range.hi);
  pair("saturation_range", c.saturation_range.lo, c.saturation_range.hi);
  number("hue_delta_max", c.hue_delta_max);
  pair("scale_short_range", c.scale_short_range.lo, c.scale_short_range.hi);
  number("long_side_cap", c.long_side_cap);
  if (j.contains("crop_pad_target")) {
    double w = 0, h = 0;
    pair("crop_pad_target", w, h);
    c.crop_pad_target = Extent2{static_cast<int>(w), static_cast<int>(h)};
  }
  number("hflip_prob", c.hflip_prob);
  if (j.contains("copy_paste_max_instances")) {
    if (!j["copy_paste_max_instances"].is_number_integer()) {
      throw Error(Errc::kConfig, "/copy_paste_max_instances: expected an integer");
    }
    c.copy_paste_max_instances = j["copy_paste_max_instances"].get<int>();
  }
  number("visibility_threshold", c.visibility_threshold);
  if (j.contains("pad_fill")) {
    const auto& v = j["pad_fill"];
    if (!v.is_array() || v.size() != 3) throw Error(Errc::kConfig, "/pad_fill: expected [r, g, b]");
    for (const auto& ch : v) {
      if (!ch.is_number_integer() || ch.get<int>() < 0 || ch.get<int>() > 255) {
        throw Error(Errc::kConfig, "/pad_fill: channels must be integers in [0, 255]");
      }
    }
    c.pad_fill = Rgb{v[0].get<std::uint8_t>(), v[1].get<std::uint8_t>(), v[2].get<std::uint8_t>()};
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Photometric distortion

// Brightness, contrast, saturation, hue in that order. Every step draws its
// skip flag and its parameter whether or not it fires, so the number of
// draws per call is fixed.
inline Sample photometric_distortion(const Sample& s, const AugmentConfig& cfg,
                                     RandomStream& rng) {
  Sample out = s;
  const bool do_brightness = rng.bernoulli(0.5);
  const double delta = rng.uniform(-cfg.brightness_delta_max, cfg.brightness_delta_max);
  const bool do_contrast = rng.bernoulli(0.5);
  const double contrast = rng.uniform(cfg.contrast_range.lo, cfg.contrast_range.hi);
  const bool do_saturation = rng.bernoulli(0.5);
  const double saturation = rng.uniform(cfg.saturation_range.lo, cfg.saturation_range.hi);
  const bool do_hue = rng.bernoulli(0.5);
  const double hue = rng.uniform(-cfg.hue_delta_max, cfg.hue_delta_max);

  if (do_brightness) out.image = photometric_adjust(out.image, photo_op::Brightness{delta});
  if (do_contrast) out.image = photometric_adjust(out.image, photo_op::Contrast{contrast});
  if (do_saturation) out.image = photometric_adjust(out.image, photo_op::Saturation{saturation});
  if (do_hue) out.image = photometric_adjust(out.image, photo_op::Hue{hue});
  return out;
}

// ---------------------------------------------------------------------------
// Copy-paste

struct CopyPasteResult {
  Sample sample;
  // Indices into the source's instances, in paste order (last on top).
  std::vector<std::size_t> pasted;
};

// Pastes a random subset of source instances onto the target. The source is
// first resampled to the target's extent. Pasted pixels replace the target
// pixel outright; every mask is reduced by the pastes lying above it, and
// instances left with less than visibility_threshold of their original area
// are dropped.
inline CopyPasteResult copy_paste_detailed(const Sample& target, const Sample& source,
                                           const AugmentConfig& cfg, RandomStream& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < source.instances.size(); ++i) {
    if (!source.instances[i].iscrowd) eligible.push_back(i);
  }
  if (eligible.empty()) throw Error(Errc::kEmptySource, "source has no non-crowd instances");

  const int h = target.image.height();
  const int w = target.image.width();
  const ImageBuffer src_image = resize(source.image, h, w);
  std::vector<BinaryMask> src_masks(source.instances.size());
  std::vector<std::size_t> pasteable;
  for (std::size_t i : eligible) {
    src_masks[i] = resize(source.instances[i].mask, h, w);
    if (src_masks[i].count() > 0) pasteable.push_back(i);
  }

  const std::int64_t drawn =
      cfg.copy_paste_max_instances >= 1 ? rng.uniform_int(1, cfg.copy_paste_max_instances) : 0;
  const std::size_t count = std::min(static_cast<std::size_t>(drawn), pasteable.size());
  // Partial Fisher-Yates: the first `count` entries become the paste order.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(pasteable.size()) - 1));
    std::swap(pasteable[i], pasteable[j]);
  }
  pasteable.resize(count);

  CopyPasteResult result;
  result.pasted = pasteable;
  if (count == 0) {
    result.sample = target;
    return result;
  }

  // above[k] = union of pastes k+1..count-1; region = union of all pastes.
  std::vector<BinaryMask> above(count, BinaryMask(h, w));
  for (std::size_t k = count - 1; k > 0; --k) {
    above[k - 1] = above[k];
    union_in_place(above[k - 1], src_masks[pasteable[k]]);
  }
  BinaryMask region = above[0];
  union_in_place(region, src_masks[pasteable[0]]);

  Sample& out = result.sample;
  out.image = target.image;
  {
    auto dst = out.image.pixels();
    const auto src = src_image.pixels();
    const auto bits = region.bits();
    for (std::size_t p = 0; p < bits.size(); ++p) {
      if (bits[p]) {
        dst[3 * p] = src[3 * p];
        dst[3 * p + 1] = src[3 * p + 1];
        dst[3 * p + 2] = src[3 * p + 2];
      }
    }
  }

  auto keep = [&](std::int64_t visible, std::int64_t original) {
    return !(static_cast<double>(visible) <
             cfg.visibility_threshold * static_cast<double>(original));
  };

  std::int64_t next_id = 0;
  for (const auto& inst : target.instances) {
    next_id = std::max(next_id, inst.id);
    Instance clipped = inst;
    subtract_in_place(clipped.mask, region);
    if (keep(clipped.area(), inst.area())) out.instances.push_back(std::move(clipped));
  }
  for (std::size_t k = 0; k < count; ++k) {
    const auto& src_inst = source.instances[pasteable[k]];
    Instance pasted{++next_id, src_inst.category_id, src_masks[pasteable[k]], false};
    const std::int64_t original = pasted.area();
    subtract_in_place(pasted.mask, above[k]);
    if (keep(pasted.area(), original)) out.instances.push_back(std::move(pasted));
  }
  return result;
}

inline Sample copy_paste(const Sample& target, const Sample& source, const AugmentConfig& cfg,
                         RandomStream& rng) {
  return copy_paste_detailed(target, source, cfg, rng).sample;
}

// ---------------------------------------------------------------------------
// Geometric pipeline: scale the short side, cap the long side, crop, pad,
// flip.

struct GeometricDraw {
  double target_short = 0.0;
  double crop_u_x = 0.0;  // in [0, 1): position of the crop window
  double crop_u_y = 0.0;
  bool flip = false;
};

struct GeometricResult {
  Sample sample;
  int resized_height = 0;  // extent before crop and pad
  int resized_width = 0;
  PixelRect crop;
  bool flipped = false;
};

inline GeometricResult apply_geometric(const Sample& s, const AugmentConfig& cfg,
                                       const GeometricDraw& draw) {
  const int h = s.image.height();
  const int w = s.image.width();
  const double short_side = std::min(h, w);
  const double long_side = std::max(h, w);
  double scale = draw.target_short / short_side;
  if (long_side * scale > cfg.long_side_cap) scale = cfg.long_side_cap / long_side;
  const int rh = std::max(1, round_half_up(h * scale));
  const int rw = std::max(1, round_half_up(w * scale));

  const int out_w = cfg.crop_pad_target.width;
  const int out_h = cfg.crop_pad_target.height;
  PixelRect rect{0, 0, std::min(rw, out_w), std::min(rh, out_h)};
  rect.x = std::min(rw - rect.w, static_cast<int>(draw.crop_u_x * (rw - rect.w + 1)));
  rect.y = std::min(rh - rect.h, static_cast<int>(draw.crop_u_y * (rh - rect.h + 1)));

  GeometricResult r;
  r.resized_height = rh;
  r.resized_width = rw;
  r.crop = rect;
  r.flipped = draw.flip;

  ImageBuffer img = pad(resize_region(s.image, rh, rw, rect), out_h, out_w, cfg.pad_fill);
  if (draw.flip) img = hflip(img);
  r.sample.image = std::move(img);
  for (const auto& inst : s.instances) {
    BinaryMask m = pad(resize_region(inst.mask, rh, rw, rect), out_h, out_w);
    if (draw.flip) m = hflip(m);
    if (m.count() == 0) continue;
    r.sample.instances.push_back(Instance{inst.id, inst.category_id, std::move(m), inst.iscrowd});
  }
  return r;
}

inline GeometricDraw draw_geometric(const AugmentConfig& cfg, RandomStream& rng) {
  GeometricDraw d;
  d.target_short = rng.uniform(cfg.scale_short_range.lo, cfg.scale_short_range.hi);
  d.crop_u_x = rng.uniform();
  d.crop_u_y = rng.uniform();
  d.flip = rng.bernoulli(cfg.hflip_prob);
  return d;
}

inline GeometricResult geometric_pipeline_detailed(const Sample& s, const AugmentConfig& cfg,
                                                   RandomStream& rng) {
  return apply_geometric(s, cfg, draw_geometric(cfg, rng));
}

inline Sample geometric_pipeline(const Sample& s, const AugmentConfig& cfg, RandomStream& rng) {
  return geometric_pipeline_detailed(s, cfg, rng).sample;
}

// ---------------------------------------------------------------------------
// Full chain: photometric -> copy-paste -> geometric. Each stage uses its own
// child of `image_stream`, so adding or removing a stage does not shift the
// draws of the others.

inline Sample augment_sample(const Sample& s, const Sample* paste_source,
                             const AugmentConfig& cfg, const RandomStream& image_stream) {
  RandomStream photo_rng = image_stream.child(1);
  RandomStream paste_rng = image_stream.child(2);
  RandomStream geo_rng = image_stream.child(3);
  Sample out = photometric_distortion(s, cfg, photo_rng);
  if (paste_source != nullptr) out = copy_paste(out, *paste_source, cfg, paste_rng);
  return geometric_pipeline(out, cfg, geo_rng);
}

}  // namespace segkit
