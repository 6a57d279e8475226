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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "segkit/coco.hpp"
#include "segkit/image.hpp"
#include "segkit/mask.hpp"
#include "segkit/random.hpp"

// Synthetic "court with players" datasets for tests and demos.

namespace segkit {

struct SyntheticSpec {
  int num_images = 20;
  int height = 256;
  int width = 256;
  int max_instances = 6;
  int num_categories = 1;
  // Rejection bound on pairwise box IoU between instances of one image.
  double max_box_iou = 0.3;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<ImageBuffer> images;  // parallel to dataset.images
};

inline BinaryMask ellipse_mask(int height, int width, double cx, double cy, double rx, double ry) {
  BinaryMask m(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = (x + 0.5 - cx) / rx;
      const double dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) m.set(y, x);
    }
  }
  return m;
}

// Upright ellipses (roughly person-shaped), later ones occluding earlier
// ones, so masks within an image are pairwise disjoint.
inline SyntheticData make_synthetic(const SyntheticSpec& spec) {
  SyntheticData out;
  RandomStream root(spec.seed);
  for (int c = 1; c <= spec.num_categories; ++c) {
    out.dataset.categories.push_back(Category{c, c == 1 ? "human" : "class" + std::to_string(c)});
  }
  std::int64_t next_ann = 1;
  for (int i = 0; i < spec.num_images; ++i) {
    const std::int64_t image_id = i + 1;
    RandomStream rng = root.child(static_cast<std::uint64_t>(image_id));
    out.dataset.images.push_back(
        ImageInfo{image_id, "img_" + std::to_string(image_id) + ".png", spec.height, spec.width});

    ImageBuffer img(spec.height, spec.width);
    const Rgb court{static_cast<std::uint8_t>(rng.uniform_int(150, 200)),
                    static_cast<std::uint8_t>(rng.uniform_int(110, 150)),
                    static_cast<std::uint8_t>(rng.uniform_int(70, 100))};
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const int n = static_cast<int>(rng.uniform_int(-6, 6));
        img.set(y, x, Rgb{quantize(court.r + n), quantize(court.g + n), quantize(court.b + n)});
      }
    }

    const int count = static_cast<int>(rng.uniform_int(1, spec.max_instances));
    std::vector<BBox> boxes;
    std::vector<BinaryMask> masks;
    std::vector<std::int64_t> cats;
    const double short_side = std::min(spec.height, spec.width);
    for (int attempt = 0; attempt < 50 * count && static_cast<int>(masks.size()) < count; ++attempt) {
      const double rx = rng.uniform(0.04, 0.09) * short_side;
      const double ry = rx * rng.uniform(1.6, 2.6);
      const double cx = rng.uniform(rx, spec.width - rx);
      const double cy = rng.uniform(ry, spec.height - ry);
      const std::int64_t cat = rng.uniform_int(1, spec.num_categories);
      const BBox box{cx - rx, cy - ry, 2 * rx, 2 * ry};
      bool ok = true;
      for (const auto& b : boxes) ok = ok && box_iou(b, box) <= spec.max_box_iou;
      if (!ok) continue;
      boxes.push_back(box);
      masks.push_back(ellipse_mask(spec.height, spec.width, cx, cy, rx, ry));
      cats.push_back(cat);
    }
    for (std::size_t k = 0; k < masks.size(); ++k) {
      for (std::size_t later = k + 1; later < masks.size(); ++later) {
        subtract_in_place(masks[k], masks[later]);
      }
    }
    for (std::size_t k = 0; k < masks.size(); ++k) {
      if (masks[k].count() < 16) continue;
      const Rgb color{static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                      static_cast<std::uint8_t>(rng.uniform_int(0, 255)),
                      static_cast<std::uint8_t>(rng.uniform_int(0, 255))};
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          if (masks[k].at(y, x)) img.set(y, x, color);
        }
      }
      out.dataset.annotations.push_back(
          make_annotation(next_ann++, image_id, cats[k], masks[k]));
    }
    out.images.push_back(std::move(img));
  }
  return out;
}

// Ground truth rewritten as perfect detections with score 1.
inline std::vector<Detection> ground_truth_as_detections(const Dataset& ds) {
  std::vector<Detection> dets;
  for (const auto& a : ds.annotations) {
    if (a.iscrowd) continue;
    dets.push_back(Detection{a.image_id, a.category_id, a.bbox, a.mask, 1.0, std::nullopt});
  }
  return dets;
}

}  // namespace segkit
