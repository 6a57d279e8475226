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
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "segkit/error.hpp"
#include "segkit/sampling.hpp"

namespace segkit {

struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

// Integer pixel rectangle used by crops.
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Row-major binary mask, one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width)
      : height_(height), width_(width),
        bits_(checked_size(height, width), std::uint8_t{0}) {}
  BinaryMask(int height, int width, std::vector<std::uint8_t> bits)
      : height_(height), width_(width), bits_(std::move(bits)) {
    if (bits_.size() != checked_size(height, width)) {
      throw Error(Errc::kShapeMismatch, "bit array length does not match " +
                                            std::to_string(height) + "x" +
                                            std::to_string(width));
    }
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  bool at(int y, int x) const {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int y, int x, bool v = true) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::span<std::uint8_t> bits() { return bits_; }

  std::int64_t count() const {
    return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  static std::size_t checked_size(int height, int width) {
    if (height < 1 || width < 1) {
      throw Error(Errc::kShapeMismatch, "mask extent must be at least 1x1");
    }
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> bits_;
};

// COCO run-length mask: column-major runs, the first run counts zeros.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

// ---------------------------------------------------------------------------
// RLE codec

inline RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle{mask.height(), mask.width(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  const auto bits = mask.bits();
  const int w = mask.width();
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const std::uint8_t b = bits[static_cast<std::size_t>(y) * w + x];
      if (b != current) {
        rle.counts.push_back(run);
        run = 0;
        current = b;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

inline std::uint64_t rle_total(const RleMask& rle) {
  return std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
}

inline BinaryMask rle_decode(const RleMask& rle) {
  if (rle.height < 1 || rle.width < 1) {
    throw Error(Errc::kMalformedRle, "extent must be at least 1x1");
  }
  const std::uint64_t expected =
      static_cast<std::uint64_t>(rle.height) * static_cast<std::uint64_t>(rle.width);
  if (rle_total(rle) != expected) {
    throw Error(Errc::kMalformedRle,
                "run lengths sum to " + std::to_string(rle_total(rle)) +
                    ", expected " + std::to_string(expected));
  }
  BinaryMask mask(rle.height, rle.width);
  auto bits = mask.bits();
  const auto h = static_cast<std::uint64_t>(rle.height);
  const auto w = static_cast<std::uint64_t>(rle.width);
  std::uint64_t pos = 0;
  bool value = false;
  for (std::uint32_t run : rle.counts) {
    if (value) {
      for (std::uint64_t p = pos; p < pos + run; ++p) {
        bits[(p % h) * w + p / h] = 1;
      }
    }
    pos += run;
    value = !value;
  }
  return mask;
}

inline std::int64_t rle_area(const RleMask& rle) {
  std::int64_t area = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) area += rle.counts[i];
  return area;
}

// Intersection area of two same-extent RLE masks, walking both run lists.
inline std::int64_t rle_intersection(const RleMask& a, const RleMask& b) {
  if (a.height != b.height || a.width != b.width) {
    throw Error(Errc::kShapeMismatch, "RLE extents differ");
  }
  std::size_t ia = 0;
  std::size_t ib = 0;
  if (a.counts.empty() || b.counts.empty()) return 0;
  std::uint64_t ra = a.counts[0];
  std::uint64_t rb = b.counts[0];
  bool va = false;
  bool vb = false;
  std::int64_t inter = 0;
  while (ia < a.counts.size() && ib < b.counts.size()) {
    const std::uint64_t step = std::min(ra, rb);
    if (va && vb) inter += static_cast<std::int64_t>(step);
    ra -= step;
    rb -= step;
    if (ra == 0) {
      va = !va;
      if (++ia < a.counts.size()) ra = a.counts[ia];
    }
    if (rb == 0) {
      vb = !vb;
      if (++ib < b.counts.size()) rb = b.counts[ib];
    }
  }
  return inter;
}

inline double rle_iou(const RleMask& a, const RleMask& b) {
  const std::int64_t inter = rle_intersection(a, b);
  const std::int64_t uni = rle_area(a) + rle_area(b) - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// Tight box of the foreground, computed from the runs. Empty masks give a
// zero box at the origin.
inline BBox rle_bbox(const RleMask& rle) {
  const auto h = static_cast<std::uint64_t>(rle.height);
  std::uint64_t x0 = UINT64_MAX, y0 = UINT64_MAX, x1 = 0, y1 = 0;
  bool any = false;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < rle.counts.size(); ++i) {
    const std::uint64_t run = rle.counts[i];
    if (i % 2 == 1 && run > 0) {
      any = true;
      const std::uint64_t first = pos;
      const std::uint64_t last = pos + run - 1;
      const std::uint64_t cx0 = first / h;
      const std::uint64_t cx1 = last / h;
      x0 = std::min(x0, cx0);
      x1 = std::max(x1, cx1);
      if (cx0 == cx1) {
        y0 = std::min(y0, first % h);
        y1 = std::max(y1, last % h);
      } else {
        // Run wraps over a column boundary, so it touches the first and last row.
        y0 = 0;
        y1 = h - 1;
      }
    }
    pos += run;
  }
  if (!any) return {};
  return BBox{static_cast<double>(x0), static_cast<double>(y0),
              static_cast<double>(x1 - x0 + 1), static_cast<double>(y1 - y0 + 1)};
}

// ---------------------------------------------------------------------------
// Overlap measures

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(Errc::kShapeMismatch, "mask_iou operands differ in extent");
  }
  std::int64_t inter = 0;
  std::int64_t uni = 0;
  const auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += ab[i] & bb[i];
    uni += ab[i] | bb[i];
  }
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline double box_intersection(const BBox& a, const BBox& b) {
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

inline double box_iou(const BBox& a, const BBox& b) {
  const double inter = box_intersection(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline BBox tight_bbox(const BinaryMask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(y, x)) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return {};
  return BBox{static_cast<double>(x0), static_cast<double>(y0),
              static_cast<double>(x1 - x0 + 1), static_cast<double>(y1 - y0 + 1)};
}

// ---------------------------------------------------------------------------
// Geometric transforms on masks

inline BinaryMask hflip(const BinaryMask& mask) {
  BinaryMask out(mask.height(), mask.width());
  const int w = mask.width();
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < w; ++x) out.set(y, w - 1 - x, mask.at(y, x));
  }
  return out;
}

// Bilinear resample to height x width evaluated only over `region` of the
// resized grid; the result has the region's extent. Samples >= 0.5 are set.
inline BinaryMask resize_region(const BinaryMask& mask, int height, int width,
                                const PixelRect& region) {
  if (height < 1 || width < 1) {
    throw Error(Errc::kInvalidTarget, "resize target must be at least 1x1");
  }
  if (region.w < 1 || region.h < 1 || region.x < 0 || region.y < 0 ||
      region.x + region.w > width || region.y + region.h > height) {
    throw Error(Errc::kInvalidRect, "resize region outside target extent");
  }
  const auto ty = detail::axis_taps(mask.height(), height, region.y, region.h);
  const auto tx = detail::axis_taps(mask.width(), width, region.x, region.w);
  BinaryMask out(region.h, region.w);
  for (int y = 0; y < region.h; ++y) {
    const auto& sy = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < region.w; ++x) {
      const auto& sx = tx[static_cast<std::size_t>(x)];
      const double v = detail::lerp2(mask.at(sy.lo, sx.lo), mask.at(sy.lo, sx.hi),
                                     mask.at(sy.hi, sx.lo), mask.at(sy.hi, sx.hi),
                                     sy, sx);
      if (v >= 0.5) out.set(y, x);
    }
  }
  return out;
}

inline BinaryMask resize(const BinaryMask& mask, int height, int width) {
  if (height == mask.height() && width == mask.width()) return mask;
  return resize_region(mask, height, width, PixelRect{0, 0, width, height});
}

inline BinaryMask crop(const BinaryMask& mask, const PixelRect& rect) {
  if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0 ||
      rect.x + rect.w > mask.width() || rect.y + rect.h > mask.height()) {
    throw Error(Errc::kInvalidRect, "crop rectangle outside mask extent");
  }
  BinaryMask out(rect.h, rect.w);
  for (int y = 0; y < rect.h; ++y) {
    for (int x = 0; x < rect.w; ++x) out.set(y, x, mask.at(rect.y + y, rect.x + x));
  }
  return out;
}

// Appends zero rows/columns on the bottom/right.
inline BinaryMask pad(const BinaryMask& mask, int height, int width) {
  if (height < mask.height() || width < mask.width()) {
    throw Error(Errc::kInvalidTarget, "pad target smaller than mask");
  }
  BinaryMask out(height, width);
  const auto row = static_cast<std::size_t>(mask.width());
  for (int y = 0; y < mask.height(); ++y) {
    std::copy_n(mask.bits().begin() + static_cast<std::ptrdiff_t>(y * row), row,
                out.bits().begin() + static_cast<std::ptrdiff_t>(y * static_cast<std::size_t>(width)));
  }
  return out;
}

namespace mask_op {
struct HFlip {};
struct Resize { int height; int width; };
struct Crop { PixelRect rect; };
struct Pad { int height; int width; };
}  // namespace mask_op

using MaskOp = std::variant<mask_op::HFlip, mask_op::Resize, mask_op::Crop, mask_op::Pad>;

inline BinaryMask transform_mask(const BinaryMask& mask, const MaskOp& op) {
  return std::visit(
      [&](const auto& o) -> BinaryMask {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, mask_op::HFlip>) {
          return hflip(mask);
        } else if constexpr (std::is_same_v<T, mask_op::Resize>) {
          return resize(mask, o.height, o.width);
        } else if constexpr (std::is_same_v<T, mask_op::Crop>) {
          return crop(mask, o.rect);
        } else {
          return pad(mask, o.height, o.width);
        }
      },
      op);
}

// ---------------------------------------------------------------------------
// Set algebra and morphology

inline void subtract_in_place(BinaryMask& mask, const BinaryMask& other) {
  if (mask.height() != other.height() || mask.width() != other.width()) {
    throw Error(Errc::kShapeMismatch, "mask subtraction operands differ in extent");
  }
  auto dst = mask.bits();
  const auto src = other.bits();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] &= static_cast<std::uint8_t>(~src[i] & 1);
}

inline void union_in_place(BinaryMask& mask, const BinaryMask& other) {
  if (mask.height() != other.height() || mask.width() != other.width()) {
    throw Error(Errc::kShapeMismatch, "mask union operands differ in extent");
  }
  auto dst = mask.bits();
  const auto src = other.bits();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] |= src[i];
}

namespace detail {

// Sliding max (dilate) or min (erode) with a (2r+1) window along one axis.
inline BinaryMask morph_axis(const BinaryMask& mask, int radius, bool dilate,
                             bool along_x) {
  BinaryMask out(mask.height(), mask.width());
  const int outer = along_x ? mask.height() : mask.width();
  const int inner = along_x ? mask.width() : mask.height();
  for (int o = 0; o < outer; ++o) {
    for (int i = 0; i < inner; ++i) {
      bool v = !dilate;
      const int lo = std::max(0, i - radius);
      const int hi = std::min(inner - 1, i + radius);
      // Pixels outside the extent count as background, so erosion clears
      // anything within `radius` of the border.
      if (!dilate && (i - radius < 0 || i + radius > inner - 1)) v = false;
      for (int k = lo; k <= hi; ++k) {
        const bool b = along_x ? mask.at(o, k) : mask.at(k, o);
        if (dilate && b) { v = true; break; }
        if (!dilate && !b) { v = false; break; }
      }
      if (along_x) out.set(o, i, v); else out.set(i, o, v);
    }
  }
  return out;
}

}  // namespace detail

// Square structuring element of side 2r+1; r > 0 dilates, r < 0 erodes.
inline BinaryMask morph(const BinaryMask& mask, int radius) {
  if (radius == 0) return mask;
  const bool dilate = radius > 0;
  const int r = dilate ? radius : -radius;
  return detail::morph_axis(detail::morph_axis(mask, r, dilate, true), r, dilate, false);
}

// ---------------------------------------------------------------------------
// Box transforms

namespace box_op {
struct HFlip { double image_width; };
struct Scale { double factor; };
struct Clip { double height; double width; };
struct Translate { double dx; double dy; };
}  // namespace box_op

using BoxOp = std::variant<box_op::HFlip, box_op::Scale, box_op::Clip, box_op::Translate>;

inline BBox transform_box(const BBox& box, const BoxOp& op) {
  return std::visit(
      [&](const auto& o) -> BBox {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, box_op::HFlip>) {
          return BBox{o.image_width - box.x - box.w, box.y, box.w, box.h};
        } else if constexpr (std::is_same_v<T, box_op::Scale>) {
          return BBox{box.x * o.factor, box.y * o.factor, box.w * o.factor,
                      box.h * o.factor};
        } else if constexpr (std::is_same_v<T, box_op::Clip>) {
          const double x0 = std::clamp(box.x, 0.0, o.width);
          const double y0 = std::clamp(box.y, 0.0, o.height);
          const double x1 = std::clamp(box.x + box.w, 0.0, o.width);
          const double y1 = std::clamp(box.y + box.h, 0.0, o.height);
          return BBox{x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
        } else {
          return BBox{box.x + o.dx, box.y + o.dy, box.w, box.h};
        }
      },
      op);
}

}  // namespace segkit
