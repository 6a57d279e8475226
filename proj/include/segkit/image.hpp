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
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "segkit/error.hpp"
#include "segkit/mask.hpp"
#include "segkit/sampling.hpp"

namespace segkit {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// h in degrees [0, 360), s in [0, 1], v in [0, 255].
struct Hsv {
  double h = 0.0;
  double s = 0.0;
  double v = 0.0;
};

inline constexpr Rgb kDefaultPadFill{114, 114, 114};

// Row-major interleaved RGB, 8 bits per channel.
class ImageBuffer {
 public:
  ImageBuffer() = default;
  ImageBuffer(int height, int width, Rgb fill = {})
      : height_(height), width_(width), pixels_(checked_size(height, width)) {
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
    }
  }
  ImageBuffer(int height, int width, std::vector<std::uint8_t> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_size(height, width)) {
      throw Error(Errc::kShapeMismatch, "pixel buffer length does not match extent");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }

  Rgb at(int y, int x) const {
    const std::size_t i = index(y, x);
    return Rgb{pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int y, int x, Rgb px) {
    const std::size_t i = index(y, x);
    pixels_[i] = px.r;
    pixels_[i + 1] = px.g;
    pixels_[i + 2] = px.b;
  }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t index(int y, int x) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }
  static std::size_t checked_size(int height, int width) {
    if (height < 1 || width < 1) {
      throw Error(Errc::kShapeMismatch, "image extent must be at least 1x1");
    }
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) * 3;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> pixels_;
};

// Round half up, then clamp to the 8-bit range.
inline std::uint8_t quantize(double v) {
  const double r = v + 0.5;
  if (!(r >= 1.0)) return 0;
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);  // truncation is floor for r >= 1
}

// ---------------------------------------------------------------------------
// Color space

inline Hsv rgb_to_hsv(Rgb px) {
  const double r = px.r, g = px.g, b = px.b;
  const double hi = std::max({r, g, b});
  const double lo = std::min({r, g, b});
  const double delta = hi - lo;
  Hsv out{0.0, hi > 0.0 ? delta / hi : 0.0, hi};
  if (delta > 0.0) {
    double h;
    if (hi == r) {
      h = 60.0 * ((g - b) / delta);
    } else if (hi == g) {
      h = 60.0 * ((b - r) / delta + 2.0);
    } else {
      h = 60.0 * ((r - g) / delta + 4.0);
    }
    if (h < 0.0) h += 360.0;
    if (h >= 360.0) h -= 360.0;
    out.h = h;
  }
  return out;
}

// Unquantized inverse of rgb_to_hsv; channels in [0, 255].
inline std::array<double, 3> hsv_to_rgb(const Hsv& hsv) {
  const double c = hsv.v * hsv.s;
  const double hp = hsv.h / 60.0;
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  const double m = hsv.v - c;
  const int sector = static_cast<int>(std::floor(hp)) % 6;
  switch (sector) {
    case 0: return {c + m, x + m, m};
    case 1: return {x + m, c + m, m};
    case 2: return {m, c + m, x + m};
    case 3: return {m, x + m, c + m};
    case 4: return {x + m, m, c + m};
    default: return {c + m, m, x + m};
  }
}

// ---------------------------------------------------------------------------
// Photometric adjustments

namespace photo_op {
struct Brightness { double delta; };       // additive, 8-bit units
struct Contrast { double factor; };        // multiplicative per channel
struct Saturation { double factor; };      // multiplies S
struct Hue { double degrees; };            // added to H modulo 360
}  // namespace photo_op

using PhotometricOp = std::variant<photo_op::Brightness, photo_op::Contrast,
                                   photo_op::Saturation, photo_op::Hue>;

namespace detail {

template <typename Fn>
ImageBuffer map_pixels(const ImageBuffer& img, Fn&& fn) {
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.set(y, x, fn(img.at(y, x)));
  }
  return out;
}

template <typename Fn>
ImageBuffer map_channels(const ImageBuffer& img, Fn&& fn) {
  ImageBuffer out = img;
  for (auto& c : out.pixels()) c = quantize(fn(static_cast<double>(c)));
  return out;
}

inline Rgb from_hsv(const Hsv& hsv) {
  const auto rgb = hsv_to_rgb(hsv);
  return Rgb{quantize(rgb[0]), quantize(rgb[1]), quantize(rgb[2])};
}

}  // namespace detail

inline ImageBuffer photometric_adjust(const ImageBuffer& img, const PhotometricOp& op) {
  return std::visit(
      [&](const auto& o) -> ImageBuffer {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, photo_op::Brightness>) {
          return detail::map_channels(img, [&](double c) { return c + o.delta; });
        } else if constexpr (std::is_same_v<T, photo_op::Contrast>) {
          return detail::map_channels(img, [&](double c) { return c * o.factor; });
        } else if constexpr (std::is_same_v<T, photo_op::Saturation>) {
          return detail::map_pixels(img, [&](Rgb px) {
            Hsv hsv = rgb_to_hsv(px);
            hsv.s = std::clamp(hsv.s * o.factor, 0.0, 1.0);
            return detail::from_hsv(hsv);
          });
        } else {
          return detail::map_pixels(img, [&](Rgb px) {
            Hsv hsv = rgb_to_hsv(px);
            double h = std::fmod(hsv.h + o.degrees, 360.0);
            if (h < 0.0) h += 360.0;
            if (h >= 360.0) h -= 360.0;
            hsv.h = h;
            return detail::from_hsv(hsv);
          });
        }
      },
      op);
}

// ---------------------------------------------------------------------------
// Geometric resampling

inline ImageBuffer hflip(const ImageBuffer& img) {
  ImageBuffer out(img.height(), img.width());
  const int w = img.width();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) out.set(y, w - 1 - x, img.at(y, x));
  }
  return out;
}

// Half-pixel-center bilinear resize to height x width, evaluated over
// `region` of the resized grid only.
inline ImageBuffer resize_region(const ImageBuffer& img, int height, int width,
                                 const PixelRect& region) {
  if (height < 1 || width < 1) {
    throw Error(Errc::kInvalidTarget, "resize target must be at least 1x1");
  }
  if (region.w < 1 || region.h < 1 || region.x < 0 || region.y < 0 ||
      region.x + region.w > width || region.y + region.h > height) {
    throw Error(Errc::kInvalidRect, "resize region outside target extent");
  }
  const auto ty = detail::axis_taps(img.height(), height, region.y, region.h);
  const auto tx = detail::axis_taps(img.width(), width, region.x, region.w);
  ImageBuffer out(region.h, region.w);
  const auto src = img.pixels();
  auto dst = out.pixels();
  const auto stride = static_cast<std::size_t>(img.width()) * 3;
  const auto out_row = static_cast<std::size_t>(region.w) * 3;

  // Horizontal pass of one source row, cached since neighbouring output
  // rows usually share source rows.
  auto horizontal = [&](int sy, std::vector<double>& row) {
    const std::size_t base = static_cast<std::size_t>(sy) * stride;
    for (int x = 0; x < region.w; ++x) {
      const auto& sx = tx[static_cast<std::size_t>(x)];
      const std::size_t c0 = base + static_cast<std::size_t>(sx.lo) * 3;
      const std::size_t c1 = base + static_cast<std::size_t>(sx.hi) * 3;
      for (std::size_t c = 0; c < 3; ++c) {
        const double a = src[c0 + c];
        const double b = src[c1 + c];
        row[static_cast<std::size_t>(x) * 3 + c] = a + (b - a) * sx.frac;
      }
    }
  };
  std::vector<double> top(out_row), bottom(out_row);
  int top_src = -1, bottom_src = -1;
  for (int y = 0; y < region.h; ++y) {
    const auto& sy = ty[static_cast<std::size_t>(y)];
    if (sy.lo != top_src) {
      if (sy.lo == bottom_src) {
        std::swap(top, bottom);
        std::swap(top_src, bottom_src);
      } else {
        horizontal(sy.lo, top);
        top_src = sy.lo;
      }
    }
    if (sy.hi != bottom_src) {
      horizontal(sy.hi, bottom);
      bottom_src = sy.hi;
    }
    std::uint8_t* o = dst.data() + static_cast<std::size_t>(y) * out_row;
    for (std::size_t i = 0; i < out_row; ++i) {
      o[i] = quantize(top[i] + (bottom[i] - top[i]) * sy.frac);
    }
  }
  return out;
}

inline ImageBuffer resize(const ImageBuffer& img, int height, int width) {
  if (height == img.height() && width == img.width()) return img;
  return resize_region(img, height, width, PixelRect{0, 0, width, height});
}

inline ImageBuffer crop(const ImageBuffer& img, const PixelRect& rect) {
  if (rect.w < 1 || rect.h < 1 || rect.x < 0 || rect.y < 0 ||
      rect.x + rect.w > img.width() || rect.y + rect.h > img.height()) {
    throw Error(Errc::kInvalidRect, "crop rectangle outside image extent");
  }
  ImageBuffer out(rect.h, rect.w);
  for (int y = 0; y < rect.h; ++y) {
    for (int x = 0; x < rect.w; ++x) out.set(y, x, img.at(rect.y + y, rect.x + x));
  }
  return out;
}

inline ImageBuffer pad(const ImageBuffer& img, int height, int width,
                       Rgb fill = kDefaultPadFill) {
  if (height < img.height() || width < img.width()) {
    throw Error(Errc::kInvalidTarget, "pad target smaller than image");
  }
  ImageBuffer out(height, width, fill);
  const auto row = static_cast<std::size_t>(img.width()) * 3;
  for (int y = 0; y < img.height(); ++y) {
    std::copy_n(img.pixels().begin() + static_cast<std::ptrdiff_t>(y * row), row,
                out.pixels().begin() + static_cast<std::ptrdiff_t>(y * static_cast<std::size_t>(width) * 3));
  }
  return out;
}

namespace image_op {
struct HFlip {};
struct Resize { int height; int width; };
struct Crop { PixelRect rect; };
struct Pad { int height; int width; Rgb fill = kDefaultPadFill; };
}  // namespace image_op

using ImageOp = std::variant<image_op::HFlip, image_op::Resize, image_op::Crop, image_op::Pad>;

inline ImageBuffer resample_image(const ImageBuffer& img, const ImageOp& op) {
  return std::visit(
      [&](const auto& o) -> ImageBuffer {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, image_op::HFlip>) {
          return hflip(img);
        } else if constexpr (std::is_same_v<T, image_op::Resize>) {
          return resize(img, o.height, o.width);
        } else if constexpr (std::is_same_v<T, image_op::Crop>) {
          return crop(img, o.rect);
        } else {
          return pad(img, o.height, o.width, o.fill);
        }
      },
      op);
}

}  // namespace segkit
