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
#include <vector>

namespace segkit::detail {

// One axis of a half-pixel-center bilinear resample: output index d reads
// source coordinate (d + 0.5) * src / dst - 0.5, clamped to the valid range.
struct AxisTap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
};

inline std::vector<AxisTap> axis_taps(int src, int dst, int first = 0,
                                      int count = -1) {
  if (count < 0) count = dst;
  std::vector<AxisTap> taps(static_cast<std::size_t>(count));
  const double ratio = static_cast<double>(src) / static_cast<double>(dst);
  for (int i = 0; i < count; ++i) {
    double s = (static_cast<double>(first + i) + 0.5) * ratio - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    auto& t = taps[static_cast<std::size_t>(i)];
    t.lo = lo;
    t.hi = std::min(lo + 1, src - 1);
    t.frac = s - lo;
  }
  return taps;
}

inline double lerp2(double v00, double v01, double v10, double v11,
                    const AxisTap& ty, const AxisTap& tx) {
  const double top = v00 + (v01 - v00) * tx.frac;
  const double bottom = v10 + (v11 - v10) * tx.frac;
  return top + (bottom - top) * ty.frac;
}

}  // namespace segkit::detail
