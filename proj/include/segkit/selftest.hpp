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

#include <chrono>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "segkit/augment.hpp"
#include "segkit/coco.hpp"
#include "segkit/eval.hpp"
#include "segkit/harness.hpp"
#include "segkit/mask.hpp"
#include "segkit/postprocess.hpp"
#include "segkit/random.hpp"
#include "segkit/swa.hpp"
#include "segkit/synthetic.hpp"

// Quick invariant checks shipped with the library so an installed build can
// verify itself (`segkit selftest`). The full suites live in the test tree.

namespace segkit {

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail::selftest {

inline BinaryMask random_bits(RandomStream& rng, int h, int w) {
  BinaryMask m(h, w);
  for (auto& b : m.bits()) b = rng.bernoulli(0.5) ? 1 : 0;
  return m;
}

inline BinaryMask random_rect(RandomStream& rng, int h, int w) {
  BinaryMask m(h, w);
  const int rw = static_cast<int>(rng.uniform_int(1, w));
  const int rh = static_cast<int>(rng.uniform_int(1, h));
  const int x = static_cast<int>(rng.uniform_int(0, w - rw));
  const int y = static_cast<int>(rng.uniform_int(0, h - rh));
  for (int yy = y; yy < y + rh; ++yy)
    for (int xx = x; xx < x + rw; ++xx) m.set(yy, xx);
  return m;
}

inline std::string rle_roundtrip(std::uint64_t seed) {
  BinaryMask m(3, 3);
  for (std::uint32_t code = 0; code < 512; ++code) {
    for (int i = 0; i < 9; ++i) m.bits()[static_cast<std::size_t>(i)] = (code >> i) & 1;
    const RleMask r = rle_encode(m);
    if (rle_decode(r) != m) return "3x3 mask " + std::to_string(code);
    if (rle_from_string(rle_to_string(r), 3, 3) != r) return "3x3 string " + std::to_string(code);
  }
  RandomStream rng(seed);
  for (int t = 0; t < 1000; ++t) {
    const BinaryMask big = random_bits(rng, 32, 32);
    const RleMask r = rle_encode(big);
    if (rle_decode(r) != big || rle_from_string(rle_to_string(r), 32, 32) != r) {
      return "random 32x32 mask " + std::to_string(t);
    }
  }
  return {};
}

inline std::string iou_counts(std::uint64_t seed) {
  RandomStream rng(seed);
  for (int t = 0; t < 200; ++t) {
    const BinaryMask a = random_bits(rng, 12, 9);
    const BinaryMask b = random_rect(rng, 12, 9);
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      inter += (a.bits()[i] && b.bits()[i]) ? 1 : 0;
      uni += (a.bits()[i] || b.bits()[i]) ? 1 : 0;
    }
    const double expect = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    if (mask_iou(a, b) != expect || rle_iou(rle_encode(a), rle_encode(b)) != expect) {
      return "case " + std::to_string(t);
    }
  }
  if (std::fabs(box_iou(BBox{0, 0, 2, 2}, BBox{1, 1, 2, 2}) - 1.0 / 7.0) > 1e-15) return "box example";
  return {};
}

inline std::string soft_nms_decay() {
  const RleMask blank{1, 1, {1}};
  const std::vector<Detection> pair{{1, 1, BBox{0, 0, 10, 10}, blank, 0.9, std::nullopt},
                                    {1, 1, BBox{0, 0, 10, 10}, blank, 0.8, std::nullopt}};
  const auto out = soft_nms(pair, SoftNmsParams{});
  if (out.size() != 2 || std::fabs(out[1].score - 0.8 * std::exp(-2.0)) > 1e-9) return "gaussian pair";
  SoftNmsParams sharp;
  sharp.sigma = 1e-6;
  sharp.score_floor = 0.01;
  if (soft_nms(pair, sharp).size() != 1) return "duplicate not pruned";
  return {};
}

inline std::string swa_identity(std::uint64_t seed) {
  RandomStream rng(seed);
  Checkpoint ck;
  for (int i = 0; i < 3; ++i) {
    Tensor t{{3, 4}, std::vector<float>(12)};
    for (auto& v : t.data) v = static_cast<float>(rng.normal());
    ck.entries["w" + std::to_string(i)] = std::move(t);
  }
  if (average_checkpoints({ck, ck, ck}) != ck) return "mean of identical checkpoints";
  if (decode_archive(encode_archive(ck)) != ck) return "archive round trip";
  return {};
}

inline std::string copy_paste_invariants(std::uint64_t seed) {
  RandomStream rng(seed);
  AugmentConfig cfg;
  for (int t = 0; t < 50; ++t) {
    Sample target{ImageBuffer(16, 16, Rgb{0, 0, 0}), {}};
    Sample source{ImageBuffer(16, 16, Rgb{255, 255, 255}), {}};
    BinaryMask taken(16, 16);
    for (int k = 0; k < 3; ++k) {
      BinaryMask m = random_rect(rng, 16, 16);
      subtract_in_place(m, taken);
      if (m.count() == 0) continue;
      union_in_place(taken, m);
      target.instances.push_back(Instance{k + 1, 1, std::move(m), false});
    }
    for (int k = 0; k < 4; ++k) source.instances.push_back(Instance{k + 1, 1, random_rect(rng, 16, 16), false});
    RandomStream stream = rng.child(static_cast<std::uint64_t>(t));
    const Sample out = copy_paste(target, source, cfg, stream);
    BinaryMask seen(16, 16);
    for (const auto& inst : out.instances) {
      for (std::size_t p = 0; p < seen.size(); ++p) {
        if (inst.mask.bits()[p] && seen.bits()[p]) return "overlapping masks in case " + std::to_string(t);
      }
      union_in_place(seen, inst.mask);
    }
    for (auto v : out.image.pixels()) {
      if (v != 0 && v != 255) return "third pixel value in case " + std::to_string(t);
    }
  }
  return {};
}

inline std::string geometric_extent(std::uint64_t seed) {
  RandomStream rng(seed);
  AugmentConfig cfg;
  for (int t = 0; t < 20; ++t) {
    const int h = static_cast<int>(rng.uniform_int(1, 32));
    const int w = static_cast<int>(rng.uniform_int(1, 32));
    Sample s{ImageBuffer(h, w), {Instance{1, 1, random_rect(rng, h, w), false}}};
    const GeometricResult r = geometric_pipeline_detailed(s, cfg, rng);
    if (r.sample.image.width() != 1920 || r.sample.image.height() != 1440) return "output extent";
    const int longest = std::max(r.resized_height, r.resized_width);
    const int shortest = std::min(r.resized_height, r.resized_width);
    if (longest > 3680) return "long side above cap";
    if (longest < 3680 && (shortest < 820 || shortest > 3080)) return "short side out of range";
  }
  return {};
}

inline std::string perfect_predictions(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_images = 10;
  spec.height = 64;
  spec.width = 64;
  spec.seed = seed;
  const SyntheticData data = make_synthetic(spec);
  const double map = evaluate(ground_truth_as_detections(data.dataset), data.dataset).map;
  if (map != 1.0) return "map " + std::to_string(map);
  return {};
}

inline std::string tta_noiseless(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.num_images = 4;
  spec.height = 48;
  spec.width = 64;
  spec.seed = seed;
  const SyntheticData data = make_synthetic(spec);
  PipelineConfig cfg;
  cfg.tta = default_tta_views();
  const double map = run_pipeline(cfg, data.dataset, OracleDetector(data.dataset, OracleParams{})).report.map;
  if (std::fabs(map - 1.0) > 1e-6) return "map " + std::to_string(map);
  return {};
}

}  // namespace detail::selftest

inline std::vector<SelftestResult> run_selftest(std::uint64_t seed = 0) {
  namespace st = detail::selftest;
  const std::vector<std::pair<std::string, std::function<std::string()>>> checks{
      {"rle_roundtrip", [&] { return st::rle_roundtrip(seed); }},
      {"iou_pixel_counts", [&] { return st::iou_counts(seed); }},
      {"soft_nms_decay", [] { return st::soft_nms_decay(); }},
      {"swa_identity", [&] { return st::swa_identity(seed); }},
      {"copy_paste_invariants", [&] { return st::copy_paste_invariants(seed); }},
      {"geometric_extent", [&] { return st::geometric_extent(seed); }},
      {"perfect_predictions", [&] { return st::perfect_predictions(seed); }},
      {"tta_noiseless", [&] { return st::tta_noiseless(seed); }},
  };
  std::vector<SelftestResult> out;
  for (const auto& [name, fn] : checks) {
    SelftestResult r{name, false, {}, 0.0};
    const auto start = std::chrono::steady_clock::now();
    try {
      r.detail = fn();
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace segkit
