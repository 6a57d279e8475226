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
#include <numbers>

namespace segkit {

// Counter-based random stream: draw k is a pure function of (seed, k), so a
// stream is reproducible from its seed and the number of draws taken.
// Distributions are implemented here rather than through <random> because
// the standard distributions are not specified bit-for-bit across libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  // Independent stream keyed by `key`, e.g. an image id.
  RandomStream child(std::uint64_t key) const {
    return RandomStream(mix(seed_ ^ mix(key + 0x632BE59BD9B4E019ULL)));
  }
  RandomStream child(std::uint64_t key_a, std::uint64_t key_b) const {
    return child(key_a).child(key_b);
  }

  std::uint64_t next_u64() {
    return mix(seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) {
      next_u64();
      return lo;
    }
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    // 128-bit multiply-shift; bias is below 2^-64 * span.
    const auto wide = static_cast<unsigned __int128>(next_u64()) * span;
    return lo + static_cast<std::int64_t>(wide >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    // Box-Muller, one value per two draws.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Knuth's product method; adequate for the small rates used here.
  std::int64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    std::int64_t k = 0;
    double p = uniform();
    while (p > limit) {
      ++k;
      p *= uniform();
    }
    return k;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace segkit
