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
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "segkit/coco.hpp"
#include "segkit/error.hpp"

// Checkpoint archives and equal-weight checkpoint averaging.
//
// Archive layout, all integers little-endian:
//   "SWA1"                       4-byte magic
//   u32 tensor count
//   per tensor, in byte-lexicographic name order:
//     u16 name length, name bytes (UTF-8)
//     u8 rank, rank x u32 dims
//     product(dims) x f32 data, row-major

namespace segkit {

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::uint64_t element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1},
                           [](std::uint64_t a, std::uint32_t b) { return a * b; });
  }
  friend bool operator==(const Tensor& a, const Tensor& b) {
    // Bitwise, so that NaN payloads and signed zeros compare as stored.
    return a.dims == b.dims && a.data.size() == b.data.size() &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
  }
};

struct Checkpoint {
  // std::string ordering compares bytes as unsigned char.
  std::map<std::string, Tensor> entries;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr std::string_view kSwaMagic = "SWA1";

namespace detail {

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }
inline void put_u16(std::string& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) put_u8(out, static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) put_u8(out, static_cast<std::uint8_t>(v >> (8 * i)));
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(Errc::kFormat, std::string("truncated archive while reading ") + what);
    }
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  std::uint64_t le(std::size_t n, const char* what) {
    const auto b = take(n, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    }
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_archive(const Checkpoint& ck) {
  std::string out(kSwaMagic);
  if (ck.entries.size() > UINT32_MAX) throw Error(Errc::kFormat, "too many tensors");
  detail::put_u32(out, static_cast<std::uint32_t>(ck.entries.size()));
  for (const auto& [name, t] : ck.entries) {
    if (name.size() > UINT16_MAX) throw Error(Errc::kFormat, "tensor name too long: " + name);
    if (t.dims.size() > UINT8_MAX) throw Error(Errc::kFormat, "tensor rank too large: " + name);
    if (t.element_count() != t.data.size()) {
      throw Error(Errc::kFormat, "tensor data does not match dims: " + name);
    }
    detail::put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    detail::put_u8(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) {
      if (d == 0) throw Error(Errc::kFormat, "zero extent in tensor " + name);
      detail::put_u32(out, d);
    }
    for (float f : t.data) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

// Accepts only canonical archives (names strictly increasing, no trailing
// bytes), so decode followed by encode reproduces the input bytes.
inline Checkpoint decode_archive(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (in.take(kSwaMagic.size(), "magic") != kSwaMagic) {
    throw Error(Errc::kFormat, "bad magic, expected SWA1");
  }
  const auto count = in.le(4, "tensor count");
  Checkpoint ck;
  const std::string* prev = nullptr;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = in.le(2, "name length");
    std::string name(in.take(name_len, "name"));
    if (prev != nullptr && !(*prev < name)) {
      throw Error(Errc::kFormat, "tensor names not in strictly increasing order at '" + name + "'");
    }
    Tensor t;
    const auto rank = in.le(1, "rank");
    std::uint64_t elements = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      const auto d = static_cast<std::uint32_t>(in.le(4, "dims"));
      if (d == 0) throw Error(Errc::kFormat, "zero extent in tensor '" + name + "'");
      elements *= d;
      if (elements > bytes.size()) {
        throw Error(Errc::kFormat, "tensor '" + name + "' larger than the archive");
      }
      t.dims.push_back(d);
    }
    const auto raw = in.take(elements * 4, "tensor data");
    t.data.resize(elements);
    for (std::uint64_t e = 0; e < elements; ++e) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * e + b])) << (8 * b);
      }
      t.data[e] = std::bit_cast<float>(bits);
    }
    auto [it, _] = ck.entries.emplace(std::move(name), std::move(t));
    prev = &it->first;
  }
  if (!in.done()) throw Error(Errc::kFormat, "trailing bytes after last tensor");
  return ck;
}

inline Checkpoint read_archive(const std::filesystem::path& path) {
  std::string bytes = detail::read_file(path);
  try {
    return decode_archive(bytes);
  } catch (const Error& e) {
    throw Error(Errc::kFormat, path.string() + ": " + e.message());
  }
}

inline void write_archive(const Checkpoint& ck, const std::filesystem::path& path) {
  detail::write_file(path, encode_archive(ck));
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Equal-weight elementwise mean. Inputs are put in a content-defined order
// before accumulating in double, so the result does not depend on the order
// of `cks`.
inline Checkpoint average_checkpoints(const std::vector<Checkpoint>& cks) {
  if (cks.empty()) throw Error(Errc::kEmptyList, "no checkpoints to average");

  std::set<std::string> names;
  for (const auto& ck : cks) {
    for (const auto& [name, _] : ck.entries) names.insert(name);
  }
  for (const auto& name : names) {
    for (const auto& ck : cks) {
      const auto it = ck.entries.find(name);
      if (it == ck.entries.end()) {
        throw Error(Errc::kSchemaMismatch, "tensor '" + name + "' is missing from some checkpoints");
      }
      if (it->second.dims != cks.front().entries.at(name).dims) {
        throw Error(Errc::kSchemaMismatch, "tensor '" + name + "' has differing dims");
      }
      if (it->second.data.size() != it->second.element_count()) {
        throw Error(Errc::kSchemaMismatch, "tensor '" + name + "' data does not match dims");
      }
    }
  }

  std::vector<std::string> encoded;
  encoded.reserve(cks.size());
  for (const auto& ck : cks) encoded.push_back(encode_archive(ck));
  std::vector<std::size_t> order(cks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto da = detail::fnv1a(encoded[a]);
    const auto db = detail::fnv1a(encoded[b]);
    if (da != db) return da < db;
    return encoded[a] < encoded[b];
  });

  const double k = static_cast<double>(cks.size());
  Checkpoint out;
  for (const auto& [name, proto] : cks.front().entries) {
    Tensor t{proto.dims, std::vector<float>(proto.data.size())};
    std::vector<double> acc(proto.data.size(), 0.0);
    for (std::size_t idx : order) {
      const auto& src = cks[idx].entries.at(name).data;
      for (std::size_t e = 0; e < acc.size(); ++e) acc[e] += static_cast<double>(src[e]);
    }
    for (std::size_t e = 0; e < acc.size(); ++e) t.data[e] = static_cast<float>(acc[e] / k);
    out.entries.emplace(name, std::move(t));
  }
  return out;
}

}  // namespace segkit
