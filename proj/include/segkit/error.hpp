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

#include <stdexcept>
#include <string>
#include <string_view>

namespace segkit {

// Failure categories surfaced by the library. The CLI maps every one of
// these to exit code 1.
enum class Errc {
  kMalformedRle,
  kShapeMismatch,
  kInvalidRect,
  kInvalidTarget,
  kParse,
  kSchema,
  kMask,
  kIo,
  kEmptySource,
  kShape,
  kEmptyList,
  kSchemaMismatch,
  kFormat,
  kUnknownId,
  kConfig,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kMalformedRle: return "MalformedRle";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kInvalidRect: return "InvalidRect";
    case Errc::kInvalidTarget: return "InvalidTarget";
    case Errc::kParse: return "ParseError";
    case Errc::kSchema: return "SchemaError";
    case Errc::kMask: return "MaskError";
    case Errc::kIo: return "IoError";
    case Errc::kEmptySource: return "EmptySource";
    case Errc::kShape: return "ShapeError";
    case Errc::kEmptyList: return "EmptyList";
    case Errc::kSchemaMismatch: return "SchemaMismatch";
    case Errc::kFormat: return "FormatError";
    case Errc::kUnknownId: return "UnknownId";
    case Errc::kConfig: return "ConfigError";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code), message_(message) {}

  Errc code() const noexcept { return code_; }
  // The message without the category prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  Errc code_;
  std::string message_;
};

}  // namespace segkit
