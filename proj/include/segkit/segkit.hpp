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

// Everything except PNG I/O (segkit/png_io.hpp), which needs libpng.

#include "segkit/augment.hpp"
#include "segkit/coco.hpp"
#include "segkit/error.hpp"
#include "segkit/eval.hpp"
#include "segkit/harness.hpp"
#include "segkit/image.hpp"
#include "segkit/mask.hpp"
#include "segkit/parallel.hpp"
#include "segkit/postprocess.hpp"
#include "segkit/random.hpp"
#include "segkit/selftest.hpp"
#include "segkit/swa.hpp"
#include "segkit/synthetic.hpp"

namespace segkit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace segkit
