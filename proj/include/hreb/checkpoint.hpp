// Copyright 2026 The HREB-CRF Authors
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

#include <cstdint>
#include <iosfwd>
#include <string>

#include "hreb/model.hpp"

namespace hreb {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian): "HREB", u32 version, config text, token list, tag
// list, parameter count then (name, rank, dims, f64 values) per tensor, gate
// count then (mode, α, β, cache_f, cache_x) per gate. Strings are u64 length +
// bytes.
void save_checkpoint(std::ostream& out, const Tagger& model);
void save_checkpoint(const std::string& path, const Tagger& model);
Tagger load_checkpoint(std::istream& in);
Tagger load_checkpoint(const std::string& path);

}  // namespace hreb
