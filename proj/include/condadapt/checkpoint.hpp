/* Copyright 2026 The condadapt Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Single-file parameter dictionaries:
//   "CONDADPT" | u32 version | tag | meta (JSON text) | u32 count |
//   count x (name | i32 n,c,h,w | float64 values)
// Strings are u32 length + bytes; integers little-endian.

#include "condadapt/nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace condadapt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string tag;
  nlohmann::json meta = nlohmann::json::object();
  StateDict<double> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws std::runtime_error naming the path on missing, truncated or
/// foreign files and on version mismatches.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over names and raw float64 bytes, for "unchanged" checks.
std::uint64_t state_checksum(const StateDict<double>& state);

template <typename S>
std::uint64_t checksum(const Module<S>& m) {
  return state_checksum(to_double(m.state()));
}

}  // namespace condadapt
