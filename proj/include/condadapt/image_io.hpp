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

#include "condadapt/tensor.hpp"

#include <filesystem>

namespace condadapt {

/// Binary netpbm I/O. Colour images are [1,3,H,W] in [0,1], quantized to
/// 8 bits by rounding; label and grey maps are single-channel 8-bit.
void write_ppm(const std::filesystem::path& path, const Tensor<float>& image);
Tensor<float> read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

/// Grey image from a [1,1,H,W] map in [0,1].
void write_pgm_unit(const std::filesystem::path& path, const Tensor<float>& map);

inline unsigned char quantize_unit(float v) {
  const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<unsigned char>(c * 255.f + 0.5f);
}

}  // namespace condadapt
