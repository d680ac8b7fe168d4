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

// Small in-memory datasets for training-loop tests.

#include "condadapt/toyworld.hpp"

#include <string>
#include <vector>

namespace condadapt::testing {

inline const std::vector<std::string>& fixture_conditions() {
  static const std::vector<std::string> names{"clean", "fog", "rain"};
  return names;
}

/// `count` scenes at size x size. Target scenes cycle through the three
/// conditions at strength 0.8; source scenes carry no condition.
inline std::vector<Sample> tiny_samples(int count, Domain domain, int size = 16, std::uint64_t seed = 1) {
  SceneSpec spec = default_scene_spec(domain);
  spec.height = spec.width = size;
  spec.frequency_bands.clear();
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    Sample s = generate_scene(seed * 1000 + static_cast<std::uint64_t>(i), spec);
    if (domain == Domain::target) {
      const int c = i % 3;
      s.image = apply_condition(s.image, fixture_conditions()[static_cast<std::size_t>(c)], 0.8f,
                                seed + static_cast<std::uint64_t>(i));
      s.condition = {c, fixture_conditions()[static_cast<std::size_t>(c)]};
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Source scenes tagged with conditions round-robin, standing in for a
/// stylized source set.
inline std::vector<Sample> tiny_stylized(int count, int size = 16, std::uint64_t seed = 2) {
  auto out = tiny_samples(count, Domain::source, size, seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    out[i].condition = {c, fixture_conditions()[static_cast<std::size_t>(c)]};
  }
  return out;
}

}  // namespace condadapt::testing
