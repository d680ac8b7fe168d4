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

// Minimal SVG charts for training curves and per-condition results.

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace condadapt {

using Series = std::vector<std::pair<double, double>>;

/// One polyline per named series, shared axes. Series longer than
/// `max_points` are averaged into that many buckets first.
std::string line_chart_svg(const std::string& title, const std::map<std::string, Series>& series,
                           std::size_t max_points = 400);

/// Grouped bars: one group per category, one bar per group member.
/// NaN values are left out.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::map<std::string, std::vector<double>>& groups);

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace condadapt
