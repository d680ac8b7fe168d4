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

#include <filesystem>
#include <string>
#include <vector>

namespace condadapt {

/// Scalar training curves, one (step, name, value) row per entry.
class CurveLog {
 public:
  struct Row {
    long step;
    std::string name;
    double value;
  };

  void add(long step, const std::string& name, double value) { rows_.push_back({step, name, value}); }
  const std::vector<Row>& rows() const { return rows_; }
  /// Values of one curve in insertion order.
  std::vector<double> values(const std::string& name) const;

  /// "step,name,value" with fixed precision.
  std::string csv() const;
  void write(const std::filesystem::path& path) const;
  static CurveLog read(const std::filesystem::path& path);

 private:
  std::vector<Row> rows_;
};

}  // namespace condadapt
