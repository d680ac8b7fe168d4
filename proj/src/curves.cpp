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
#include "condadapt/curves.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace condadapt {

std::vector<double> CurveLog::values(const std::string& name) const {
  std::vector<double> out;
  for (const auto& r : rows_)
    if (r.name == name) out.push_back(r.value);
  return out;
}

std::string CurveLog::csv() const {
  std::string out = "step,name,value\n";
  for (const auto& r : rows_) out += fmt::format("{},{},{:.8g}\n", r.step, r.name, r.value);
  return out;
}

void CurveLog::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write curves to " + path.string());
  out << csv();
}

CurveLog CurveLog::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curves file " + path.string());
  CurveLog log;
  std::string line;
  std::getline(in, line);
  if (line != "step,name,value") throw std::runtime_error("unexpected curves header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) throw std::runtime_error("malformed curves row in " + path.string());
    log.add(std::stol(line.substr(0, a)), line.substr(a + 1, b - a - 1), std::stod(line.substr(b + 1)));
  }
  return log;
}

}  // namespace condadapt
