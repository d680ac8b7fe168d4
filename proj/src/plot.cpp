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
#include "condadapt/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace condadapt {

namespace {

constexpr double kWidth = 720, kHeight = 400, kLeft = 60, kRight = 170, kTop = 36, kBottom = 40;
constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"20\" font-size=\"14\">{}</text>\n",
      kWidth, kHeight, kLeft, escape(title));
}

Series bucket(const Series& s, std::size_t max_points) {
  if (s.size() <= max_points || max_points == 0) return s;
  Series out;
  const double per = static_cast<double>(s.size()) / static_cast<double>(max_points);
  for (std::size_t b = 0; b < max_points; ++b) {
    const auto lo = static_cast<std::size_t>(std::floor(per * static_cast<double>(b)));
    const auto hi = std::min(s.size(), static_cast<std::size_t>(std::floor(per * static_cast<double>(b + 1))));
    double x = 0, y = 0;
    for (std::size_t i = lo; i < hi; ++i) {
      x += s[i].first;
      y += s[i].second;
    }
    const double n = static_cast<double>(hi - lo);
    if (n > 0) out.emplace_back(x / n, y / n);
  }
  return out;
}

struct Axis {
  double lo, hi;
  double map(double v, double a, double b) const { return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : (a + b) / 2; }
};

std::string y_ticks(const Axis& y, double plot_w) {
  std::string out;
  for (int i = 0; i <= 4; ++i) {
    const double v = y.lo + (y.hi - y.lo) * i / 4.0;
    const double py = y.map(v, kHeight - kBottom, kTop);
    out += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", kLeft, py,
                       kLeft + plot_w, py);
    out += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 4, py + 4, v);
  }
  return out;
}

}  // namespace

std::string line_chart_svg(const std::string& title, const std::map<std::string, Series>& series,
                           std::size_t max_points) {
  std::map<std::string, Series> shown;
  Axis x{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  Axis y = x;
  for (const auto& [name, s] : series) {
    Series b = bucket(s, max_points);
    for (const auto& [px, py] : b) {
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      x.lo = std::min(x.lo, px);
      x.hi = std::max(x.hi, px);
      y.lo = std::min(y.lo, py);
      y.hi = std::max(y.hi, py);
    }
    shown.emplace(name, std::move(b));
  }
  if (!std::isfinite(x.lo)) x = y = Axis{0, 1};
  const double plot_w = kWidth - kLeft - kRight;
  std::string svg = header(title) + y_ticks(y, plot_w);
  svg += fmt::format("<text x=\"{}\" y=\"{}\">{:.6g}</text>\n", kLeft, kHeight - 16, x.lo);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.6g}</text>\n", kLeft + plot_w, kHeight - 16,
                     x.hi);
  std::size_t k = 0;
  for (const auto& [name, s] : shown) {
    const char* colour = kPalette[k % kPalette.size()];
    std::string points;
    for (const auto& [px, py] : s)
      if (std::isfinite(px) && std::isfinite(py))
        points += fmt::format("{:.1f},{:.1f} ", x.map(px, kLeft, kLeft + plot_w), y.map(py, kHeight - kBottom, kTop));
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.2\" points=\"{}\"/>\n", colour, points);
    const double ly = kTop + 14.0 * static_cast<double>(k);
    svg += fmt::format("<rect x=\"{}\" y=\"{:.0f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", kWidth - kRight + 12,
                       ly, colour);
    svg += fmt::format("<text x=\"{}\" y=\"{:.0f}\">{}</text>\n", kWidth - kRight + 26, ly + 9, escape(name));
    ++k;
  }
  return svg + "</svg>\n";
}

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::map<std::string, std::vector<double>>& groups) {
  Axis y{0, 0};
  for (const auto& [name, values] : groups) {
    if (values.size() != categories.size())
      throw std::invalid_argument("bar chart group '" + name + "' does not match the category count");
    for (double v : values)
      if (std::isfinite(v)) y.hi = std::max(y.hi, v);
  }
  if (y.hi <= 0) y.hi = 1;
  const double plot_w = kWidth - kLeft - kRight;
  std::string svg = header(title) + y_ticks(y, plot_w);
  const double slot = plot_w / static_cast<double>(std::max<std::size_t>(1, categories.size()));
  const double bar = slot * 0.8 / static_cast<double>(std::max<std::size_t>(1, groups.size()));
  for (std::size_t c = 0; c < categories.size(); ++c)
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       kLeft + slot * (static_cast<double>(c) + 0.5), kHeight - 22, escape(categories[c]));
  std::size_t k = 0;
  for (const auto& [name, values] : groups) {
    const char* colour = kPalette[k % kPalette.size()];
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (!std::isfinite(values[c])) continue;
      const double top = y.map(values[c], kHeight - kBottom, kTop);
      svg += fmt::format("<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n",
                         kLeft + slot * static_cast<double>(c) + slot * 0.1 + bar * static_cast<double>(k), top, bar,
                         kHeight - kBottom - top, colour);
    }
    const double ly = kTop + 14.0 * static_cast<double>(k);
    svg += fmt::format("<rect x=\"{}\" y=\"{:.0f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", kWidth - kRight + 12,
                       ly, colour);
    svg += fmt::format("<text x=\"{}\" y=\"{:.0f}\">{}</text>\n", kWidth - kRight + 26, ly + 9, escape(name));
    ++k;
  }
  return svg + "</svg>\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace condadapt
