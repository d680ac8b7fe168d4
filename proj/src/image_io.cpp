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
#include "condadapt/image_io.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace condadapt {

namespace {

struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
};

int read_header_int(std::istream& in, const std::filesystem::path& path) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int value = 0;
  if (!(in >> value)) throw std::runtime_error("corrupt netpbm header in " + path.string());
  return value;
}

std::vector<unsigned char> read_netpbm(const std::filesystem::path& path, const char* magic,
                                       int channels, NetpbmHeader& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image file " + path.string());
  in >> header.magic;
  if (header.magic != magic)
    throw std::runtime_error("expected " + std::string(magic) + " image in " + path.string() +
                             ", found '" + header.magic + "'");
  header.width = read_header_int(in, path);
  header.height = read_header_int(in, path);
  header.maxval = read_header_int(in, path);
  if (header.width <= 0 || header.height <= 0 || header.maxval != 255)
    throw std::runtime_error("unsupported netpbm geometry in " + path.string());
  in.get();  // single whitespace before the raster
  std::vector<unsigned char> raster(static_cast<std::size_t>(header.width) * header.height *
                                    channels);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size()))
    throw std::runtime_error("truncated image raster in " + path.string());
  return raster;
}

void write_netpbm(const std::filesystem::path& path, const char* magic, int width, int height,
                  const std::vector<unsigned char>& raster) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image file " + path.string());
  out << magic << "\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
  const Shape s = image.shape();
  if (s.n != 1 || s.c != 3) throw std::invalid_argument("write_ppm expects [1,3,H,W], got " + s.str());
  std::vector<unsigned char> raster(s.plane() * 3);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x)
      for (int c = 0; c < 3; ++c)
        raster[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] = quantize_unit(image(0, c, y, x));
  write_netpbm(path, "P6", s.w, s.h, raster);
}

Tensor<float> read_ppm(const std::filesystem::path& path) {
  NetpbmHeader h;
  const auto raster = read_netpbm(path, "P6", 3, h);
  Tensor<float> image(Shape{1, 3, h.height, h.width});
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x)
      for (int c = 0; c < 3; ++c)
        image(0, c, y, x) =
            static_cast<float>(raster[(static_cast<std::size_t>(y) * h.width + x) * 3 + c]) / 255.f;
  return image;
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
  const Shape s = labels.shape();
  if (s.n != 1 || s.c != 1) throw std::invalid_argument("write_pgm expects [1,1,H,W], got " + s.str());
  std::vector<unsigned char> raster(s.plane());
  for (std::size_t i = 0; i < raster.size(); ++i) {
    const int v = labels[i];
    if (v < 0 || v > 255) throw std::out_of_range("label value does not fit 8 bits: " + std::to_string(v));
    raster[i] = static_cast<unsigned char>(v);
  }
  write_netpbm(path, "P5", s.w, s.h, raster);
}

LabelMap read_pgm(const std::filesystem::path& path) {
  NetpbmHeader h;
  const auto raster = read_netpbm(path, "P5", 1, h);
  LabelMap labels(Shape{1, 1, h.height, h.width});
  for (std::size_t i = 0; i < raster.size(); ++i) labels[i] = raster[i];
  return labels;
}

void write_pgm_unit(const std::filesystem::path& path, const Tensor<float>& map) {
  const Shape s = map.shape();
  if (s.n != 1 || s.c != 1) throw std::invalid_argument("write_pgm_unit expects [1,1,H,W]");
  std::vector<unsigned char> raster(s.plane());
  for (std::size_t i = 0; i < raster.size(); ++i) raster[i] = quantize_unit(map[i]);
  write_netpbm(path, "P5", s.w, s.h, raster);
}

}  // namespace condadapt
