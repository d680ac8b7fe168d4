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

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace condadapt {

/// NCHW extent. Every tensor in the library is rank 4; scalars are [1,1,1,1]
/// and per-image vectors are [N,C,1,1].
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  constexpr std::size_t size() const {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  constexpr std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + "]";
  }
};

/// Dense NCHW storage over an Eigen array. Value semantics.
template <typename Scalar>
class Tensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using PlaneMap = Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstPlaneMap =
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(shape), data_(Array::Constant(static_cast<Eigen::Index>(shape.size()), fill)) {
    if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0)
      throw std::invalid_argument("negative tensor extent " + shape.str());
  }
  Tensor(Shape shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (static_cast<std::size_t>(data_.size()) != shape_.size())
      throw std::invalid_argument("tensor data size does not match shape " + shape.str());
  }

  static Tensor zeros(Shape shape) { return Tensor(shape, Scalar(0)); }
  static Tensor ones(Shape shape) { return Tensor(shape, Scalar(1)); }
  static Tensor scalar(Scalar v) { return Tensor(Shape{}, v); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return shape_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  std::size_t index(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  Scalar& operator()(int n, int c, int h, int w) { return data_[index(n, c, h, w)]; }
  Scalar operator()(int n, int c, int h, int w) const { return data_[index(n, c, h, w)]; }
  Scalar& operator[](std::size_t i) { return data_[static_cast<Eigen::Index>(i)]; }
  Scalar operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }

  /// First element; the value of a [1,1,1,1] tensor.
  Scalar item() const { return data_[0]; }

  PlaneMap plane(int n, int c) {
    return PlaneMap(data_.data() + index(n, c, 0, 0), shape_.h, shape_.w);
  }
  ConstPlaneMap plane(int n, int c) const {
    return ConstPlaneMap(data_.data() + index(n, c, 0, 0), shape_.h, shape_.w);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  /// Images [n, n+count) of the batch.
  Tensor slice_batch(int first, int count) const {
    Shape s = shape_;
    s.n = count;
    const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
    Array out = data_.segment(static_cast<Eigen::Index>(first * per),
                              static_cast<Eigen::Index>(count * per));
    return Tensor(s, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  Shape shape_{0, 0, 0, 0};
  Array data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;
/// Dense integer label map, [N,1,H,W]. Value 0 means unlabeled.
using LabelMap = Tensor<std::int32_t>;

/// Stacks single-image tensors along the batch axis.
template <typename Scalar>
Tensor<Scalar> stack_batch(const std::vector<const Tensor<Scalar>*>& items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: no items");
  Shape s = items.front()->shape();
  int total = 0;
  for (const auto* t : items) {
    Shape o = t->shape();
    if (o.c != s.c || o.h != s.h || o.w != s.w)
      throw std::invalid_argument("stack_batch: shape mismatch " + o.str() + " vs " + s.str());
    total += o.n;
  }
  s.n = total;
  Tensor<Scalar> out(s);
  std::size_t offset = 0;
  for (const auto* t : items) {
    out.array().segment(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(t->size())) =
        t->array();
    offset += t->size();
  }
  return out;
}

}  // namespace condadapt
