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

#include "condadapt/autodiff.hpp"

#include <vector>

namespace condadapt {

// Elementwise. Binary ops require equal shapes.
template <typename S> Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> mul(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> scale(const Var<S>& a, S factor);
template <typename S> Var<S> add_scalar(const Var<S>& a, S offset);
template <typename S> Var<S> relu(const Var<S>& a);
template <typename S> Var<S> leaky_relu(const Var<S>& a, S slope);
template <typename S> Var<S> sigmoid(const Var<S>& a);
/// log(sigmoid(a)) without forming sigmoid(a).
template <typename S> Var<S> log_sigmoid(const Var<S>& a);
/// log(max(a, eps)); zero gradient where clamped.
template <typename S> Var<S> log_clamped(const Var<S>& a, S eps);
template <typename S> Var<S> clamp(const Var<S>& a, S lo, S hi);

// Channel structure.
template <typename S> Var<S> concat_channels(const std::vector<Var<S>>& parts);
template <typename S> Var<S> slice_channels(const Var<S>& a, int first, int count);
/// weights [N,1,H,W] times features [N,C,H,W], broadcast over C.
template <typename S> Var<S> mul_channel_broadcast(const Var<S>& weights, const Var<S>& features);
template <typename S> Var<S> softmax_channels(const Var<S>& a);
template <typename S> Var<S> log_softmax_channels(const Var<S>& a);
template <typename S> Var<S> concat_batch(const std::vector<Var<S>>& parts);
/// Gathers batch entries; repeated indices accumulate gradient.
template <typename S> Var<S> select_batch(const Var<S>& a, const std::vector<int>& indices);

// Spatial.
template <typename S> Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const Var<S>& bias,
                                    int stride, int pad);
template <typename S> Var<S> upsample_nearest(const Var<S>& a, int factor);
/// Half-pixel bilinear resampling. Each output is a convex combination of
/// inputs, so per-pixel simplices stay simplices.
template <typename S> Var<S> resize_bilinear(const Var<S>& a, int height, int width);
template <typename S> Var<S> global_avg_pool(const Var<S>& a);

// Reductions to a [1,1,1,1] scalar.
template <typename S> Var<S> sum(const Var<S>& a);
template <typename S> Var<S> mean(const Var<S>& a);
/// sum_i a_i * weights_i; weights are constants.
template <typename S> Var<S> weighted_sum(const Var<S>& a, const Tensor<S>& weights);

/// Picks channel (label - 1) at every pixel: [N,L,H,W] x labels [N,1,H,W]
/// -> [N,1,H,W]. Pixels with label 0 yield 0 and receive no gradient.
template <typename S> Var<S> pick_labels(const Var<S>& a, const LabelMap& labels);

/// Bilinear interpolation matrix [out x in] used by resize_bilinear.
template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> bilinear_matrix(int in, int out);

/// Plain-tensor bilinear resize (no tape).
template <typename S> Tensor<S> resize_bilinear(const Tensor<S>& a, int height, int width);

}  // namespace condadapt
