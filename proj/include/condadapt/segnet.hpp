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

// Segmentation networks: shared encoder, per-condition decoders, the
// condition attention fuser and the CA head, plus the single-head and
// multi-head variants used for comparison.

#include "condadapt/nn.hpp"

#include <string>
#include <vector>

namespace condadapt {

enum class HeadVariant { mix, sep, sm, cam };

std::string to_string(HeadVariant v);
HeadVariant head_variant_from_string(const std::string& s);

enum class PredictMode { fused, ca_only, mean_vote };

std::string to_string(PredictMode m);
PredictMode predict_mode_from_string(const std::string& s);

struct SegNetConfig {
  HeadVariant variant = HeadVariant::cam;
  int classes = 6;       // L
  int conditions = 3;    // K
  int feature_dim = 32;  // D, channels of every f map
  int width = 32;        // encoder output channels

  void validate() const;
  /// Number of decoder heads (1 for mix, K otherwise).
  int heads() const { return variant == HeadVariant::mix ? 1 : conditions; }
};

/// Everything one forward pass produces, at 1/4 input resolution.
/// Only CAM networks fill the attention and CA members.
template <typename S>
struct PredictionBundle {
  std::vector<Var<S>> features;  // f^{C_i}, [B,D,h,w]
  std::vector<Var<S>> logits;    // [B,L,h,w]
  std::vector<Var<S>> probs;     // p^{C_i}, softmax of logits
  Var<S> attention;              // W, [B,K,h,w], softmax over K
  Var<S> fused_features;         // f
  Var<S> ca_features;            // f^{CA}
  Var<S> ca_logits;
  Var<S> ca_probs;               // p^{CA}

  bool has_ca() const { return ca_probs.defined(); }
  int heads() const { return static_cast<int>(probs.size()); }
};

/// Stride-4 convolutional trunk.
template <typename S>
class Encoder {
 public:
  Encoder() = default;
  Encoder(int in_channels, int width, Rng& rng);
  Var<S> operator()(const Var<S>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const;

 private:
  Conv2d<S> c1_, c2_, c3_;
};

/// 3x3 feature layer then a 1x1 classifier.
template <typename S>
class Decoder {
 public:
  Decoder() = default;
  Decoder(int in_channels, int feature_dim, int classes, Rng& rng);
  /// Returns {features, logits}.
  std::pair<Var<S>, Var<S>> operator()(const Var<S>& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const;

 private:
  Conv2d<S> feat_, cls_;
};

template <typename S>
class SegNet : public Module<S> {
 public:
  SegNet(const SegNetConfig& config, Rng& rng);

  const SegNetConfig& config() const { return config_; }

  PredictionBundle<S> forward(const Var<S>& images) const;
  /// forward() for a CAM network; throws for the other variants.
  PredictionBundle<S> forward_cam(const Var<S>& images) const;

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const override;

  /// Independent deep copy.
  SegNet clone() const;

 private:
  SegNetConfig config_;
  std::vector<Encoder<S>> encoders_;  // one, or K for sep
  std::vector<Decoder<S>> decoders_;
  Conv2d<S> fuse1_, fuse2_;
  Conv2d<S> ca1_, ca2_, ca_cls_;
};

/// f = sum_i W_i * f_i, with W [B,K,h,w].
template <typename S>
Var<S> fuse_features(const Var<S>& attention, const std::vector<Var<S>>& features);

/// p = 0.5 * sum_i W_i * p_i + 0.5 * p_CA.
template <typename S>
Var<S> fuse_probs(const Var<S>& attention, const std::vector<Var<S>>& probs, const Var<S>& ca_probs);

/// Uniform mean of per-head maps.
template <typename S>
Var<S> mean_vote(const std::vector<Var<S>>& probs);

/// The bundle's probability map for `mode` at prediction resolution.
/// mean_vote on a CAM bundle averages the K condition heads and the CA head.
template <typename S>
Var<S> bundle_probs(const PredictionBundle<S>& bundle, PredictMode mode);

/// Mode used when none is requested: fused for CAM, mean_vote otherwise.
PredictMode default_mode(HeadVariant v);

/// Bilinear upsampling of [N,L,h,w] probabilities followed by per-pixel
/// renormalization.
template <typename S>
Tensor<S> upsample_probs(const Tensor<S>& probs, int height, int width);

/// No-grad inference at input resolution.
template <typename S>
Tensor<S> predict(const SegNet<S>& net, const Tensor<S>& images, PredictMode mode);
template <typename S>
Tensor<S> predict(const SegNet<S>& net, const Tensor<S>& images);

/// Per-pixel argmax as labels 1..L; ties go to the lowest class.
template <typename S>
LabelMap argmax_labels(const Tensor<S>& probs);

/// Throws std::runtime_error naming `where` if any value is not finite.
template <typename S>
void check_finite(const Tensor<S>& t, const std::string& where);

}  // namespace condadapt
