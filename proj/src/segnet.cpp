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
#include "condadapt/segnet.hpp"

#include <cmath>
#include <stdexcept>

namespace condadapt {

std::string to_string(HeadVariant v) {
  switch (v) {
    case HeadVariant::mix: return "mix";
    case HeadVariant::sep: return "sep";
    case HeadVariant::sm: return "sm";
    case HeadVariant::cam: return "cam";
  }
  return "?";
}

HeadVariant head_variant_from_string(const std::string& s) {
  if (s == "mix") return HeadVariant::mix;
  if (s == "sep") return HeadVariant::sep;
  if (s == "sm") return HeadVariant::sm;
  if (s == "cam") return HeadVariant::cam;
  throw std::invalid_argument("unknown head variant '" + s + "'");
}

std::string to_string(PredictMode m) {
  switch (m) {
    case PredictMode::fused: return "fused";
    case PredictMode::ca_only: return "ca_only";
    case PredictMode::mean_vote: return "mean_vote";
  }
  return "?";
}

PredictMode predict_mode_from_string(const std::string& s) {
  if (s == "fused") return PredictMode::fused;
  if (s == "ca_only") return PredictMode::ca_only;
  if (s == "mean_vote") return PredictMode::mean_vote;
  throw std::invalid_argument("unknown predict mode '" + s + "'");
}

PredictMode default_mode(HeadVariant v) {
  return v == HeadVariant::cam ? PredictMode::fused : PredictMode::mean_vote;
}

void SegNetConfig::validate() const {
  if (classes < 2) throw std::invalid_argument("segnet needs at least 2 classes");
  if (conditions < 1) throw std::invalid_argument("segnet needs at least 1 condition");
  if (feature_dim < 1 || width < 2) throw std::invalid_argument("segnet channel counts must be positive");
}

template <typename S>
Encoder<S>::Encoder(int in_channels, int width, Rng& rng)
    : c1_(in_channels, width / 2, 3, 2, 1, rng),
      c2_(width / 2, width, 3, 2, 1, rng),
      c3_(width, width, 3, 1, 1, rng) {}

template <typename S>
Var<S> Encoder<S>::operator()(const Var<S>& x) const {
  return relu(c3_(relu(c2_(relu(c1_(x))))));
}

template <typename S>
void Encoder<S>::collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
  c1_.collect(prefix + ".c1", out);
  c2_.collect(prefix + ".c2", out);
  c3_.collect(prefix + ".c3", out);
}

template <typename S>
Decoder<S>::Decoder(int in_channels, int feature_dim, int classes, Rng& rng)
    : feat_(in_channels, feature_dim, 3, 1, 1, rng), cls_(feature_dim, classes, 1, 1, 0, rng, 1.0) {}

template <typename S>
std::pair<Var<S>, Var<S>> Decoder<S>::operator()(const Var<S>& x) const {
  Var<S> f = relu(feat_(x));
  return {f, cls_(f)};
}

template <typename S>
void Decoder<S>::collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
  feat_.collect(prefix + ".feat", out);
  cls_.collect(prefix + ".cls", out);
}

template <typename S>
SegNet<S>::SegNet(const SegNetConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const int K = config_.conditions, D = config_.feature_dim, L = config_.classes;
  const int encoders = config_.variant == HeadVariant::sep ? K : 1;
  for (int i = 0; i < encoders; ++i) encoders_.emplace_back(3, config_.width, rng);
  for (int i = 0; i < config_.heads(); ++i) decoders_.emplace_back(config_.width, D, L, rng);
  if (config_.variant == HeadVariant::cam) {
    fuse1_ = Conv2d<S>(K * D, D, 3, 1, 1, rng);
    fuse2_ = Conv2d<S>(D, K, 1, 1, 0, rng, 1.0);
    ca1_ = Conv2d<S>((K + 1) * D, D, 3, 1, 1, rng);
    ca2_ = Conv2d<S>(D, D, 3, 1, 1, rng);
    ca_cls_ = Conv2d<S>(D, L, 1, 1, 0, rng, 1.0);
  }
}

template <typename S>
PredictionBundle<S> SegNet<S>::forward(const Var<S>& images) const {
  if (images.shape().c != 3) throw std::invalid_argument("segnet expects [B,3,H,W], got " + images.shape().str());
  PredictionBundle<S> b;
  const Var<S> shared = config_.variant == HeadVariant::sep ? Var<S>() : encoders_[0](images);
  for (int i = 0; i < config_.heads(); ++i) {
    const Var<S> enc = config_.variant == HeadVariant::sep ? encoders_[static_cast<std::size_t>(i)](images) : shared;
    auto [f, logits] = decoders_[static_cast<std::size_t>(i)](enc);
    check_finite(logits.value(), "segnet decoder " + std::to_string(i));
    b.features.push_back(f);
    b.probs.push_back(softmax_channels(logits));
    b.logits.push_back(std::move(logits));
  }
  if (config_.variant == HeadVariant::cam) {
    const Var<S> stacked = concat_channels(b.features);
    b.attention = softmax_channels(fuse2_(relu(fuse1_(stacked))));
    check_finite(b.attention.value(), "segnet attention fuser");
    b.fused_features = fuse_features(b.attention, b.features);
    b.ca_features = relu(ca2_(relu(ca1_(concat_channels<S>({stacked, b.fused_features})))));
    b.ca_logits = ca_cls_(b.ca_features);
    check_finite(b.ca_logits.value(), "segnet CA head");
    b.ca_probs = softmax_channels(b.ca_logits);
  }
  return b;
}

template <typename S>
PredictionBundle<S> SegNet<S>::forward_cam(const Var<S>& images) const {
  if (config_.variant != HeadVariant::cam)
    throw std::logic_error("forward_cam on a " + to_string(config_.variant) + " network");
  return forward(images);
}

template <typename S>
void SegNet<S>::collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  for (std::size_t i = 0; i < encoders_.size(); ++i)
    encoders_[i].collect(p + (encoders_.size() == 1 ? "enc" : "enc" + std::to_string(i)), out);
  for (std::size_t i = 0; i < decoders_.size(); ++i) decoders_[i].collect(p + "dec" + std::to_string(i), out);
  if (config_.variant == HeadVariant::cam) {
    fuse1_.collect(p + "fuse.c1", out);
    fuse2_.collect(p + "fuse.c2", out);
    ca1_.collect(p + "ca.c1", out);
    ca2_.collect(p + "ca.c2", out);
    ca_cls_.collect(p + "ca.cls", out);
  }
}

template <typename S>
SegNet<S> SegNet<S>::clone() const {
  Rng rng(0);
  SegNet copy(config_, rng);
  copy.load_state(this->state());
  return copy;
}

template <typename S>
Var<S> fuse_features(const Var<S>& attention, const std::vector<Var<S>>& features) {
  if (attention.shape().c != static_cast<int>(features.size()))
    throw std::invalid_argument("fuse_features: " + std::to_string(attention.shape().c) +
                                " weights for " + std::to_string(features.size()) + " maps");
  Var<S> f;
  for (std::size_t i = 0; i < features.size(); ++i) {
    Var<S> term = mul_channel_broadcast(slice_channels(attention, static_cast<int>(i), 1), features[i]);
    f = f.defined() ? add(f, term) : term;
  }
  return f;
}

template <typename S>
Var<S> fuse_probs(const Var<S>& attention, const std::vector<Var<S>>& probs, const Var<S>& ca_probs) {
  return add(scale(fuse_features(attention, probs), S(0.5)), scale(ca_probs, S(0.5)));
}

template <typename S>
Var<S> mean_vote(const std::vector<Var<S>>& probs) {
  if (probs.empty()) throw std::invalid_argument("mean_vote: no heads");
  Var<S> total = probs[0];
  for (std::size_t i = 1; i < probs.size(); ++i) total = add(total, probs[i]);
  return scale(total, S(1) / static_cast<S>(probs.size()));
}

template <typename S>
Var<S> bundle_probs(const PredictionBundle<S>& bundle, PredictMode mode) {
  switch (mode) {
    case PredictMode::fused:
      if (!bundle.has_ca()) throw std::invalid_argument("fused prediction needs a CAM network");
      return fuse_probs(bundle.attention, bundle.probs, bundle.ca_probs);
    case PredictMode::ca_only:
      if (!bundle.has_ca()) throw std::invalid_argument("ca_only prediction needs a CAM network");
      return bundle.ca_probs;
    case PredictMode::mean_vote: {
      auto heads = bundle.probs;
      if (bundle.has_ca()) heads.push_back(bundle.ca_probs);
      return mean_vote(heads);
    }
  }
  throw std::logic_error("bad predict mode");
}

template <typename S>
Tensor<S> upsample_probs(const Tensor<S>& probs, int height, int width) {
  Tensor<S> up = resize_bilinear(probs, height, width);
  const Shape s = up.shape();
  for (int n = 0; n < s.n; ++n) {
    Eigen::Array<S, Eigen::Dynamic, 1> total = Eigen::Array<S, Eigen::Dynamic, 1>::Zero(static_cast<Eigen::Index>(s.plane()));
    for (int c = 0; c < s.c; ++c) total += Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(up.data() + up.index(n, c, 0, 0), total.size());
    for (int c = 0; c < s.c; ++c) Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(up.data() + up.index(n, c, 0, 0), total.size()) /= total;
  }
  return up;
}

template <typename S>
Tensor<S> predict(const SegNet<S>& net, const Tensor<S>& images, PredictMode mode) {
  NoGradGuard guard;
  const auto bundle = net.forward(constant(images));
  const Shape s = images.shape();
  return upsample_probs(bundle_probs(bundle, mode).value(), s.h, s.w);
}

template <typename S>
Tensor<S> predict(const SegNet<S>& net, const Tensor<S>& images) {
  return predict(net, images, default_mode(net.config().variant));
}

template <typename S>
LabelMap argmax_labels(const Tensor<S>& probs) {
  const Shape s = probs.shape();
  LabelMap out(Shape{s.n, 1, s.h, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        int best = 0;
        S best_p = probs(n, 0, y, x);
        for (int c = 1; c < s.c; ++c)
          if (probs(n, c, y, x) > best_p) {
            best_p = probs(n, c, y, x);
            best = c;
          }
        out(n, 0, y, x) = best + 1;
      }
  return out;
}

template <typename S>
void check_finite(const Tensor<S>& t, const std::string& where) {
  if (!t.array().isFinite().all()) throw std::runtime_error("non-finite values in " + where);
}

#define CONDADAPT_INSTANTIATE_SEGNET(S)                                                          \
  template class Encoder<S>;                                                                     \
  template class Decoder<S>;                                                                     \
  template class SegNet<S>;                                                                      \
  template Var<S> fuse_features(const Var<S>&, const std::vector<Var<S>>&);                      \
  template Var<S> fuse_probs(const Var<S>&, const std::vector<Var<S>>&, const Var<S>&);          \
  template Var<S> mean_vote(const std::vector<Var<S>>&);                                         \
  template Var<S> bundle_probs(const PredictionBundle<S>&, PredictMode);                         \
  template Tensor<S> upsample_probs(const Tensor<S>&, int, int);                                 \
  template Tensor<S> predict(const SegNet<S>&, const Tensor<S>&, PredictMode);                   \
  template Tensor<S> predict(const SegNet<S>&, const Tensor<S>&);                                \
  template LabelMap argmax_labels(const Tensor<S>&);                                             \
  template void check_finite(const Tensor<S>&, const std::string&);

CONDADAPT_INSTANTIATE_SEGNET(float)
CONDADAPT_INSTANTIATE_SEGNET(double)

}  // namespace condadapt
