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

// Condition-guided style translation: a generator that renders source
// images in the style of a chosen target condition, a patch discriminator
// with an auxiliary condition classifier, and the training loop tying them
// to a frozen source segmenter.

#include "condadapt/curves.hpp"
#include "condadapt/segnet.hpp"
#include "condadapt/toyworld.hpp"

#include <string>
#include <vector>

namespace condadapt {

inline constexpr double kDefaultLambdaSc = 5.0;

/// Appends K spatially constant one-hot channels to `features`; sample n
/// gets channel conditions[n] set to one.
template <typename S>
Var<S> inject_condition(const Var<S>& features, const std::vector<int>& conditions, int K);

/// Channel bookkeeping of one injection site, filled during a forward pass.
struct InjectionRecord {
  std::string site;
  int channels_in = 0;
  int channels_out = 0;
};
using InjectionAudit = std::vector<InjectionRecord>;

/// Two-down / two-up residual generator. The condition is injected at the
/// input and before each downsampling convolution. The last convolution is
/// zero-initialized and added to the input, so an untrained generator is
/// the identity on [0,1] images.
template <typename S>
class Generator : public Module<S> {
 public:
  Generator(int conditions, int width, Rng& rng);

  /// Output clipped to [0,1].
  Var<S> operator()(const Var<S>& images, const std::vector<int>& conditions,
                    InjectionAudit* audit = nullptr) const;
  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const override;
  int conditions() const { return conditions_; }

 private:
  Var<S> inject(const Var<S>& x, const std::vector<int>& conditions, const std::string& site,
                InjectionAudit* audit) const;

  int conditions_;
  Conv2d<S> in_, down1_, down2_, res1_, res2_, up1_, up2_, out_;
};

/// Patch discriminator with a realism head (logit grid at 1/8 resolution)
/// and a K-way condition head (1x1 convolution + global average pooling)
/// on a shared trunk.
template <typename S>
class StyleDiscriminator : public Module<S> {
 public:
  StyleDiscriminator(int conditions, int width, Rng& rng);

  struct Output {
    Var<S> realism;    // [B,1,H/8,W/8] logits
    Var<S> condition;  // [B,K,1,1] logits
  };
  Output operator()(const Var<S>& images) const;
  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const override;

 private:
  Conv2d<S> c1_, c2_, c3_, real_, cls_;
};

/// mean log D(real) + mean log(1 - D(fake)) with D = sigmoid(logits).
/// The discriminator ascends this value.
template <typename S>
Var<S> cgan_loss(const Var<S>& real_logits, const Var<S>& fake_logits);

/// Non-saturating generator surrogate: -mean log D(fake).
template <typename S>
Var<S> generator_adv_loss(const Var<S>& fake_logits);

/// Mean -log softmax(logits)[condition] over the batch; logits [B,K,1,1].
template <typename S>
Var<S> condition_nll(const Var<S>& logits, const std::vector<int>& conditions);

/// Classification loss: condition_nll on real target images against their
/// true conditions plus condition_nll on translated images against the
/// injected conditions.
template <typename S>
Var<S> cls_loss(const Var<S>& real_logits, const std::vector<int>& real_conditions,
                const Var<S>& fake_logits, const std::vector<int>& fake_conditions);

/// Semantic consistency: mean -log p(label) over labeled pixels of a
/// frozen segmenter's probabilities on translated images. 0 (with a
/// warning) when nothing is labeled.
template <typename S>
Var<S> sc_loss(const Var<S>& seg_probs, const LabelMap& labels);

/// L_cGAN + L_cls + lambda_sc * L_sc.
template <typename S>
Var<S> cgst_objective(const Var<S>& cgan, const Var<S>& cls, const Var<S>& sc, double lambda_sc);
double cgst_objective(double cgan, double cls, double sc, double lambda_sc);

struct TranslatorConfig {
  int conditions = 3;
  int generator_width = 16;
  int discriminator_width = 16;
  int epochs = 10;
  int batch = 6;
  double lr_generator = 2e-4;
  double lr_discriminator = 2e-4;
  double beta1 = 0.5;
  double lambda_sc = kDefaultLambdaSc;
  std::uint64_t seed = 0;
};

struct TranslatorNets {
  Generator<float> generator;
  StyleDiscriminator<float> discriminator;
};

TranslatorNets make_translator(const TranslatorConfig& cfg);

/// Alternating discriminator / generator updates. Source images get
/// injected conditions cycling over 0..K-1; target batches hold every
/// condition. `frozen_segmenter` is never modified. Throws on a non-finite
/// generator loss.
TranslatorNets train_translator(const TranslatorConfig& cfg, const std::vector<Sample>& source,
                                const std::vector<Sample>& target, const SegNet<float>& frozen_segmenter,
                                CurveLog* curves = nullptr);

/// Deterministic no-grad translation, clipped to [0,1].
Tensor<float> translate(const Generator<float>& generator, const Tensor<float>& images,
                        const std::vector<int>& conditions);

/// Fraction of translated images whose condition head picks the injected
/// condition, per condition.
std::vector<double> condition_accuracy(const TranslatorNets& nets, const std::vector<Sample>& source,
                                       int batch = 16);

/// Mean absolute per-pixel difference between translations of the same
/// images under two conditions.
double condition_contrast(const Generator<float>& generator, const std::vector<Sample>& source,
                          int condition_a, int condition_b, int batch = 16);

/// Source image i rendered in condition (i mod K), with its source label.
std::vector<Sample> stylize(const Generator<float>& generator, const std::vector<Sample>& source,
                            const std::vector<std::string>& condition_names, int batch = 16);

}  // namespace condadapt
