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

// Output-space adversarial training of the segmentation network: one patch
// discriminator per condition plus one on the global prediction, the
// supervised loss on stylized source images, and the stage-one loop.
// Discriminators output the probability that a prediction map comes from
// the (stylized) source domain: source = 1, target = 0.

#include "condadapt/curves.hpp"
#include "condadapt/optim.hpp"
#include "condadapt/segnet.hpp"
#include "condadapt/toyworld.hpp"

#include <functional>
#include <string>
#include <vector>

namespace condadapt {

inline constexpr double kDefaultLambdaAdv = 0.001;

/// Patch CNN on [B,L,h,w] probability maps; emits a logit grid at half
/// the input resolution.
template <typename S>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(int classes, int width, Rng& rng);
  Var<S> operator()(const Var<S>& probs) const;
  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const;

 private:
  Conv2d<S> c1_, c2_, c3_, out_;
};

/// D^{C_1..C_K} followed by D^{CA}.
template <typename S>
class DiscriminatorBank : public Module<S> {
 public:
  DiscriminatorBank(int classes, int conditions, int width, Rng& rng);

  int classes() const { return classes_; }
  int conditions() const { return static_cast<int>(per_condition_.size()); }
  const PatchDiscriminator<S>& condition(int i) const { return per_condition_.at(static_cast<std::size_t>(i)); }
  const PatchDiscriminator<S>& global() const { return global_; }

  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const override;
  DiscriminatorBank clone() const;

 private:
  int classes_, width_;
  std::vector<PatchDiscriminator<S>> per_condition_;
  PatchDiscriminator<S> global_;
};

enum class AdversarialMode { csat, dat, none };
AdversarialMode adversarial_mode_from_string(const std::string& s);

/// The map D^{CA} judges: p^{CA} for CAM networks, the mean vote otherwise.
template <typename S>
Var<S> global_probs(const PredictionBundle<S>& bundle);

/// Segmentation-side adversarial loss on target predictions: per sample,
/// -mean log D^{CA}(p^{CA}) - mean log D^{C_i}(p^{C_i}) for the sample's
/// condition i only, averaged over the batch. Condition terms need one
/// head per condition and are skipped for single-head networks.
template <typename S>
Var<S> csat_adv_loss(const PredictionBundle<S>& target, const std::vector<int>& conditions,
                     const DiscriminatorBank<S>& bank);

/// As csat_adv_loss but every D^{C_i} judges every sample:
/// -mean log D^{CA} - sum_i mean log D^{C_i}.
template <typename S>
Var<S> dat_loss(const PredictionBundle<S>& target, const DiscriminatorBank<S>& bank);

/// Supervised loss on stylized source predictions: mean CE of p^{CA} (or
/// the single/mean-vote map) plus mean CE of the head matching each
/// sample's condition. Probabilities are upsampled to label resolution.
/// With `global_only` the per-condition term is dropped.
template <typename S>
Var<S> source_ce_loss(const PredictionBundle<S>& source, const LabelMap& labels,
                      const std::vector<int>& conditions, bool global_only = false);

struct DiscriminatorLosses {
  double global = 0.0;
  std::vector<double> per_condition;  // NaN where the bucket was empty
  double total = 0.0;
};

/// BCE for every discriminator on detached maps: source -> 1, target -> 0.
/// Under csat, D^{C_i} sees only condition-i samples of both domains and is
/// skipped (NaN entry) when either bucket is empty; under dat it sees all.
/// Returns the loss Var (for gradient checks) through `loss_out` if given.
template <typename S>
DiscriminatorLosses discriminator_losses(const DiscriminatorBank<S>& bank, const PredictionBundle<S>& source,
                                         const std::vector<int>& source_conditions,
                                         const PredictionBundle<S>& target,
                                         const std::vector<int>& target_conditions, AdversarialMode mode,
                                         Var<S>* loss_out = nullptr);

/// discriminator_losses followed by one optimizer step.
DiscriminatorLosses discriminator_step(DiscriminatorBank<float>& bank, Adam<float>& opt,
                                       const PredictionBundle<float>& source,
                                       const std::vector<int>& source_conditions,
                                       const PredictionBundle<float>& target,
                                       const std::vector<int>& target_conditions, AdversarialMode mode);

/// SGD with momentum, weight decay and poly decay.
struct OptimSettings {
  int epochs = 8;
  int batch = 6;
  double lr = 0.0025;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.9;
};

struct SourceOnlyConfig {
  SegNetConfig net{HeadVariant::mix};
  OptimSettings optim{12, 8, 0.02};
  std::uint64_t seed = 0;
};

/// Supervised training on labeled source images (also the frozen
/// segmenter used by the translator).
SegNet<float> train_source_only(const SourceOnlyConfig& cfg, const std::vector<Sample>& source,
                                CurveLog* curves = nullptr);

struct Stage1Config {
  SegNetConfig net;
  OptimSettings optim{8, 6, 0.02};
  AdversarialMode adversarial = AdversarialMode::csat;
  double lambda_adv = kDefaultLambdaAdv;
  double lr_discriminator = 1e-4;
  int discriminator_width = 32;
  std::uint64_t seed = 0;
  /// Called after every epoch, e.g. to keep a last-good checkpoint.
  std::function<void(int, const SegNet<float>&)> on_epoch;
};

struct Stage1Result {
  SegNet<float> net;
  DiscriminatorBank<float> bank;
};

/// Alternates segmentation steps (source CE + lambda_adv * adversarial loss
/// on target) with discriminator steps. Batches hold every condition in
/// both domains. Throws on a non-finite loss.
Stage1Result stage1_train(const Stage1Config& cfg, const std::vector<Sample>& stylized_source,
                          const std::vector<Sample>& target, CurveLog* curves = nullptr);

}  // namespace condadapt
