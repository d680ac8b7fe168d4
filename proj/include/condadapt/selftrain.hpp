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

// Stage-two self-training: pseudo-labels from the frozen stage-one model,
// discriminator-confidence weighting, the hard-region adversarial loss, and
// teacher-student distillation into a single-head network.

#include "condadapt/adversarial.hpp"

#include <functional>
#include <string>
#include <vector>

namespace condadapt {

/// How target pseudo-labels are formed from a teacher bundle.
/// apla: fused p(x); ca: p^{CA} alone; maxv: renormalized elementwise max
/// over every head; meanv: uniform mean over every head.
enum class PseudoLabelMode { apla, ca, maxv, meanv };

std::string to_string(PseudoLabelMode m);
PseudoLabelMode pseudo_label_mode_from_string(const std::string& s);

template <typename S>
struct PseudoLabelPack {
  Tensor<S> fused_probs;  // [B,L,h,w], prediction resolution
  LabelMap labels;        // [B,1,H,W], 0 = no pseudo-label
  Tensor<S> ambivalence;  // [B,1,h,w]; empty until attach_ambivalence()
  Tensor<S> hard_mask;    // [B,1,H,W], 1 where labels == 0

  std::size_t labeled() const;
};

/// Per pixel: argmax class if its probability is strictly above lambda_p,
/// else 0. Ties go to the lowest class. Throws for lambda_p outside [0,1).
template <typename S>
LabelMap threshold_labels(const Tensor<S>& probs, double lambda_p);

/// The teacher's probability map for `mode` at prediction resolution.
/// Networks without a CA head fall back to the mean vote for apla and ca.
template <typename S>
Tensor<S> pseudo_label_probs(const PredictionBundle<S>& bundle, PseudoLabelMode mode);

/// Pseudo-labels at label resolution (height x width): the mode's map is
/// upsampled and renormalized, then thresholded.
template <typename S>
PseudoLabelPack<S> assign_pseudolabels(const PredictionBundle<S>& bundle, double lambda_p, int height, int width,
                                       PseudoLabelMode mode = PseudoLabelMode::apla);

/// Labels from one of the voting baselines (maxv, meanv) or p^{CA} (ca).
template <typename S>
LabelMap baseline_labels(const PredictionBundle<S>& bundle, PseudoLabelMode mode, double lambda_p, int height,
                         int width);

/// d(x): sigmoid of the discriminator grid, bilinearly resized to the
/// spatial size of `probs`. Returns [B,1,h,w] in (0,1).
template <typename S>
Tensor<S> ambivalence_map(const Tensor<S>& probs, const PatchDiscriminator<S>& discriminator);

/// Fills pack.ambivalence from the fused map.
template <typename S>
void attach_ambivalence(PseudoLabelPack<S>& pack, const PatchDiscriminator<S>& discriminator);

/// Mean CE of `probs` (upsampled to label resolution) over pseudo-labeled
/// pixels. With normalize = false the sum is returned instead.
template <typename S>
Var<S> plain_ce(const Var<S>& probs, const LabelMap& pseudo, bool normalize = true);

/// As plain_ce with each pixel's term scaled by d. `ambivalence` may be at
/// prediction or label resolution; it is resized to the labels.
template <typename S>
Var<S> weighted_ce(const Var<S>& probs, const LabelMap& pseudo, const Tensor<S>& ambivalence,
                   bool normalize = true);

/// -mean over unlabeled pixels of log score, with `scores` a map in (0,1)
/// at any resolution, resized to the labels. 0 when every pixel is labeled.
template <typename S>
Var<S> hard_region_adv(const Var<S>& scores, const LabelMap& pseudo, bool normalize = true);

/// hard_region_adv with scores = sigmoid(D(probs)).
template <typename S>
Var<S> hard_region_adv(const Var<S>& probs, const LabelMap& pseudo, const PatchDiscriminator<S>& discriminator,
                       bool normalize = true);

enum class TargetLoss { weighted, plain };
std::string to_string(TargetLoss t);
TargetLoss target_loss_from_string(const std::string& s);

struct Stage2Config {
  OptimSettings optim{6, 6, 0.01};
  double lambda_p = 0.6;
  PseudoLabelMode pseudo_labels = PseudoLabelMode::apla;
  TargetLoss target_loss = TargetLoss::weighted;
  bool hard_adv = true;
  bool source_all_heads = true;
  bool normalize = true;
  double lambda_adv = kDefaultLambdaAdv;
  double lr_discriminator = 1e-4;
  std::uint64_t seed = 0;
  std::function<void(int, const SegNet<float>&)> on_epoch;
};

/// Trains M1, initialized from `teacher`, on the stylized source loss plus
/// the target pseudo-label loss and (optionally) the hard-region
/// adversarial loss. Pseudo-labels and d come from the frozen teacher and a
/// frozen copy of the bank's global discriminator; a second copy keeps
/// playing the adversarial game. Neither argument is modified.
SegNet<float> stage2_train(const Stage2Config& cfg, const SegNet<float>& teacher,
                           const DiscriminatorBank<float>& bank, const std::vector<Sample>& stylized_source,
                           const std::vector<Sample>& target, CurveLog* curves = nullptr);

struct DistillConfig {
  OptimSettings optim{6, 6, 0.01};
  double lambda_p = 0.9;
  std::uint64_t seed = 0;
  std::function<void(int, const SegNet<float>&)> on_epoch;
};

/// Single-head student whose encoder starts from the teacher's, trained on
/// the stylized source CE plus plain CE against the teacher's attentive
/// pseudo-labels at cfg.lambda_p.
SegNet<float> distill_student(const DistillConfig& cfg, const SegNet<float>& teacher,
                              const std::vector<Sample>& stylized_source, const std::vector<Sample>& target,
                              CurveLog* curves = nullptr);

}  // namespace condadapt
