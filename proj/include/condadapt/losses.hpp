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

// Shared loss building blocks. Probabilities are logged with a floor of
// kProbFloor; discriminator scores are handled as logits so log D and
// log(1 - D) are computed without squashing first.

#include "condadapt/ops.hpp"

#include <vector>

namespace condadapt {

inline constexpr double kProbFloor = 1e-7;

/// Mean over labeled pixels of -w * log p(label). `probs` is [N,L,H,W];
/// `labels` [N,1,H,W] with 0 = ignore; `weights` (optional) [N,1,H,W].
/// The mean divides by the labeled-pixel count, so weights below one shrink
/// the loss. Returns 0 when nothing is labeled.
template <typename S>
Var<S> masked_nll(const Var<S>& probs, const LabelMap& labels, const Tensor<S>* weights = nullptr);

/// Mean of log(sigmoid(logits)) (toward_real) or log(1 - sigmoid(logits)).
template <typename S>
Var<S> mean_log_score(const Var<S>& logits, bool toward_real);

/// Mean over mask > 0 of log(score), score already in (0,1); 0 for an empty mask.
template <typename S>
Var<S> masked_mean_log(const Var<S>& scores, const Tensor<S>& mask);

/// Zeroes every sample of a [N,1,H,W] label map whose entry in `keep` is false.
LabelMap mask_samples(const LabelMap& labels, const std::vector<bool>& keep);

/// Number of nonzero labels.
std::size_t labeled_count(const LabelMap& labels);

}  // namespace condadapt
