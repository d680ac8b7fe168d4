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
#include "condadapt/losses.hpp"

#include <stdexcept>

namespace condadapt {

template <typename S>
Var<S> masked_nll(const Var<S>& probs, const LabelMap& labels, const Tensor<S>* weights) {
  const Shape ps = probs.shape(), ls = labels.shape();
  if (ls.n != ps.n || ls.c != 1 || ls.h != ps.h || ls.w != ps.w)
    throw std::invalid_argument("masked_nll: labels " + ls.str() + " do not match " + ps.str());
  if (weights && !(weights->shape() == ls))
    throw std::invalid_argument("masked_nll: weights " + weights->shape().str() + " vs labels " +
                                ls.str());
  const std::size_t count = labeled_count(labels);
  Tensor<S> coef(ls);
  if (count > 0) {
    const S inv = S(-1) / static_cast<S>(count);
    for (std::size_t i = 0; i < labels.size(); ++i)
      coef[i] = labels[i] > 0 ? inv * (weights ? (*weights)[i] : S(1)) : S(0);
  }
  // Unlabeled pixels pick 0, which the floor turns into a finite log with zero weight.
  return weighted_sum(log_clamped(pick_labels(probs, labels), static_cast<S>(kProbFloor)), coef);
}

template <typename S>
Var<S> mean_log_score(const Var<S>& logits, bool toward_real) {
  return mean(log_sigmoid(toward_real ? logits : scale(logits, S(-1))));
}

template <typename S>
Var<S> masked_mean_log(const Var<S>& scores, const Tensor<S>& mask) {
  if (!(mask.shape() == scores.shape()))
    throw std::invalid_argument("masked_mean_log: mask " + mask.shape().str() + " vs " +
                                scores.shape().str());
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) count += mask[i] > S(0);
  Tensor<S> coef(mask.shape());
  if (count > 0)
    for (std::size_t i = 0; i < mask.size(); ++i)
      coef[i] = mask[i] > S(0) ? S(1) / static_cast<S>(count) : S(0);
  return weighted_sum(log_clamped(scores, static_cast<S>(kProbFloor)), coef);
}

LabelMap mask_samples(const LabelMap& labels, const std::vector<bool>& keep) {
  const Shape s = labels.shape();
  if (static_cast<int>(keep.size()) != s.n) throw std::invalid_argument("mask_samples: size mismatch");
  LabelMap out = labels;
  const auto per = static_cast<Eigen::Index>(s.c) * static_cast<Eigen::Index>(s.plane());
  for (int n = 0; n < s.n; ++n)
    if (!keep[static_cast<std::size_t>(n)]) out.array().segment(n * per, per).setZero();
  return out;
}

std::size_t labeled_count(const LabelMap& labels) {
  return static_cast<std::size_t>((labels.array() > 0).count());
}

template Var<float> masked_nll(const Var<float>&, const LabelMap&, const Tensor<float>*);
template Var<double> masked_nll(const Var<double>&, const LabelMap&, const Tensor<double>*);
template Var<float> mean_log_score(const Var<float>&, bool);
template Var<double> mean_log_score(const Var<double>&, bool);
template Var<float> masked_mean_log(const Var<float>&, const Tensor<float>&);
template Var<double> masked_mean_log(const Var<double>&, const Tensor<double>&);

}  // namespace condadapt
