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

#include <cmath>
#include <stdexcept>
#include <vector>

namespace condadapt {

/// lr(t) = base * (1 - t/total)^power, clamped at 0 past the end.
inline double poly_lr(double base, long step, long total, double power = 0.9) {
  if (total <= 0) throw std::invalid_argument("poly_lr: total steps must be positive");
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total);
  return frac <= 0.0 ? 0.0 : base * std::pow(frac, power);
}

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
template <typename S>
class Sgd {
 public:
  Sgd(std::vector<Var<S>> params, double lr, double momentum = 0.9, double weight_decay = 5e-4)
      : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& p : params_) velocity_.push_back(Tensor<S>::zeros(p.shape()));
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      auto& v = velocity_[i].array();
      v = static_cast<S>(momentum_) * v + p.grad().array() +
          static_cast<S>(weight_decay_) * p.value().array();
      p.mutable_value().array() -= static_cast<S>(lr_) * v;
    }
  }

 private:
  std::vector<Var<S>> params_;
  std::vector<Tensor<S>> velocity_;
  double lr_;
  double momentum_;
  double weight_decay_;
};

template <typename S>
class Adam {
 public:
  Adam(std::vector<Var<S>> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
      m_.push_back(Tensor<S>::zeros(p.shape()));
      v_.push_back(Tensor<S>::zeros(p.shape()));
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const S step_size = static_cast<S>(lr_ * std::sqrt(c2) / c1);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.has_grad()) continue;
      const auto& g = p.grad().array();
      auto& m = m_[i].array();
      auto& v = v_[i].array();
      m = static_cast<S>(beta1_) * m + static_cast<S>(1.0 - beta1_) * g;
      v = static_cast<S>(beta2_) * v + static_cast<S>(1.0 - beta2_) * g.square();
      p.mutable_value().array() -= step_size * m / (v.sqrt() + static_cast<S>(eps_));
    }
  }

 private:
  std::vector<Var<S>> params_;
  std::vector<Tensor<S>> m_;
  std::vector<Tensor<S>> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

}  // namespace condadapt
