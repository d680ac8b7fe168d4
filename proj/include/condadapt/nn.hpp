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

#include "condadapt/ops.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace condadapt {

using Rng = std::mt19937_64;

template <typename S>
struct NamedParam {
  std::string name;
  Var<S> var;
};

template <typename S>
using StateDict = std::map<std::string, Tensor<S>>;

/// Owner of named parameters. Concrete networks override collect().
template <typename S>
class Module {
 public:
  virtual ~Module() = default;

  virtual void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const = 0;

  std::vector<NamedParam<S>> named_parameters(const std::string& prefix = "") const {
    std::vector<NamedParam<S>> out;
    collect(prefix, out);
    return out;
  }
  std::vector<Var<S>> parameters() const {
    std::vector<Var<S>> out;
    for (auto& p : named_parameters()) out.push_back(p.var);
    return out;
  }
  std::size_t parameter_count() const {
    std::size_t total = 0;
    for (const auto& p : named_parameters()) total += p.var.value().size();
    return total;
  }

  StateDict<S> state(const std::string& prefix = "") const {
    StateDict<S> out;
    for (const auto& p : named_parameters(prefix)) out.emplace(p.name, p.var.value());
    return out;
  }
  /// Copies matching entries in; every parameter must be present with the
  /// same shape unless `partial` is set.
  void load_state(const StateDict<S>& state, const std::string& prefix = "", bool partial = false);

  void set_trainable(bool on) {
    for (auto& p : named_parameters()) {
      Var<S> v = p.var;
      v.set_requires_grad(on);
    }
  }
  void zero_grad() {
    for (auto& p : named_parameters()) {
      Var<S> v = p.var;
      v.zero_grad();
    }
  }
};

template <typename S>
class Conv2d {
 public:
  Conv2d() = default;
  /// He-normal weights, zero bias.
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng,
         double gain = 1.4142135623730951);

  Var<S> operator()(const Var<S>& x) const { return conv2d(x, weight, bias, stride_, pad_); }
  void collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
  void zero_init() {
    weight.mutable_value().array().setZero();
    bias.mutable_value().array().setZero();
  }

  int in_channels() const { return weight.shape().c; }
  int out_channels() const { return weight.shape().n; }

  Var<S> weight;
  Var<S> bias;

 private:
  int stride_ = 1;
  int pad_ = 0;
};

template <typename S>
StateDict<double> to_double(const StateDict<S>& in) {
  StateDict<double> out;
  for (const auto& [k, v] : in) out.emplace(k, v.template cast<double>());
  return out;
}

template <typename S>
StateDict<S> from_double(const StateDict<double>& in) {
  StateDict<S> out;
  for (const auto& [k, v] : in) out.emplace(k, v.template cast<S>());
  return out;
}

/// Filters entries under `prefix.` and strips it.
template <typename S>
StateDict<S> sub_state(const StateDict<S>& in, const std::string& prefix) {
  StateDict<S> out;
  const std::string p = prefix + ".";
  for (const auto& [k, v] : in)
    if (k.rfind(p, 0) == 0) out.emplace(k.substr(p.size()), v);
  return out;
}

}  // namespace condadapt
