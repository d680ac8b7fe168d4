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
#include "condadapt/nn.hpp"

#include "condadapt/random.hpp"

#include <cmath>
#include <stdexcept>

namespace condadapt {

template <typename S>
void Module<S>::load_state(const StateDict<S>& state, const std::string& prefix, bool partial) {
  for (auto& p : named_parameters(prefix)) {
    auto it = state.find(p.name);
    if (it == state.end()) {
      if (partial) continue;
      throw std::runtime_error("missing parameter '" + p.name + "' in state");
    }
    if (!(it->second.shape() == p.var.shape()))
      throw std::runtime_error("parameter '" + p.name + "' has shape " + it->second.shape().str() +
                               ", expected " + p.var.shape().str());
    Var<S> v = p.var;
    v.mutable_value() = it->second;
  }
}

template <typename S>
Conv2d<S>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, Rng& rng,
                  double gain)
    : stride_(stride), pad_(pad) {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0)
    throw std::invalid_argument("Conv2d: non-positive geometry");
  Tensor<S> w(Shape{out_channels, in_channels, kernel, kernel});
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  const double sd = gain / std::sqrt(fan_in);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<S>(sd * standard_normal(rng));
  weight = parameter(std::move(w));
  bias = parameter(Tensor<S>(Shape{out_channels, 1, 1, 1}));
}

template class Module<float>;
template class Module<double>;
template class Conv2d<float>;
template class Conv2d<double>;

}  // namespace condadapt
