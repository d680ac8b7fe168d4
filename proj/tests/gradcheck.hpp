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

// Central finite differences against the tape, float64 only.

#include "condadapt/nn.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace condadapt::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double worst = 0.0;
  double pass_fraction() const { return checked == 0 ? 1.0 : double(passed) / double(checked); }
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Checks d loss / d params at up to `samples` randomly chosen coordinates
/// (all coordinates when samples == 0).
inline GradCheckResult grad_check(const std::function<Var<double>()>& loss_fn,
                                  std::vector<Var<double>> params, std::size_t samples,
                                  std::uint64_t seed, double tol = 1e-3, double h = 1e-6) {
  for (auto& p : params) p.zero_grad();
  Var<double> loss = loss_fn();
  loss.backward();

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i].value().size(); ++j) coords.emplace_back(i, j);
  if (samples > 0 && samples < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(samples);
  }

  GradCheckResult result;
  for (auto [i, j] : coords) {
    auto& p = params[i];
    const double analytic = p.has_grad() ? p.grad()[j] : 0.0;
    const double orig = p.value()[j];
    double numeric = 0.0;
    {
      NoGradGuard guard;
      p.mutable_value()[j] = orig + h;
      const double up = loss_fn().value().item();
      p.mutable_value()[j] = orig - h;
      const double down = loss_fn().value().item();
      p.mutable_value()[j] = orig;
      numeric = (up - down) / (2 * h);
    }
    const double err = relative_error(analytic, numeric);
    ++result.checked;
    if (err < tol) ++result.passed;
    result.worst = std::max(result.worst, err);
  }
  return result;
}

inline Tensor<double> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<double> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

}  // namespace condadapt::testing
