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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "condadapt/optim.hpp"
#include "gradcheck.hpp"

using namespace condadapt;
using condadapt::testing::grad_check;
using condadapt::testing::random_tensor;

namespace {

void expect_gradients(const std::function<Var<double>()>& fn, std::vector<Var<double>> params) {
  auto r = grad_check(fn, std::move(params), 0, 1);
  INFO("worst relative error " << r.worst);
  CHECK(r.passed == r.checked);
}

}  // namespace

TEST_CASE("elementwise ops match finite differences") {
  std::mt19937_64 rng(7);
  auto a = parameter(random_tensor({2, 3, 4, 5}, rng));
  auto b = parameter(random_tensor({2, 3, 4, 5}, rng, 0.2, 1.0));
  auto w = random_tensor({2, 3, 4, 5}, rng);
  expect_gradients([&] { return weighted_sum(mul(sigmoid(a), b), w); }, {a, b});
  expect_gradients([&] { return weighted_sum(log_sigmoid(sub(a, b)), w); }, {a, b});
  expect_gradients([&] { return weighted_sum(leaky_relu(add(a, b), 0.2), w); }, {a, b});
  expect_gradients([&] { return weighted_sum(log_clamped(b, 1e-7), w); }, {b});
  expect_gradients([&] { return mean(scale(add_scalar(a, 0.5), 3.0)); }, {a});
}

TEST_CASE("channel ops match finite differences") {
  std::mt19937_64 rng(8);
  auto a = parameter(random_tensor({2, 4, 3, 3}, rng));
  auto b = parameter(random_tensor({2, 2, 3, 3}, rng));
  auto wts = parameter(random_tensor({2, 1, 3, 3}, rng));
  auto w6 = random_tensor({2, 6, 3, 3}, rng);
  auto w4 = random_tensor({2, 4, 3, 3}, rng);
  auto w1 = random_tensor({2, 1, 3, 3}, rng);
  expect_gradients([&] { return weighted_sum(concat_channels<double>({a, b}), w6); }, {a, b});
  expect_gradients([&] { return weighted_sum(slice_channels(a, 1, 1), w1); }, {a});
  expect_gradients([&] { return weighted_sum(softmax_channels(a), w4); }, {a});
  expect_gradients([&] { return weighted_sum(log_softmax_channels(a), w4); }, {a});
  expect_gradients([&] { return weighted_sum(mul_channel_broadcast(wts, a), w4); }, {wts, a});
  expect_gradients([&] { return mean(global_avg_pool(mul(a, a))); }, {a});
}

TEST_CASE("softmax rows are simplices") {
  std::mt19937_64 rng(9);
  auto a = constant(random_tensor({3, 5, 4, 4}, rng, -20, 20));
  auto p = softmax_channels(a).value();
  auto lp = log_softmax_channels(a).value();
  for (int n = 0; n < 3; ++n)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) {
        double total = 0;
        for (int c = 0; c < 5; ++c) {
          total += p(n, c, y, x);
          CHECK(std::exp(lp(n, c, y, x)) == doctest::Approx(p(n, c, y, x)).epsilon(1e-12));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("conv2d matches finite differences and a direct loop") {
  std::mt19937_64 rng(10);
  for (auto [stride, pad, k] : {std::tuple{1, 1, 3}, std::tuple{2, 1, 3}, std::tuple{1, 0, 1}}) {
    auto x = parameter(random_tensor({2, 3, 7, 6}, rng));
    auto w = parameter(random_tensor({4, 3, k, k}, rng));
    auto b = parameter(random_tensor({4, 1, 1, 1}, rng));
    auto y = conv2d(x, w, b, stride, pad);
    const Shape os = y.shape();
    for (int n = 0; n < os.n; ++n)
      for (int co = 0; co < os.c; ++co)
        for (int oy = 0; oy < os.h; ++oy)
          for (int ox = 0; ox < os.w; ++ox) {
            double acc = b.value()[co];
            for (int ci = 0; ci < 3; ++ci)
              for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                  const int iy = oy * stride + ky - pad, ix = ox * stride + kx - pad;
                  if (iy < 0 || iy >= 7 || ix < 0 || ix >= 6) continue;
                  acc += w.value()(co, ci, ky, kx) * x.value()(n, ci, iy, ix);
                }
            CHECK(y.value()(n, co, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
          }
    auto wy = random_tensor(os, rng);
    expect_gradients([&] { return weighted_sum(conv2d(x, w, b, stride, pad), wy); }, {x, w, b});
  }
}

TEST_CASE("resampling ops") {
  std::mt19937_64 rng(11);
  auto a = parameter(random_tensor({1, 2, 4, 4}, rng));
  auto w8 = random_tensor({1, 2, 8, 8}, rng);
  auto w16 = random_tensor({1, 2, 16, 12}, rng);
  expect_gradients([&] { return weighted_sum(upsample_nearest(a, 2), w8); }, {a});
  expect_gradients([&] { return weighted_sum(resize_bilinear(a, 16, 12), w16); }, {a});

  // Interpolation rows are convex weights.
  auto m = bilinear_matrix<double>(4, 16);
  for (int r = 0; r < 16; ++r) {
    CHECK(m.row(r).sum() == doctest::Approx(1.0));
    CHECK(m.row(r).minCoeff() >= 0.0);
  }
}

TEST_CASE("pick_labels ignores label zero") {
  Tensor<double> scores({1, 3, 1, 3});
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = double(i);
  LabelMap labels({1, 1, 1, 3});
  labels[0] = 1;
  labels[1] = 0;
  labels[2] = 3;
  auto s = parameter(scores);
  auto picked = pick_labels(s, labels);
  CHECK(picked.value()[0] == 0.0);  // channel 0, x=0
  CHECK(picked.value()[1] == 0.0);  // unlabeled
  CHECK(picked.value()[2] == 8.0);  // channel 2, x=2
  sum(picked).backward();
  CHECK(s.grad()(0, 0, 0, 0) == 1.0);
  CHECK(s.grad()(0, 0, 0, 1) == 0.0);
  CHECK(s.grad()(0, 2, 0, 2) == 1.0);
  LabelMap bad({1, 1, 1, 3}, 4);
  CHECK_THROWS_AS(pick_labels(s, bad), std::out_of_range);
}

TEST_CASE("no-grad guard skips recording and shared inputs accumulate") {
  auto a = parameter(Tensor<double>::scalar(2.0));
  {
    NoGradGuard guard;
    auto y = mul(a, a);
    CHECK_FALSE(y.requires_grad());
  }
  auto y = add(mul(a, a), a);  // dy/da = 2a + 1
  y.backward();
  CHECK(a.grad().item() == doctest::Approx(5.0));
}

TEST_CASE("poly schedule is monotone and ends at zero") {
  double prev = poly_lr(0.0025, 0, 100);
  CHECK(prev == doctest::Approx(0.0025));
  for (int t = 1; t <= 100; ++t) {
    const double lr = poly_lr(0.0025, t, 100);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK(poly_lr(0.0025, 100, 100) == 0.0);
}

TEST_CASE("optimizers decrease a quadratic") {
  auto x = parameter(Tensor<double>({1, 4, 1, 1}, 3.0));
  Sgd<double> sgd({x}, 0.1, 0.9, 0.0);
  Adam<double> adam({x}, 0.05);
  for (int i = 0; i < 200; ++i) {
    sgd.zero_grad();
    mean(mul(x, x)).backward();
    sgd.step();
  }
  CHECK(x.value().array().abs().maxCoeff() < 1e-3);
  x.mutable_value().array() = 3.0;
  for (int i = 0; i < 500; ++i) {
    adam.zero_grad();
    mean(mul(x, x)).backward();
    adam.step();
  }
  CHECK(x.value().array().abs().maxCoeff() < 1e-2);
}
