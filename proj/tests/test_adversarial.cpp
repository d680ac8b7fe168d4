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

#include "condadapt/adversarial.hpp"
#include "condadapt/checkpoint.hpp"
#include "condadapt/losses.hpp"
#include "condadapt/random.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace condadapt;
using condadapt::testing::grad_check;
using condadapt::testing::random_tensor;

namespace {

constexpr int kClasses = 4;

struct Maps {
  std::vector<Tensor<double>> heads;
  Tensor<double> ca;
};

Maps random_maps(int B, int K, int h, std::mt19937_64& rng, double sharpness = 3.0) {
  Maps m;
  for (int i = 0; i < K; ++i) m.heads.push_back(oracle::simplex({B, kClasses, h, h}, rng, sharpness));
  m.ca = oracle::simplex({B, kClasses, h, h}, rng, sharpness);
  return m;
}

PredictionBundle<double> bundle_of(const Maps& m, bool with_ca = true) {
  PredictionBundle<double> b;
  for (const auto& t : m.heads) b.probs.push_back(constant(t));
  if (with_ca) b.ca_probs = constant(m.ca);
  return b;
}

PredictionBundle<double> parameter_bundle(const Maps& m) {
  PredictionBundle<double> b;
  for (const auto& t : m.heads) b.probs.push_back(parameter(t));
  b.ca_probs = parameter(m.ca);
  return b;
}

Tensor<double> logits_of(const PatchDiscriminator<double>& d, const Tensor<double>& probs) {
  NoGradGuard guard;
  return d(constant(probs)).value();
}

// Zero final layers so every discriminator outputs logit 0.
void silence(DiscriminatorBank<double>& bank) {
  auto state = bank.state();
  for (auto& [name, t] : state)
    if (name.find(".out.") != std::string::npos) t.array() = 0.0;
  bank.load_state(state);
}

Stage1Config tiny_stage1(double lambda_adv) {
  Stage1Config cfg;
  cfg.net.feature_dim = 4;
  cfg.net.width = 4;
  cfg.optim = {1, 3, 0.01};
  cfg.lambda_adv = lambda_adv;
  cfg.discriminator_width = 4;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("discriminator losses at zero logits") {
  Rng init(1);
  DiscriminatorBank<double> bank(kClasses, 3, 4, init);
  silence(bank);
  std::mt19937_64 rng(1);
  auto src = bundle_of(random_maps(3, 3, 8, rng));
  auto tgt = bundle_of(random_maps(3, 3, 8, rng));
  const std::vector<int> conds{0, 1, 2};
  auto d = discriminator_losses(bank, src, conds, tgt, conds, AdversarialMode::csat);
  CHECK(d.global == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
  CHECK(d.total == doctest::Approx(-8 * std::log(0.5)).epsilon(1e-12));
  CHECK(csat_adv_loss(tgt, conds, bank).value().item() == doctest::Approx(-2 * std::log(0.5)).epsilon(1e-12));
  CHECK(dat_loss(tgt, bank).value().item() == doctest::Approx(-4 * std::log(0.5)).epsilon(1e-12));
  // A perfectly fooled discriminator contributes nothing.
  CHECK(oracle::sample_log_score(Tensor<double>(Shape{1, 1, 2, 2}, 40.0), 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("condition-selective adversarial loss matches the masked scalar reference") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 2 + int(rng() % 3);
    const int B = 1 + int(rng() % 6);
    Rng init(trial);
    DiscriminatorBank<double> bank(kClasses, K, 4, init);
    auto maps = random_maps(B, K, 8, rng);
    std::vector<int> conds;
    for (int n = 0; n < B; ++n) conds.push_back(int(rng() % std::uint64_t(K)));
    std::vector<Tensor<double>> head_logits;
    for (int i = 0; i < K; ++i) head_logits.push_back(logits_of(bank.condition(i), maps.heads[std::size_t(i)]));
    const auto global_logits = logits_of(bank.global(), maps.ca);

    const double csat = csat_adv_loss(bundle_of(maps), conds, bank).value().item();
    const double ref = oracle::adversarial(global_logits, head_logits,
                                           [&](int n, int i) { return conds[std::size_t(n)] == i; });
    CHECK(csat == doctest::Approx(ref).epsilon(1e-9));

    const double dat = dat_loss(bundle_of(maps), bank).value().item();
    CHECK(dat == doctest::Approx(oracle::adversarial(global_logits, head_logits, [](int, int) { return true; }))
                     .epsilon(1e-9));
  }
}

TEST_CASE("single-condition banks make both adversarial losses agree") {
  std::mt19937_64 rng(3);
  Rng init(3);
  DiscriminatorBank<double> bank(kClasses, 1, 4, init);
  auto maps = random_maps(4, 1, 8, rng);
  const double a = csat_adv_loss(bundle_of(maps), {0, 0, 0, 0}, bank).value().item();
  const double b = dat_loss(bundle_of(maps), bank).value().item();
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("source loss is 2 ln L for uniform maps") {
  const int L = 6;
  Maps m;
  for (int i = 0; i < 3; ++i) m.heads.push_back(Tensor<double>(Shape{2, L, 4, 4}, 1.0 / L));
  m.ca = Tensor<double>(Shape{2, L, 4, 4}, 1.0 / L);
  LabelMap labels(Shape{2, 1, 4, 4}, 3);
  labels(0, 0, 0, 0) = 0;
  CHECK(source_ce_loss(bundle_of(m), labels, {0, 2}).value().item() ==
        doctest::Approx(2 * std::log(double(L))).epsilon(1e-12));
  CHECK(source_ce_loss(bundle_of(m), labels, {0, 2}, true).value().item() ==
        doctest::Approx(std::log(double(L))).epsilon(1e-12));
}

TEST_CASE("source loss matches the scalar reference") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const int B = 1 + int(rng() % 5);
    auto maps = random_maps(B, 3, 6, rng);
    auto labels = oracle::labels({B, 1, 6, 6}, kClasses, rng, 0.3);
    if (labeled_count(labels) == 0) continue;
    std::vector<int> conds;
    for (int n = 0; n < B; ++n) conds.push_back(int(rng() % 3));
    CHECK(source_ce_loss(bundle_of(maps), labels, conds).value().item() ==
          doctest::Approx(oracle::source_ce(maps.ca, maps.heads, labels, conds)).epsilon(1e-9));
  }
}

TEST_CASE("each condition branch receives gradient only from its own samples") {
  std::mt19937_64 rng(5);
  Rng init(5);
  const int K = 3;
  DiscriminatorBank<double> bank(kClasses, K, 4, init);
  bank.set_trainable(false);
  const std::vector<int> conds{0, 2, 2, 1, 0};
  auto b = parameter_bundle(random_maps(5, K, 8, rng));
  csat_adv_loss(b, conds, bank).backward();
  for (int i = 0; i < K; ++i) {
    const auto& g = b.probs[std::size_t(i)].grad();
    for (int n = 0; n < 5; ++n) {
      double norm = 0;
      for (int c = 0; c < kClasses; ++c) norm += g.plane(n, c).array().abs().sum();
      INFO("head " << i << " sample " << n);
      if (conds[std::size_t(n)] == i)
        CHECK(norm > 0.0);
      else
        CHECK(norm == 0.0);
    }
  }
  CHECK(b.ca_probs.grad().array().abs().sum() > 0.0);
}

TEST_CASE("discriminator gradients match finite differences") {
  std::mt19937_64 rng(6);
  Rng init(6);
  DiscriminatorBank<double> bank(kClasses, 2, 3, init);
  auto src = bundle_of(random_maps(3, 2, 8, rng));
  auto tgt = bundle_of(random_maps(3, 2, 8, rng));
  auto loss = [&] {
    Var<double> out;
    discriminator_losses(bank, src, {0, 1, 1}, tgt, {1, 0, 0}, AdversarialMode::csat, &out);
    return out;
  };
  auto r = grad_check(loss, bank.parameters(), 300, 3, 1e-3);
  INFO("worst " << r.worst);
  CHECK(r.pass_fraction() >= 0.97);
}

TEST_CASE("discriminator updates never touch the segmentation side and vice versa") {
  std::mt19937_64 rng(7);
  Rng init(7);
  DiscriminatorBank<double> bank(kClasses, 3, 4, init);
  auto src = parameter_bundle(random_maps(3, 3, 8, rng));
  auto tgt = parameter_bundle(random_maps(3, 3, 8, rng));
  Var<double> d_loss;
  discriminator_losses(bank, src, {0, 1, 2}, tgt, {0, 1, 2}, AdversarialMode::csat, &d_loss);
  d_loss.backward();
  for (const auto& p : src.probs) CHECK_FALSE(p.has_grad());
  CHECK_FALSE(tgt.ca_probs.has_grad());
  double bank_grad = 0;
  for (const auto& p : bank.parameters()) bank_grad += p.has_grad() ? p.grad().array().abs().sum() : 0.0;
  CHECK(bank_grad > 0.0);

  bank.zero_grad();
  bank.set_trainable(false);
  csat_adv_loss(tgt, {0, 1, 2}, bank).backward();
  for (const auto& p : bank.parameters()) CHECK_FALSE(p.has_grad());
  CHECK(tgt.ca_probs.has_grad());
}

TEST_CASE("discriminators separate fixed source and target maps") {
  std::mt19937_64 rng(8);
  Rng init(8);
  DiscriminatorBank<float> bank(kClasses, 3, 8, init);
  // Confident source maps against flat target maps.
  auto src_maps = random_maps(3, 3, 8, rng, 8.0);
  auto tgt_maps = random_maps(3, 3, 8, rng, 0.2);
  auto to_float = [](const Maps& m) {
    PredictionBundle<float> b;
    for (const auto& t : m.heads) b.probs.push_back(constant(t.cast<float>()));
    b.ca_probs = constant(m.ca.cast<float>());
    return b;
  };
  auto src = to_float(src_maps), tgt = to_float(tgt_maps);
  const std::vector<int> conds{0, 1, 2};
  Adam<float> opt(bank.parameters(), 1e-3, 0.9, 0.99);
  DiscriminatorLosses last;
  int steps = 0;
  for (; steps < 200; ++steps) {
    last = discriminator_step(bank, opt, src, conds, tgt, conds, AdversarialMode::csat);
    if (last.global < 0.05) break;
  }
  INFO("steps " << steps << " global " << last.global);
  CHECK(last.global < 0.05);
  auto swapped = discriminator_losses(bank, tgt, conds, src, conds, AdversarialMode::csat);
  CHECK(swapped.global >= 5.0);
}

TEST_CASE("without the adversarial weight the discriminators stay idle") {
  auto src = condadapt::testing::tiny_stylized(6);
  auto tgt = condadapt::testing::tiny_samples(6, Domain::target);
  CurveLog curves;
  auto r = stage1_train(tiny_stage1(0.0), src, tgt, &curves);
  for (double v : curves.values("adv")) CHECK(v == 0.0);
  for (double v : curves.values("d_total")) CHECK(v == 0.0);
  Rng drng(derive_seed(3, 0xD15));
  DiscriminatorBank<float> fresh(6, 3, 4, drng);
  CHECK(checksum(r.bank) == checksum(fresh));
}

TEST_CASE("stage-one training is deterministic under a seed") {
  auto src = condadapt::testing::tiny_stylized(6);
  auto tgt = condadapt::testing::tiny_samples(6, Domain::target);
  CurveLog ca, cb;
  auto a = stage1_train(tiny_stage1(0.01), src, tgt, &ca);
  auto b = stage1_train(tiny_stage1(0.01), src, tgt, &cb);
  CHECK(checksum(a.net) == checksum(b.net));
  CHECK(checksum(a.bank) == checksum(b.bank));
  CHECK(ca.values("adv") == cb.values("adv"));
  for (double v : ca.values("adv")) CHECK(v > 0.0);
}

TEST_CASE("bad condition codes are rejected") {
  std::mt19937_64 rng(9);
  Rng init(9);
  DiscriminatorBank<double> bank(kClasses, 3, 4, init);
  auto b = bundle_of(random_maps(2, 3, 8, rng));
  CHECK_THROWS_AS(csat_adv_loss(b, {0, 3}, bank), std::invalid_argument);
  CHECK_THROWS_AS(csat_adv_loss(b, {0}, bank), std::invalid_argument);
  CHECK_THROWS_AS(adversarial_mode_from_string("gan"), std::invalid_argument);
}
