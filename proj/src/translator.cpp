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
#include "condadapt/translator.hpp"

#include "condadapt/losses.hpp"
#include "condadapt/optim.hpp"
#include "condadapt/random.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <stdexcept>

namespace condadapt {

template <typename S>
Var<S> inject_condition(const Var<S>& features, const std::vector<int>& conditions, int K) {
  const Shape s = features.shape();
  if (static_cast<int>(conditions.size()) != s.n)
    throw std::invalid_argument("inject_condition: " + std::to_string(conditions.size()) +
                                " conditions for batch of " + std::to_string(s.n));
  Tensor<S> code(Shape{s.n, K, s.h, s.w});
  for (int n = 0; n < s.n; ++n) {
    const int c = conditions[static_cast<std::size_t>(n)];
    if (c < 0 || c >= K)
      throw std::invalid_argument("inject_condition: condition " + std::to_string(c) + " outside [0," +
                                  std::to_string(K) + ")");
    code.plane(n, c).setOnes();
  }
  return concat_channels<S>({features, constant(std::move(code))});
}

template <typename S>
Generator<S>::Generator(int conditions, int width, Rng& rng)
    : conditions_(conditions),
      in_(3 + conditions, width, 3, 1, 1, rng),
      down1_(width + conditions, 2 * width, 3, 2, 1, rng),
      down2_(2 * width + conditions, 2 * width, 3, 2, 1, rng),
      res1_(2 * width, 2 * width, 3, 1, 1, rng),
      res2_(2 * width, 2 * width, 3, 1, 1, rng),
      up1_(4 * width, width, 3, 1, 1, rng),
      up2_(2 * width, width, 3, 1, 1, rng),
      out_(width, 3, 3, 1, 1, rng) {
  if (conditions < 1) throw std::invalid_argument("generator needs at least one condition");
  out_.zero_init();
}

template <typename S>
Var<S> Generator<S>::inject(const Var<S>& x, const std::vector<int>& conditions, const std::string& site,
                            InjectionAudit* audit) const {
  Var<S> out = inject_condition(x, conditions, conditions_);
  if (audit) audit->push_back({site, x.shape().c, out.shape().c});
  return out;
}

template <typename S>
Var<S> Generator<S>::operator()(const Var<S>& images, const std::vector<int>& conditions,
                                InjectionAudit* audit) const {
  const Shape s = images.shape();
  if (s.c != 3 || s.h % 4 != 0 || s.w % 4 != 0)
    throw std::invalid_argument("generator expects [B,3,H,W] with H, W divisible by 4, got " + s.str());
  const S slope = S(0.2);
  Var<S> e1 = leaky_relu(in_(inject(images, conditions, "input", audit)), slope);
  Var<S> e2 = leaky_relu(down1_(inject(e1, conditions, "down1", audit)), slope);
  Var<S> e3 = leaky_relu(down2_(inject(e2, conditions, "down2", audit)), slope);
  Var<S> r = leaky_relu(add(e3, res2_(leaky_relu(res1_(e3), slope))), slope);
  Var<S> u1 = leaky_relu(up1_(concat_channels<S>({upsample_nearest(r, 2), e2})), slope);
  Var<S> u2 = leaky_relu(up2_(concat_channels<S>({upsample_nearest(u1, 2), e1})), slope);
  return clamp(add(images, out_(u2)), S(0), S(1));
}

template <typename S>
void Generator<S>::collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  in_.collect(p + "in", out);
  down1_.collect(p + "down1", out);
  down2_.collect(p + "down2", out);
  res1_.collect(p + "res1", out);
  res2_.collect(p + "res2", out);
  up1_.collect(p + "up1", out);
  up2_.collect(p + "up2", out);
  out_.collect(p + "out", out);
}

template <typename S>
StyleDiscriminator<S>::StyleDiscriminator(int conditions, int width, Rng& rng)
    : c1_(3, width, 3, 2, 1, rng),
      c2_(width, 2 * width, 3, 2, 1, rng),
      c3_(2 * width, 4 * width, 3, 2, 1, rng),
      real_(4 * width, 1, 3, 1, 1, rng, 1.0),
      cls_(4 * width, conditions, 1, 1, 0, rng, 1.0) {}

template <typename S>
typename StyleDiscriminator<S>::Output StyleDiscriminator<S>::operator()(const Var<S>& images) const {
  const S slope = S(0.2);
  Var<S> t = leaky_relu(c3_(leaky_relu(c2_(leaky_relu(c1_(images), slope)), slope)), slope);
  return {real_(t), global_avg_pool(cls_(t))};
}

template <typename S>
void StyleDiscriminator<S>::collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  c1_.collect(p + "c1", out);
  c2_.collect(p + "c2", out);
  c3_.collect(p + "c3", out);
  real_.collect(p + "real", out);
  cls_.collect(p + "cls", out);
}

template <typename S>
Var<S> cgan_loss(const Var<S>& real_logits, const Var<S>& fake_logits) {
  return add(mean_log_score(real_logits, true), mean_log_score(fake_logits, false));
}

template <typename S>
Var<S> generator_adv_loss(const Var<S>& fake_logits) {
  return scale(mean_log_score(fake_logits, true), S(-1));
}

template <typename S>
Var<S> condition_nll(const Var<S>& logits, const std::vector<int>& conditions) {
  const Shape s = logits.shape();
  if (s.h != 1 || s.w != 1 || static_cast<int>(conditions.size()) != s.n)
    throw std::invalid_argument("condition_nll: logits " + s.str() + " for " +
                                std::to_string(conditions.size()) + " conditions");
  LabelMap labels(Shape{s.n, 1, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    const int c = conditions[static_cast<std::size_t>(n)];
    if (c < 0 || c >= s.c) throw std::invalid_argument("condition_nll: condition out of range");
    labels[static_cast<std::size_t>(n)] = c + 1;
  }
  Tensor<S> w(labels.shape(), S(-1) / static_cast<S>(s.n));
  return weighted_sum(pick_labels(log_softmax_channels(logits), labels), w);
}

template <typename S>
Var<S> cls_loss(const Var<S>& real_logits, const std::vector<int>& real_conditions,
                const Var<S>& fake_logits, const std::vector<int>& fake_conditions) {
  return add(condition_nll(real_logits, real_conditions), condition_nll(fake_logits, fake_conditions));
}

template <typename S>
Var<S> sc_loss(const Var<S>& seg_probs, const LabelMap& labels) {
  if (labeled_count(labels) == 0) spdlog::warn("semantic consistency loss: no labeled pixels");
  return masked_nll(seg_probs, labels);
}

template <typename S>
Var<S> cgst_objective(const Var<S>& cgan, const Var<S>& cls, const Var<S>& sc, double lambda_sc) {
  return add(add(cgan, cls), scale(sc, static_cast<S>(lambda_sc)));
}

double cgst_objective(double cgan, double cls, double sc, double lambda_sc) {
  return cgan + cls + lambda_sc * sc;
}

TranslatorNets make_translator(const TranslatorConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0x7A5));
  Generator<float> g(cfg.conditions, cfg.generator_width, rng);
  StyleDiscriminator<float> d(cfg.conditions, cfg.discriminator_width, rng);
  return {std::move(g), std::move(d)};
}

TranslatorNets train_translator(const TranslatorConfig& cfg, const std::vector<Sample>& source,
                                const std::vector<Sample>& target, const SegNet<float>& frozen_segmenter,
                                CurveLog* curves) {
  if (source.empty() || target.empty()) throw std::invalid_argument("train_translator: empty dataset");
  const int K = cfg.conditions;
  TranslatorNets nets = make_translator(cfg);
  auto& G = nets.generator;
  auto& D = nets.discriminator;

  // The segmenter only passes gradients through to the generator.
  std::vector<bool> seg_trainable;
  for (const auto& p : frozen_segmenter.parameters()) seg_trainable.push_back(p.requires_grad());
  for (auto p : frozen_segmenter.parameters()) p.set_requires_grad(false);

  Adam<float> opt_g(G.parameters(), cfg.lr_generator, cfg.beta1, 0.999);
  Adam<float> opt_d(D.parameters(), cfg.lr_discriminator, cfg.beta1, 0.999);
  BatchStream stream(source, cfg.batch, derive_seed(cfg.seed, 0x57));
  ConditionBalancedSampler sampler(target, K, derive_seed(cfg.seed, 0x7A));
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& idx : stream.epoch(epoch)) {
      const Batch src = make_batch(source, idx);
      const Batch tgt = sampler.next(cfg.batch);
      std::vector<int> injected;
      for (std::size_t i = 0; i < idx.size(); ++i) injected.push_back(static_cast<int>((step * cfg.batch + static_cast<long>(i)) % K));
      const Shape s = src.images.shape();

      // One generator pass serves both updates; the discriminator sees a
      // detached copy.
      Var<float> fake = G(constant(src.images), injected);

      // Discriminator: ascend the adversarial value, classify real conditions.
      auto real_out = D(constant(tgt.images));
      auto fake_out = D(constant(fake.value()));
      Var<float> d_loss = add(scale(cgan_loss(real_out.realism, fake_out.realism), -1.f),
                              condition_nll(real_out.condition, tgt.conditions));
      opt_d.zero_grad();
      d_loss.backward();
      opt_d.step();

      // Generator: fool the realism head, match the injected condition,
      // keep the frozen segmenter's labels.
      D.set_trainable(false);
      auto out = D(fake);
      Var<float> adv = generator_adv_loss(out.realism);
      Var<float> cls = condition_nll(out.condition, injected);
      const auto bundle = frozen_segmenter.forward(fake);
      Var<float> seg = resize_bilinear(bundle_probs(bundle, default_mode(frozen_segmenter.config().variant)), s.h, s.w);
      Var<float> sc = sc_loss(seg, src.labels);
      Var<float> g_loss = add(add(adv, cls), scale(sc, static_cast<float>(cfg.lambda_sc)));
      if (!std::isfinite(g_loss.value().item()))
        throw std::runtime_error("translator diverged at step " + std::to_string(step));
      opt_g.zero_grad();
      g_loss.backward();
      opt_g.step();
      D.set_trainable(true);

      if (curves) {
        curves->add(step, "d_loss", d_loss.value().item());
        curves->add(step, "g_adv", adv.value().item());
        curves->add(step, "g_cls", cls.value().item());
        curves->add(step, "sc", sc.value().item());
      }
      ++step;
    }
    spdlog::info("translator epoch {}/{} done", epoch + 1, cfg.epochs);
  }

  auto params = frozen_segmenter.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].set_requires_grad(seg_trainable[i]);
  return nets;
}

Tensor<float> translate(const Generator<float>& generator, const Tensor<float>& images,
                        const std::vector<int>& conditions) {
  NoGradGuard guard;
  return generator(constant(images), conditions).value();
}

namespace {

std::vector<int> round_robin(const std::vector<std::size_t>& idx, int K) {
  std::vector<int> out;
  for (auto i : idx) out.push_back(static_cast<int>(i % static_cast<std::size_t>(K)));
  return out;
}

}  // namespace

std::vector<double> condition_accuracy(const TranslatorNets& nets, const std::vector<Sample>& source, int batch) {
  const int K = nets.generator.conditions();
  std::vector<double> hits(static_cast<std::size_t>(K), 0.0), totals(static_cast<std::size_t>(K), 0.0);
  BatchStream stream(source, batch, 0, false);
  NoGradGuard guard;
  for (const auto& idx : stream.epoch(0)) {
    const Batch b = make_batch(source, idx);
    for (int c = 0; c < K; ++c) {
      const std::vector<int> conds(idx.size(), c);
      const auto logits = nets.discriminator(constant(translate(nets.generator, b.images, conds))).condition.value();
      for (int n = 0; n < logits.shape().n; ++n) {
        int best = 0;
        for (int k = 1; k < K; ++k)
          if (logits(n, k, 0, 0) > logits(n, best, 0, 0)) best = k;
        hits[static_cast<std::size_t>(c)] += best == c;
        totals[static_cast<std::size_t>(c)] += 1;
      }
    }
  }
  for (int c = 0; c < K; ++c) hits[static_cast<std::size_t>(c)] /= std::max(1.0, totals[static_cast<std::size_t>(c)]);
  return hits;
}

double condition_contrast(const Generator<float>& generator, const std::vector<Sample>& source,
                          int condition_a, int condition_b, int batch) {
  double total = 0.0;
  std::size_t count = 0;
  BatchStream stream(source, batch, 0, false);
  for (const auto& idx : stream.epoch(0)) {
    const Batch b = make_batch(source, idx);
    const auto a = translate(generator, b.images, std::vector<int>(idx.size(), condition_a));
    const auto c = translate(generator, b.images, std::vector<int>(idx.size(), condition_b));
    total += static_cast<double>((a.array() - c.array()).abs().sum());
    count += a.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

std::vector<Sample> stylize(const Generator<float>& generator, const std::vector<Sample>& source,
                            const std::vector<std::string>& condition_names, int batch) {
  const int K = generator.conditions();
  if (static_cast<int>(condition_names.size()) < K)
    throw std::invalid_argument("stylize: fewer condition names than generator conditions");
  std::vector<Sample> out;
  out.reserve(source.size());
  BatchStream stream(source, batch, 0, false);
  for (const auto& idx : stream.epoch(0)) {
    const Batch b = make_batch(source, idx);
    const auto conds = round_robin(idx, K);
    const auto images = translate(generator, b.images, conds);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      Sample s = source[idx[i]];
      s.image = images.slice_batch(static_cast<int>(i), 1);
      s.condition = {conds[i], condition_names[static_cast<std::size_t>(conds[i])]};
      out.push_back(std::move(s));
    }
  }
  return out;
}

#define CONDADAPT_INSTANTIATE_TRANSLATOR(S)                                                        \
  template Var<S> inject_condition(const Var<S>&, const std::vector<int>&, int);                   \
  template class Generator<S>;                                                                     \
  template class StyleDiscriminator<S>;                                                            \
  template Var<S> cgan_loss(const Var<S>&, const Var<S>&);                                         \
  template Var<S> generator_adv_loss(const Var<S>&);                                               \
  template Var<S> condition_nll(const Var<S>&, const std::vector<int>&);                           \
  template Var<S> cls_loss(const Var<S>&, const std::vector<int>&, const Var<S>&,                  \
                           const std::vector<int>&);                                               \
  template Var<S> sc_loss(const Var<S>&, const LabelMap&);                                         \
  template Var<S> cgst_objective(const Var<S>&, const Var<S>&, const Var<S>&, double);

CONDADAPT_INSTANTIATE_TRANSLATOR(float)
CONDADAPT_INSTANTIATE_TRANSLATOR(double)

}  // namespace condadapt
