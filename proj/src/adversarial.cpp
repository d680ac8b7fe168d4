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
#include "condadapt/adversarial.hpp"

#include "condadapt/losses.hpp"
#include "condadapt/random.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace condadapt {

template <typename S>
PatchDiscriminator<S>::PatchDiscriminator(int classes, int width, Rng& rng)
    : c1_(classes, width, 3, 2, 1, rng),
      c2_(width, 2 * width, 3, 1, 1, rng),
      c3_(2 * width, 2 * width, 3, 1, 1, rng),
      out_(2 * width, 1, 3, 1, 1, rng, 1.0) {}

template <typename S>
Var<S> PatchDiscriminator<S>::operator()(const Var<S>& probs) const {
  const S slope = S(0.2);
  return out_(leaky_relu(c3_(leaky_relu(c2_(leaky_relu(c1_(probs), slope)), slope)), slope));
}

template <typename S>
void PatchDiscriminator<S>::collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
  c1_.collect(prefix + ".c1", out);
  c2_.collect(prefix + ".c2", out);
  c3_.collect(prefix + ".c3", out);
  out_.collect(prefix + ".out", out);
}

template <typename S>
DiscriminatorBank<S>::DiscriminatorBank(int classes, int conditions, int width, Rng& rng)
    : classes_(classes), width_(width) {
  for (int i = 0; i < conditions; ++i) per_condition_.emplace_back(classes, width, rng);
  global_ = PatchDiscriminator<S>(classes, width, rng);
}

template <typename S>
void DiscriminatorBank<S>::collect(const std::string& prefix, std::vector<NamedParam<S>>& out) const {
  const std::string p = prefix.empty() ? "" : prefix + ".";
  for (std::size_t i = 0; i < per_condition_.size(); ++i) per_condition_[i].collect(p + "d" + std::to_string(i), out);
  global_.collect(p + "dca", out);
}

template <typename S>
DiscriminatorBank<S> DiscriminatorBank<S>::clone() const {
  Rng rng(0);
  DiscriminatorBank copy(classes_, conditions(), width_, rng);
  copy.load_state(this->state());
  return copy;
}

AdversarialMode adversarial_mode_from_string(const std::string& s) {
  if (s == "csat") return AdversarialMode::csat;
  if (s == "dat") return AdversarialMode::dat;
  if (s == "none") return AdversarialMode::none;
  throw std::invalid_argument("unknown adversarial mode '" + s + "'");
}

template <typename S>
Var<S> global_probs(const PredictionBundle<S>& bundle) {
  return bundle.has_ca() ? bundle.ca_probs : mean_vote(bundle.probs);
}

namespace {

/// Batch indices per condition; throws for conditions outside [0,K).
std::vector<std::vector<int>> buckets(const std::vector<int>& conditions, int K, int batch) {
  if (static_cast<int>(conditions.size()) != batch)
    throw std::invalid_argument("condition list does not match the batch size");
  std::vector<std::vector<int>> out(static_cast<std::size_t>(K));
  for (int n = 0; n < batch; ++n) {
    const int c = conditions[static_cast<std::size_t>(n)];
    if (c < 0 || c >= K)
      throw std::invalid_argument("condition " + std::to_string(c) + " outside [0," + std::to_string(K) + ")");
    out[static_cast<std::size_t>(c)].push_back(n);
  }
  return out;
}

template <typename S>
bool per_condition_heads(const PredictionBundle<S>& b, int K) {
  return b.heads() == K && K > 1;
}

template <typename S>
Var<S> sum_terms(const std::vector<Var<S>>& terms) {
  Var<S> total = terms.at(0);
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

}  // namespace

template <typename S>
Var<S> csat_adv_loss(const PredictionBundle<S>& target, const std::vector<int>& conditions,
                     const DiscriminatorBank<S>& bank) {
  const int B = global_probs(target).shape().n, K = bank.conditions();
  const auto groups = buckets(conditions, K, B);
  std::vector<Var<S>> terms{scale(mean_log_score(bank.global()(global_probs(target)), true), S(-1))};
  if (per_condition_heads(target, K)) {
    for (int i = 0; i < K; ++i) {
      const auto& idx = groups[static_cast<std::size_t>(i)];
      if (idx.empty()) continue;
      const Var<S> sub = select_batch(target.probs[static_cast<std::size_t>(i)], idx);
      const S share = static_cast<S>(idx.size()) / static_cast<S>(B);
      terms.push_back(scale(mean_log_score(bank.condition(i)(sub), true), -share));
    }
  }
  return sum_terms(terms);
}

template <typename S>
Var<S> dat_loss(const PredictionBundle<S>& target, const DiscriminatorBank<S>& bank) {
  const int K = bank.conditions();
  std::vector<Var<S>> terms{scale(mean_log_score(bank.global()(global_probs(target)), true), S(-1))};
  if (per_condition_heads(target, K))
    for (int i = 0; i < K; ++i)
      terms.push_back(scale(mean_log_score(bank.condition(i)(target.probs[static_cast<std::size_t>(i)]), true), S(-1)));
  return sum_terms(terms);
}

template <typename S>
Var<S> source_ce_loss(const PredictionBundle<S>& source, const LabelMap& labels,
                      const std::vector<int>& conditions, bool global_only) {
  const Shape ls = labels.shape();
  const Var<S> global = global_probs(source);
  Var<S> loss = masked_nll(resize_bilinear(global, ls.h, ls.w), labels);
  const int K = source.heads();
  if (global_only || !(source.has_ca() || K > 1)) return loss;
  if (!source.has_ca()) {
    // Multi-head networks without a CA head train each head on its own condition only.
    loss = Var<S>();
  }
  const auto groups = buckets(conditions, K, ls.n);
  const double total = static_cast<double>(labeled_count(labels));
  for (int i = 0; i < K; ++i) {
    const auto& idx = groups[static_cast<std::size_t>(i)];
    if (idx.empty()) continue;
    std::vector<bool> keep(static_cast<std::size_t>(ls.n), false);
    for (int n : idx) keep[static_cast<std::size_t>(n)] = true;
    const LabelMap routed = mask_samples(labels, keep);
    const double count = static_cast<double>(labeled_count(routed));
    if (count == 0) continue;
    Var<S> term = scale(masked_nll(resize_bilinear(source.probs[static_cast<std::size_t>(i)], ls.h, ls.w), routed),
                        static_cast<S>(count / total));
    loss = loss.defined() ? add(loss, term) : term;
  }
  if (!loss.defined()) loss = constant(Tensor<S>::scalar(S(0)));
  return loss;
}

template <typename S>
DiscriminatorLosses discriminator_losses(const DiscriminatorBank<S>& bank, const PredictionBundle<S>& source,
                                         const std::vector<int>& source_conditions,
                                         const PredictionBundle<S>& target,
                                         const std::vector<int>& target_conditions, AdversarialMode mode,
                                         Var<S>* loss_out) {
  const int K = bank.conditions();
  DiscriminatorLosses out;
  out.per_condition.assign(static_cast<std::size_t>(K), std::numeric_limits<double>::quiet_NaN());
  auto bce = [](const PatchDiscriminator<S>& d, const Var<S>& src, const Var<S>& tgt) {
    return scale(add(mean_log_score(d(constant(src.value())), true),
                     mean_log_score(d(constant(tgt.value())), false)),
                 S(-1));
  };
  std::vector<Var<S>> terms{bce(bank.global(), global_probs(source), global_probs(target))};
  out.global = static_cast<double>(terms[0].value().item());
  if (mode != AdversarialMode::none && per_condition_heads(source, K) && per_condition_heads(target, K)) {
    const auto sg = buckets(source_conditions, K, source.probs[0].shape().n);
    const auto tg = buckets(target_conditions, K, target.probs[0].shape().n);
    for (int i = 0; i < K; ++i) {
      const auto& sp = source.probs[static_cast<std::size_t>(i)];
      const auto& tp = target.probs[static_cast<std::size_t>(i)];
      Var<S> term;
      if (mode == AdversarialMode::dat) {
        term = bce(bank.condition(i), sp, tp);
      } else {
        const auto& si = sg[static_cast<std::size_t>(i)];
        const auto& ti = tg[static_cast<std::size_t>(i)];
        if (si.empty() || ti.empty()) {
          spdlog::debug("condition {} bucket empty; its discriminator skips this step", i);
          continue;
        }
        term = bce(bank.condition(i), select_batch(sp, si), select_batch(tp, ti));
      }
      out.per_condition[static_cast<std::size_t>(i)] = static_cast<double>(term.value().item());
      terms.push_back(term);
    }
  }
  Var<S> total = sum_terms(terms);
  out.total = static_cast<double>(total.value().item());
  if (loss_out) *loss_out = total;
  return out;
}

DiscriminatorLosses discriminator_step(DiscriminatorBank<float>& bank, Adam<float>& opt,
                                       const PredictionBundle<float>& source,
                                       const std::vector<int>& source_conditions,
                                       const PredictionBundle<float>& target,
                                       const std::vector<int>& target_conditions, AdversarialMode mode) {
  Var<float> loss;
  auto out = discriminator_losses(bank, source, source_conditions, target, target_conditions, mode, &loss);
  opt.zero_grad();
  loss.backward();
  opt.step();
  return out;
}

namespace {

SegNet<float> make_net(const SegNetConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5E6));
  return SegNet<float>(cfg, rng);
}

void require_finite(double v, const std::string& what, long step) {
  if (!std::isfinite(v)) throw std::runtime_error(what + " became non-finite at step " + std::to_string(step));
}

}  // namespace

SegNet<float> train_source_only(const SourceOnlyConfig& cfg, const std::vector<Sample>& source, CurveLog* curves) {
  if (source.empty()) throw std::invalid_argument("train_source_only: empty dataset");
  SegNet<float> net = make_net(cfg.net, cfg.seed);
  Sgd<float> opt(net.parameters(), cfg.optim.lr, cfg.optim.momentum, cfg.optim.weight_decay);
  BatchStream stream(source, cfg.optim.batch, derive_seed(cfg.seed, 0xB5));
  const long total = static_cast<long>(cfg.optim.epochs) * static_cast<long>(stream.batches_per_epoch());
  long step = 0;
  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    for (const auto& idx : stream.epoch(epoch)) {
      const Batch b = make_batch(source, idx);
      opt.set_lr(poly_lr(cfg.optim.lr, step, total, cfg.optim.poly_power));
      const auto bundle = net.forward(constant(b.images));
      Var<float> loss = source_ce_loss(bundle, b.labels, b.conditions, true);
      require_finite(loss.value().item(), "source loss", step);
      opt.zero_grad();
      loss.backward();
      opt.step();
      if (curves) curves->add(step, "ce", loss.value().item());
      ++step;
    }
  }
  return net;
}

Stage1Result stage1_train(const Stage1Config& cfg, const std::vector<Sample>& stylized_source,
                          const std::vector<Sample>& target, CurveLog* curves) {
  if (stylized_source.empty() || target.empty()) throw std::invalid_argument("stage1_train: empty dataset");
  const int K = cfg.net.conditions;
  Rng drng(derive_seed(cfg.seed, 0xD15));
  Stage1Result r{make_net(cfg.net, cfg.seed), DiscriminatorBank<float>(cfg.net.classes, K, cfg.discriminator_width, drng)};
  Sgd<float> opt(r.net.parameters(), cfg.optim.lr, cfg.optim.momentum, cfg.optim.weight_decay);
  Adam<float> opt_d(r.bank.parameters(), cfg.lr_discriminator, 0.9, 0.99);
  ConditionBalancedSampler src_sampler(stylized_source, K, derive_seed(cfg.seed, 0x51));
  ConditionBalancedSampler tgt_sampler(target, K, derive_seed(cfg.seed, 0x71));
  const long per_epoch = static_cast<long>((stylized_source.size() + static_cast<std::size_t>(cfg.optim.batch) - 1) /
                                           static_cast<std::size_t>(cfg.optim.batch));
  const long total = per_epoch * cfg.optim.epochs;
  const bool adversarial = cfg.adversarial != AdversarialMode::none && cfg.lambda_adv > 0;
  long step = 0;
  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    for (long i = 0; i < per_epoch; ++i, ++step) {
      const Batch src = src_sampler.next(cfg.optim.batch);
      const Batch tgt = tgt_sampler.next(cfg.optim.batch);
      opt.set_lr(poly_lr(cfg.optim.lr, step, total, cfg.optim.poly_power));

      // Segmentation step; discriminators are held fixed.
      r.bank.set_trainable(false);
      const auto sb = r.net.forward(constant(src.images));
      Var<float> ce = source_ce_loss(sb, src.labels, src.conditions);
      Var<float> loss = ce;
      PredictionBundle<float> tb;
      double adv_value = 0.0;
      if (adversarial) {
        tb = r.net.forward(constant(tgt.images));
        Var<float> adv = cfg.adversarial == AdversarialMode::dat ? dat_loss(tb, r.bank)
                                                                 : csat_adv_loss(tb, tgt.conditions, r.bank);
        adv_value = adv.value().item();
        loss = add(ce, scale(adv, static_cast<float>(cfg.lambda_adv)));
      }
      require_finite(loss.value().item(), "stage-1 loss", step);
      opt.zero_grad();
      loss.backward();
      opt.step();
      r.bank.set_trainable(true);

      // Discriminator step on detached predictions.
      DiscriminatorLosses dl;
      if (adversarial) {
        dl = discriminator_step(r.bank, opt_d, sb, src.conditions, tb, tgt.conditions, cfg.adversarial);
        require_finite(dl.total, "discriminator loss", step);
      }
      if (curves) {
        curves->add(step, "ce", ce.value().item());
        curves->add(step, "adv", adv_value);
        curves->add(step, "d_total", dl.total);
      }
    }
    spdlog::info("stage-1 epoch {}/{} done", epoch + 1, cfg.optim.epochs);
    if (cfg.on_epoch) cfg.on_epoch(epoch, r.net);
  }
  return r;
}

#define CONDADAPT_INSTANTIATE_ADV(S)                                                                  \
  template class PatchDiscriminator<S>;                                                               \
  template class DiscriminatorBank<S>;                                                                \
  template Var<S> global_probs(const PredictionBundle<S>&);                                           \
  template Var<S> csat_adv_loss(const PredictionBundle<S>&, const std::vector<int>&,                  \
                                const DiscriminatorBank<S>&);                                         \
  template Var<S> dat_loss(const PredictionBundle<S>&, const DiscriminatorBank<S>&);                  \
  template Var<S> source_ce_loss(const PredictionBundle<S>&, const LabelMap&, const std::vector<int>&, \
                                 bool);                                                               \
  template DiscriminatorLosses discriminator_losses(const DiscriminatorBank<S>&,                      \
                                                    const PredictionBundle<S>&, const std::vector<int>&, \
                                                    const PredictionBundle<S>&, const std::vector<int>&, \
                                                    AdversarialMode, Var<S>*);

CONDADAPT_INSTANTIATE_ADV(float)
CONDADAPT_INSTANTIATE_ADV(double)

}  // namespace condadapt
