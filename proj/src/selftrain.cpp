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
#include "condadapt/selftrain.hpp"

#include "condadapt/losses.hpp"
#include "condadapt/random.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <stdexcept>

namespace condadapt {

std::string to_string(PseudoLabelMode m) {
  switch (m) {
    case PseudoLabelMode::apla: return "apla";
    case PseudoLabelMode::ca: return "ca";
    case PseudoLabelMode::maxv: return "maxv";
    case PseudoLabelMode::meanv: return "meanv";
  }
  throw std::logic_error("bad pseudo-label mode");
}

PseudoLabelMode pseudo_label_mode_from_string(const std::string& s) {
  for (auto m : {PseudoLabelMode::apla, PseudoLabelMode::ca, PseudoLabelMode::maxv, PseudoLabelMode::meanv})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown pseudo-label mode '" + s + "'");
}

std::string to_string(TargetLoss t) { return t == TargetLoss::weighted ? "weighted" : "plain"; }

TargetLoss target_loss_from_string(const std::string& s) {
  if (s == "weighted") return TargetLoss::weighted;
  if (s == "plain") return TargetLoss::plain;
  throw std::invalid_argument("unknown target loss '" + s + "'");
}

template <typename S>
std::size_t PseudoLabelPack<S>::labeled() const {
  return labeled_count(labels);
}

template <typename S>
LabelMap threshold_labels(const Tensor<S>& probs, double lambda_p) {
  if (!(lambda_p >= 0.0 && lambda_p < 1.0))
    throw std::invalid_argument("lambda_p must lie in [0,1), got " + std::to_string(lambda_p));
  const Shape s = probs.shape();
  LabelMap out(Shape{s.n, 1, s.h, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int x = 0; x < s.w; ++x) {
        int best = 0;
        for (int c = 1; c < s.c; ++c)
          if (probs(n, c, y, x) > probs(n, best, y, x)) best = c;
        out(n, 0, y, x) = static_cast<double>(probs(n, best, y, x)) > lambda_p ? best + 1 : 0;
      }
  return out;
}

template <typename S>
Tensor<S> pseudo_label_probs(const PredictionBundle<S>& bundle, PseudoLabelMode mode) {
  NoGradGuard guard;
  std::vector<Var<S>> heads = bundle.probs;
  if (bundle.has_ca()) heads.push_back(bundle.ca_probs);
  switch (mode) {
    case PseudoLabelMode::apla:
      if (bundle.has_ca()) return bundle_probs(bundle, PredictMode::fused).value();
      return mean_vote(heads).value();
    case PseudoLabelMode::ca:
      return bundle.has_ca() ? bundle.ca_probs.value() : mean_vote(heads).value();
    case PseudoLabelMode::meanv:
      return mean_vote(heads).value();
    case PseudoLabelMode::maxv: {
      Tensor<S> m = heads.at(0).value();
      for (std::size_t i = 1; i < heads.size(); ++i) m.array() = m.array().max(heads[i].value().array());
      const Shape s = m.shape();
      for (int n = 0; n < s.n; ++n) {
        Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic> total = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>::Zero(s.h, s.w);
        for (int c = 0; c < s.c; ++c) total += m.plane(n, c).array();
        for (int c = 0; c < s.c; ++c) m.plane(n, c).array() /= total;
      }
      return m;
    }
  }
  throw std::logic_error("bad pseudo-label mode");
}

namespace {

template <typename S>
Tensor<S> hard_mask_of(const LabelMap& labels) {
  Tensor<S> mask(labels.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] == 0 ? S(1) : S(0);
  return mask;
}

}  // namespace

template <typename S>
PseudoLabelPack<S> assign_pseudolabels(const PredictionBundle<S>& bundle, double lambda_p, int height, int width,
                                       PseudoLabelMode mode) {
  PseudoLabelPack<S> pack;
  pack.fused_probs = pseudo_label_probs(bundle, mode);
  pack.labels = threshold_labels(upsample_probs(pack.fused_probs, height, width), lambda_p);
  pack.hard_mask = hard_mask_of<S>(pack.labels);
  return pack;
}

template <typename S>
LabelMap baseline_labels(const PredictionBundle<S>& bundle, PseudoLabelMode mode, double lambda_p, int height,
                         int width) {
  if (mode == PseudoLabelMode::apla) throw std::invalid_argument("baseline_labels: apla is not a baseline");
  return threshold_labels(upsample_probs(pseudo_label_probs(bundle, mode), height, width), lambda_p);
}

template <typename S>
Tensor<S> ambivalence_map(const Tensor<S>& probs, const PatchDiscriminator<S>& discriminator) {
  NoGradGuard guard;
  const Shape s = probs.shape();
  return resize_bilinear(sigmoid(discriminator(constant(probs))), s.h, s.w).value();
}

template <typename S>
void attach_ambivalence(PseudoLabelPack<S>& pack, const PatchDiscriminator<S>& discriminator) {
  pack.ambivalence = ambivalence_map(pack.fused_probs, discriminator);
}

namespace {

template <typename S>
Var<S> to_label_resolution(const Var<S>& probs, const LabelMap& labels) {
  const Shape ls = labels.shape();
  if (probs.shape().n != ls.n)
    throw std::invalid_argument("batch mismatch: probabilities " + probs.shape().str() + " vs labels " + ls.str());
  if (probs.shape().h == ls.h && probs.shape().w == ls.w) return probs;
  return resize_bilinear(probs, ls.h, ls.w);
}

template <typename S>
Var<S> unnormalize(const Var<S>& mean_loss, std::size_t count, bool normalize) {
  return normalize ? mean_loss : scale(mean_loss, static_cast<S>(count));
}

}  // namespace

template <typename S>
Var<S> plain_ce(const Var<S>& probs, const LabelMap& pseudo, bool normalize) {
  return unnormalize(masked_nll(to_label_resolution(probs, pseudo), pseudo), labeled_count(pseudo), normalize);
}

template <typename S>
Var<S> weighted_ce(const Var<S>& probs, const LabelMap& pseudo, const Tensor<S>& ambivalence, bool normalize) {
  const Shape ls = pseudo.shape(), as = ambivalence.shape();
  if (as.n != ls.n || as.c != 1)
    throw std::invalid_argument("ambivalence map " + as.str() + " does not match labels " + ls.str());
  const Tensor<S> d = (as.h == ls.h && as.w == ls.w) ? ambivalence : resize_bilinear(ambivalence, ls.h, ls.w);
  return unnormalize(masked_nll(to_label_resolution(probs, pseudo), pseudo, &d), labeled_count(pseudo),
                     normalize);
}

template <typename S>
Var<S> hard_region_adv(const Var<S>& scores, const LabelMap& pseudo, bool normalize) {
  const Tensor<S> mask = hard_mask_of<S>(pseudo);
  const std::size_t hard = pseudo.size() - labeled_count(pseudo);
  return unnormalize(scale(masked_mean_log(to_label_resolution(scores, pseudo), mask), S(-1)), hard, normalize);
}

template <typename S>
Var<S> hard_region_adv(const Var<S>& probs, const LabelMap& pseudo, const PatchDiscriminator<S>& discriminator,
                       bool normalize) {
  return hard_region_adv(sigmoid(discriminator(probs)), pseudo, normalize);
}

namespace {

void require_finite(double v, const std::string& what, long step) {
  if (!std::isfinite(v)) throw std::runtime_error(what + " became non-finite at step " + std::to_string(step));
}

long steps_per_epoch(std::size_t n, int batch) {
  return static_cast<long>((n + static_cast<std::size_t>(batch) - 1) / static_cast<std::size_t>(batch));
}

std::vector<Var<float>> global_parameters(const DiscriminatorBank<float>& bank) {
  std::vector<Var<float>> out;
  for (const auto& p : bank.named_parameters())
    if (p.name.rfind("dca.", 0) == 0) out.push_back(p.var);
  return out;
}

}  // namespace

SegNet<float> stage2_train(const Stage2Config& cfg, const SegNet<float>& teacher,
                           const DiscriminatorBank<float>& bank, const std::vector<Sample>& stylized_source,
                           const std::vector<Sample>& target, CurveLog* curves) {
  if (stylized_source.empty() || target.empty()) throw std::invalid_argument("stage2_train: empty dataset");
  if (!(cfg.lambda_p >= 0.0 && cfg.lambda_p < 1.0)) throw std::invalid_argument("stage2_train: lambda_p outside [0,1)");
  const int K = teacher.config().conditions;
  SegNet<float> student = teacher.clone();
  const DiscriminatorBank<float> judge = bank.clone();  // frozen source of d
  DiscriminatorBank<float> game = bank.clone();         // keeps training for the hard-region loss
  Sgd<float> opt(student.parameters(), cfg.optim.lr, cfg.optim.momentum, cfg.optim.weight_decay);
  Adam<float> opt_d(global_parameters(game), cfg.lr_discriminator, 0.9, 0.99);
  ConditionBalancedSampler src_sampler(stylized_source, K, derive_seed(cfg.seed, 0x52));
  ConditionBalancedSampler tgt_sampler(target, K, derive_seed(cfg.seed, 0x72));
  const long per_epoch = steps_per_epoch(stylized_source.size(), cfg.optim.batch);
  const long total = per_epoch * cfg.optim.epochs;
  const bool weighted = cfg.target_loss == TargetLoss::weighted;
  long step = 0;
  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    for (long i = 0; i < per_epoch; ++i, ++step) {
      const Batch src = src_sampler.next(cfg.optim.batch);
      const Batch tgt = tgt_sampler.next(cfg.optim.batch);
      const Shape ls = tgt.labels.shape();
      opt.set_lr(poly_lr(cfg.optim.lr, step, total, cfg.optim.poly_power));

      PseudoLabelPack<float> pack;
      {
        NoGradGuard guard;
        pack = assign_pseudolabels(teacher.forward(constant(tgt.images)), cfg.lambda_p, ls.h, ls.w,
                                   cfg.pseudo_labels);
        if (weighted) attach_ambivalence(pack, judge.global());
      }

      game.set_trainable(false);
      const auto sb = student.forward(constant(src.images));
      const auto tb = student.forward(constant(tgt.images));
      Var<float> src_loss = source_ce_loss(sb, src.labels, src.conditions, !cfg.source_all_heads);
      const Var<float> tgt_probs = global_probs(tb);
      Var<float> tgt_loss = weighted ? weighted_ce(tgt_probs, pack.labels, pack.ambivalence, cfg.normalize)
                                     : plain_ce(tgt_probs, pack.labels, cfg.normalize);
      Var<float> loss = add(src_loss, tgt_loss);
      double adv_value = 0.0;
      if (cfg.hard_adv && cfg.lambda_adv > 0) {
        Var<float> adv = hard_region_adv(tgt_probs, pack.labels, game.global(), cfg.normalize);
        adv_value = adv.value().item();
        loss = add(loss, scale(adv, static_cast<float>(cfg.lambda_adv)));
      }
      require_finite(loss.value().item(), "stage-2 loss", step);
      opt.zero_grad();
      loss.backward();
      opt.step();
      game.set_trainable(true);

      double d_value = 0.0;
      if (cfg.hard_adv && cfg.lambda_adv > 0) {
        const auto& D = game.global();
        Var<float> d_loss = scale(add(mean_log_score(D(constant(global_probs(sb).value())), true),
                                      mean_log_score(D(constant(tgt_probs.value())), false)),
                                  -1.f);
        d_value = d_loss.value().item();
        require_finite(d_value, "stage-2 discriminator loss", step);
        opt_d.zero_grad();
        d_loss.backward();
        opt_d.step();
      }
      if (curves) {
        curves->add(step, "source_ce", src_loss.value().item());
        curves->add(step, "target_ce", tgt_loss.value().item());
        curves->add(step, "hard_adv", adv_value);
        curves->add(step, "d_global", d_value);
        curves->add(step, "labeled_fraction",
                    static_cast<double>(pack.labeled()) / static_cast<double>(pack.labels.size()));
      }
    }
    spdlog::info("stage-2 epoch {}/{} done", epoch + 1, cfg.optim.epochs);
    if (cfg.on_epoch) cfg.on_epoch(epoch, student);
  }
  return student;
}

SegNet<float> distill_student(const DistillConfig& cfg, const SegNet<float>& teacher,
                              const std::vector<Sample>& stylized_source, const std::vector<Sample>& target,
                              CurveLog* curves) {
  if (stylized_source.empty() || target.empty()) throw std::invalid_argument("distill_student: empty dataset");
  SegNetConfig sc = teacher.config();
  sc.variant = HeadVariant::mix;
  Rng rng(derive_seed(cfg.seed, 0x57D));
  SegNet<float> student(sc, rng);
  StateDict<float> encoder;
  for (const auto& [name, t] : teacher.state())
    if (name.rfind("enc.", 0) == 0) encoder.emplace(name, t);
  if (encoder.empty()) throw std::invalid_argument("distill_student: teacher has no shared encoder");
  student.load_state(encoder, "", true);

  Sgd<float> opt(student.parameters(), cfg.optim.lr, cfg.optim.momentum, cfg.optim.weight_decay);
  BatchStream src_stream(stylized_source, cfg.optim.batch, derive_seed(cfg.seed, 0x53));
  ConditionBalancedSampler tgt_sampler(target, teacher.config().conditions, derive_seed(cfg.seed, 0x73));
  const long per_epoch = static_cast<long>(src_stream.batches_per_epoch());
  const long total = per_epoch * cfg.optim.epochs;
  long step = 0;
  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    for (const auto& idx : src_stream.epoch(epoch)) {
      const Batch src = make_batch(stylized_source, idx);
      const Batch tgt = tgt_sampler.next(cfg.optim.batch);
      const Shape ls = tgt.labels.shape();
      opt.set_lr(poly_lr(cfg.optim.lr, step, total, cfg.optim.poly_power));
      LabelMap pseudo;
      {
        NoGradGuard guard;
        pseudo = assign_pseudolabels(teacher.forward(constant(tgt.images)), cfg.lambda_p, ls.h, ls.w).labels;
      }
      Var<float> src_loss = source_ce_loss(student.forward(constant(src.images)), src.labels, src.conditions);
      Var<float> tgt_loss = plain_ce(student.forward(constant(tgt.images)).probs[0], pseudo);
      Var<float> loss = add(src_loss, tgt_loss);
      require_finite(loss.value().item(), "distillation loss", step);
      opt.zero_grad();
      loss.backward();
      opt.step();
      if (curves) {
        curves->add(step, "source_ce", src_loss.value().item());
        curves->add(step, "target_ce", tgt_loss.value().item());
      }
      ++step;
    }
    spdlog::info("distillation epoch {}/{} done", epoch + 1, cfg.optim.epochs);
    if (cfg.on_epoch) cfg.on_epoch(epoch, student);
  }
  return student;
}

#define CONDADAPT_INSTANTIATE_SELFTRAIN(S)                                                                 \
  template struct PseudoLabelPack<S>;                                                                      \
  template LabelMap threshold_labels(const Tensor<S>&, double);                                            \
  template Tensor<S> pseudo_label_probs(const PredictionBundle<S>&, PseudoLabelMode);                      \
  template PseudoLabelPack<S> assign_pseudolabels(const PredictionBundle<S>&, double, int, int,            \
                                                  PseudoLabelMode);                                        \
  template LabelMap baseline_labels(const PredictionBundle<S>&, PseudoLabelMode, double, int, int);        \
  template Tensor<S> ambivalence_map(const Tensor<S>&, const PatchDiscriminator<S>&);                      \
  template void attach_ambivalence(PseudoLabelPack<S>&, const PatchDiscriminator<S>&);                     \
  template Var<S> plain_ce(const Var<S>&, const LabelMap&, bool);                                          \
  template Var<S> weighted_ce(const Var<S>&, const LabelMap&, const Tensor<S>&, bool);                     \
  template Var<S> hard_region_adv(const Var<S>&, const LabelMap&, bool);                                   \
  template Var<S> hard_region_adv(const Var<S>&, const LabelMap&, const PatchDiscriminator<S>&, bool);

CONDADAPT_INSTANTIATE_SELFTRAIN(float)
CONDADAPT_INSTANTIATE_SELFTRAIN(double)

}  // namespace condadapt
