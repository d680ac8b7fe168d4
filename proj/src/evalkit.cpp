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
#include "condadapt/evalkit.hpp"

#include "condadapt/image_io.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace condadapt {

namespace fs = std::filesystem;

Confusion::Confusion(int classes) : counts_(Matrix::Zero(classes, classes)) {}

void Confusion::add(const LabelMap& pred, const LabelMap& gt) {
  if (!(pred.shape() == gt.shape()))
    throw std::invalid_argument("confusion: prediction " + pred.shape().str() + " vs ground truth " +
                                gt.shape().str());
  const int L = classes();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = gt[i];
    if (g == 0) continue;
    const int p = pred[i];
    if (g < 0 || g > L || p < 1 || p > L)
      throw std::out_of_range(fmt::format("confusion: label pair ({}, {}) outside 1..{}", g, p, L));
    ++counts_(g - 1, p - 1);
  }
}

void Confusion::merge(const Confusion& other) {
  if (other.classes() != classes()) throw std::invalid_argument("confusion: class count mismatch");
  counts_ += other.counts_;
}

Confusion confusion(const LabelMap& pred, const LabelMap& gt, int classes) {
  Confusion c(classes);
  c.add(pred, gt);
  return c;
}

IouResult miou(const Confusion& c) {
  IouResult r;
  const auto& m = c.counts();
  double total = 0.0;
  int present = 0;
  for (int k = 0; k < c.classes(); ++k) {
    const double tp = static_cast<double>(m(k, k));
    const double fn = static_cast<double>(m.row(k).sum()) - tp;
    const double fp = static_cast<double>(m.col(k).sum()) - tp;
    const double denom = tp + fp + fn;
    if (denom == 0.0) {
      r.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    r.per_class.push_back(tp / denom);
    total += tp / denom;
    ++present;
  }
  if (present > 0) r.mean = total / present;
  return r;
}

double point_biserial(const std::vector<double>& score, const std::vector<bool>& outcome) {
  if (score.size() != outcome.size()) throw std::invalid_argument("point_biserial: size mismatch");
  const double n = static_cast<double>(score.size());
  double s1 = 0, s0 = 0, n1 = 0, total = 0, total_sq = 0;
  for (std::size_t i = 0; i < score.size(); ++i) {
    total += score[i];
    total_sq += score[i] * score[i];
    if (outcome[i]) {
      s1 += score[i];
      n1 += 1;
    } else {
      s0 += score[i];
    }
  }
  const double n0 = n - n1;
  if (n1 == 0 || n0 == 0) return std::numeric_limits<double>::quiet_NaN();
  const double mean = total / n;
  const double var = total_sq / n - mean * mean;
  if (var <= 0) return std::numeric_limits<double>::quiet_NaN();
  return (s1 / n1 - s0 / n0) / std::sqrt(var) * std::sqrt(n1 * n0 / (n * n));
}

const ConditionMetrics* MetricReport::find(const std::string& condition) const {
  for (const auto& c : conditions)
    if (c.condition == condition) return &c;
  return nullptr;
}

MetricReport evaluate(const SegNet<float>& net, const std::vector<Sample>& samples,
                      const DatasetManifest& manifest, PredictMode mode, const std::string& model_name,
                      const AmbivalenceFn& ambivalence, int batch_size) {
  if (samples.size() != manifest.size())
    throw std::invalid_argument("evaluate: samples do not match the manifest");
  const int L = manifest.classes;
  MetricReport r;
  r.model = model_name;
  r.mode = to_string(mode);
  r.classes = L;
  r.overall = Confusion(L);
  r.has_ambivalence = static_cast<bool>(ambivalence);

  // Group keys: condition index, -1 for none.
  std::vector<int> group_keys;
  for (const auto& s : samples)
    if (std::find(group_keys.begin(), group_keys.end(), s.condition.index) == group_keys.end())
      group_keys.push_back(s.condition.index);
  std::sort(group_keys.begin(), group_keys.end());
  for (int key : group_keys) {
    ConditionMetrics cm;
    cm.condition = key < 0 ? "none" : manifest.conditions.at(static_cast<std::size_t>(key));
    cm.unseen = key >= manifest.seen_conditions;
    cm.confusion = Confusion(L);
    r.conditions.push_back(std::move(cm));
  }

  double sum_correct = 0, sum_wrong = 0;
  std::vector<double> scores;
  std::vector<bool> correct;
  BatchStream stream(samples, batch_size, 0, false);
  NoGradGuard guard;
  for (const auto& idx : stream.epoch(0)) {
    const Batch batch = make_batch(samples, idx);
    const Shape s = batch.images.shape();
    const auto bundle = net.forward(constant(batch.images));
    const Tensor<float> low = bundle_probs(bundle, mode).value();
    const LabelMap pred = argmax_labels(upsample_probs(low, s.h, s.w));
    Tensor<float> d;
    if (ambivalence) d = resize_bilinear(ambivalence(low), s.h, s.w);
    for (int n = 0; n < s.n; ++n) {
      const LabelMap p1 = pred.slice_batch(n, 1), g1 = batch.labels.slice_batch(n, 1);
      const int key = batch.conditions[static_cast<std::size_t>(n)];
      auto it = std::find(group_keys.begin(), group_keys.end(), key);
      auto& cm = r.conditions[static_cast<std::size_t>(it - group_keys.begin())];
      cm.confusion.add(p1, g1);
      ++cm.samples;
      if (!cm.unseen) r.overall.add(p1, g1);
      if (ambivalence && !cm.unseen) {
        for (int y = 0; y < s.h; ++y)
          for (int x = 0; x < s.w; ++x) {
            const int g = g1(0, 0, y, x);
            if (g == 0) continue;
            const double v = d(n, 0, y, x);
            const bool ok = p1(0, 0, y, x) == g;
            scores.push_back(v);
            correct.push_back(ok);
            (ok ? sum_correct : sum_wrong) += v;
            ++(ok ? r.ambivalence.correct_pixels : r.ambivalence.wrong_pixels);
          }
      }
    }
  }
  for (auto& cm : r.conditions) cm.iou = condadapt::miou(cm.confusion);
  r.overall_iou = condadapt::miou(r.overall);
  if (ambivalence) {
    if (r.ambivalence.correct_pixels > 0)
      r.ambivalence.mean_correct = sum_correct / static_cast<double>(r.ambivalence.correct_pixels);
    if (r.ambivalence.wrong_pixels > 0)
      r.ambivalence.mean_wrong = sum_wrong / static_cast<double>(r.ambivalence.wrong_pixels);
    r.ambivalence.point_biserial = point_biserial(scores, correct);
  }
  return r;
}

namespace {

std::string num(double v) { return std::isnan(v) ? "nan" : fmt::format("{:.6f}", v); }

}  // namespace

std::string report_csv(const MetricReport& r) {
  std::string out = "model,mode,condition,unseen,samples,class,iou\n";
  auto rows = [&](const std::string& cond, bool unseen, std::size_t samples, const IouResult& iou) {
    for (std::size_t k = 0; k < iou.per_class.size(); ++k)
      out += fmt::format("{},{},{},{},{},{},{}\n", r.model, r.mode, cond, unseen ? 1 : 0, samples,
                         k + 1, num(iou.per_class[k]));
    out += fmt::format("{},{},{},{},{},miou,{}\n", r.model, r.mode, cond, unseen ? 1 : 0, samples,
                       num(iou.mean));
  };
  std::size_t seen_samples = 0;
  for (const auto& c : r.conditions)
    if (!c.unseen) seen_samples += c.samples;
  rows("all", false, seen_samples, r.overall_iou);
  for (const auto& c : r.conditions) rows(c.condition, c.unseen, c.samples, c.iou);
  if (r.has_ambivalence) {
    out += fmt::format("{},{},all,0,{},d_mean_correct,{}\n", r.model, r.mode, seen_samples,
                       num(r.ambivalence.mean_correct));
    out += fmt::format("{},{},all,0,{},d_mean_wrong,{}\n", r.model, r.mode, seen_samples,
                       num(r.ambivalence.mean_wrong));
    out += fmt::format("{},{},all,0,{},d_point_biserial,{}\n", r.model, r.mode, seen_samples,
                       num(r.ambivalence.point_biserial));
  }
  return out;
}

std::string report_text(const MetricReport& r) {
  std::string out = fmt::format("model {}  mode {}\n{:<10}", r.model, r.mode, "class");
  out += fmt::format("{:>9}", "all");
  for (const auto& c : r.conditions) out += fmt::format("{:>10}", c.unseen ? c.condition + "*" : c.condition);
  out += "\n";
  auto cell = [](double v) { return std::isnan(v) ? fmt::format("{:>9}", "-") : fmt::format("{:>9.1f}", 100 * v); };
  for (int k = 0; k < r.classes; ++k) {
    out += fmt::format("{:<10}", k + 1) + cell(r.overall_iou.per_class[static_cast<std::size_t>(k)]);
    for (const auto& c : r.conditions) out += " " + cell(c.iou.per_class[static_cast<std::size_t>(k)]);
    out += "\n";
  }
  out += fmt::format("{:<10}", "mIoU") + cell(r.overall_iou.mean);
  for (const auto& c : r.conditions) out += " " + cell(c.iou.mean);
  out += "\n";
  if (r.has_ambivalence)
    out += fmt::format("confidence on correct pixels {:.4f}, on wrong pixels {:.4f}, point-biserial {:.4f}\n",
                       r.ambivalence.mean_correct, r.ambivalence.mean_wrong, r.ambivalence.point_biserial);
  out += "(* unseen condition, excluded from 'all')\n";
  return out;
}

void write_report(const MetricReport& r, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream(dir / "metrics.csv") << report_csv(r);
  std::ofstream(dir / "metrics.txt") << report_text(r);
  if (!fs::exists(dir / "metrics.csv")) throw std::runtime_error("cannot write report in " + dir.string());
}

Tensor<float> colorize_labels(const LabelMap& labels, int classes) {
  const Shape s = labels.shape();
  Tensor<float> out(Shape{1, 3, s.h, s.w});
  SceneSpec spec;
  spec.classes = std::max(classes, 2);
  for (int y = 0; y < s.h; ++y)
    for (int x = 0; x < s.w; ++x) {
      const int l = labels(0, 0, y, x);
      const Rgb c = l > 0 ? spec.palette(l) : Rgb{0.f, 0.f, 0.f};
      for (int k = 0; k < 3; ++k) out(0, k, y, x) = c[static_cast<std::size_t>(k)];
    }
  return out;
}

Tensor<float> region_map(const LabelMap& pseudo, const LabelMap& gt) {
  if (!(pseudo.shape() == gt.shape())) throw std::invalid_argument("region_map: shape mismatch");
  Tensor<float> out(Shape{1, 1, gt.shape().h, gt.shape().w});
  for (std::size_t i = 0; i < gt.size(); ++i)
    out[i] = pseudo[i] == 0 ? 0.f : (pseudo[i] == gt[i] ? 1.f : 0.5f);
  return out;
}

void write_panels(const fs::path& dir, const std::string& stem, const LabelMap& pred, const LabelMap& gt,
                  int classes, const LabelMap* pseudo, const Tensor<float>* ambivalence) {
  write_ppm(dir / (stem + "_pred.ppm"), colorize_labels(pred, classes));
  Tensor<float> error(Shape{1, 1, gt.shape().h, gt.shape().w});
  for (std::size_t i = 0; i < gt.size(); ++i) error[i] = gt[i] != 0 && pred[i] != gt[i] ? 1.f : 0.f;
  write_pgm_unit(dir / (stem + "_error.pgm"), error);
  if (pseudo) write_pgm_unit(dir / (stem + "_regions.pgm"), region_map(*pseudo, gt));
  if (ambivalence) write_pgm_unit(dir / (stem + "_ambivalence.pgm"), *ambivalence);
}

}  // namespace condadapt
