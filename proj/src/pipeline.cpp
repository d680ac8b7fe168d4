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
#include "condadapt/pipeline.hpp"

#include "condadapt/checkpoint.hpp"
#include "condadapt/plot.hpp"
#include "condadapt/random.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>

namespace condadapt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed streams per stage.
enum : std::uint64_t { kSeedSource = 1, kSeedTranslator, kSeedStage1, kSeedStage2, kSeedDistill, kSeedAblate };

struct Split {
  DatasetManifest manifest;
  std::vector<Sample> samples;
};

void require_file(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw MissingArtifact("missing " + path.string() + "; run `condadapt " + producer + "` first");
}

Split load_split(const fs::path& dir, const std::string& producer) {
  require_file(dir / "manifest.json", producer);
  Split s{DatasetManifest::load(dir), {}};
  s.samples = load_samples(s.manifest);
  return s;
}

Split data_split(const ArtifactLayout& layout, const std::string& name) {
  return load_split(layout.split(name), "gen-data");
}

void fresh_dir(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
}

std::vector<std::string> condition_names(const TrainConfig& cfg) { return cfg.data.conditions; }

template <typename Fn>
auto timed(const std::string& what, Fn&& fn) {
  spdlog::info("{}: start", what);
  auto result = fn();
  spdlog::info("{}: done", what);
  return result;
}

}  // namespace

fs::path default_artifact_root() {
  const char* env = std::getenv(kArtifactRootEnv);
  return env && *env ? fs::path(env) : fs::path("artifacts");
}

ArtifactLayout::ArtifactLayout(fs::path r)
    : root(std::move(r)),
      data(root / "data"),
      source(root / "source"),
      cgst(root / "cgst"),
      stylized(root / "stylized"),
      stage1(root / "stage1"),
      stage2(root / "stage2"),
      distill(root / "distill"),
      eval(root / "eval"),
      ablate(root / "ablate"),
      plots(root / "plots") {}

fs::path ArtifactLayout::stage2_run(double lambda_p) const { return stage2 / lambda_tag(lambda_p); }

std::string lambda_tag(double lambda_p) { return fmt::format("lp{:g}", lambda_p); }

DataConfig data_config(const TrainConfig& cfg) {
  const auto& d = cfg.data;
  DataConfig out;
  out.height = d.height;
  out.width = d.width;
  out.classes = d.classes;
  out.conditions = d.conditions;
  out.unseen_conditions = d.unseen_conditions;
  out.source_train = d.source_train;
  out.source_eval = d.source_eval;
  out.target_train = d.target_train;
  out.target_eval_per_condition = d.target_eval_per_condition;
  out.unseen_eval = d.unseen_eval;
  out.min_strength = static_cast<float>(d.min_strength);
  out.max_strength = static_cast<float>(d.max_strength);
  out.seed = cfg.seed;
  return out;
}

SegNetConfig segnet_config(const TrainConfig& cfg, HeadVariant variant) {
  SegNetConfig out;
  out.variant = variant;
  out.classes = cfg.data.classes;
  out.conditions = static_cast<int>(cfg.data.conditions.size());
  out.feature_dim = cfg.model.feature_dim;
  out.width = cfg.model.width;
  return out;
}

namespace {

OptimSettings optim_settings(const SgdSection& s) {
  return OptimSettings{s.epochs, s.batch, s.lr, s.momentum, s.weight_decay, s.poly_power};
}

}  // namespace

SourceOnlyConfig source_config(const TrainConfig& cfg) {
  SourceOnlyConfig out;
  out.net = segnet_config(cfg, HeadVariant::mix);
  out.optim = optim_settings(cfg.source.optim);
  out.seed = derive_seed(cfg.seed, kSeedSource);
  return out;
}

TranslatorConfig translator_config(const TrainConfig& cfg) {
  const auto& t = cfg.translator;
  TranslatorConfig out;
  out.conditions = static_cast<int>(cfg.data.conditions.size());
  out.generator_width = t.generator_width;
  out.discriminator_width = t.discriminator_width;
  out.epochs = t.epochs;
  out.batch = t.batch;
  out.lr_generator = t.lr_generator;
  out.lr_discriminator = t.lr_discriminator;
  out.beta1 = t.beta1;
  out.lambda_sc = t.lambda_sc;
  out.seed = derive_seed(cfg.seed, kSeedTranslator);
  return out;
}

Stage1Config stage1_config(const TrainConfig& cfg) {
  const auto& s = cfg.stage1;
  Stage1Config out;
  out.net = segnet_config(cfg, head_variant_from_string(s.variant));
  out.optim = optim_settings(s.optim);
  out.adversarial = adversarial_mode_from_string(s.adversarial);
  out.lambda_adv = s.lambda_adv;
  out.lr_discriminator = s.lr_discriminator;
  out.discriminator_width = s.discriminator_width;
  out.seed = derive_seed(cfg.seed, kSeedStage1);
  return out;
}

Stage2Config stage2_config(const TrainConfig& cfg, double lambda_p) {
  const auto& s = cfg.stage2;
  Stage2Config out;
  out.optim = optim_settings(s.optim);
  out.lambda_p = lambda_p;
  out.pseudo_labels = pseudo_label_mode_from_string(s.pseudo_labels);
  out.target_loss = target_loss_from_string(s.target_loss);
  out.hard_adv = s.hard_adv;
  out.source_all_heads = s.source_all_heads;
  out.normalize = s.normalize;
  out.lambda_adv = s.lambda_adv;
  out.lr_discriminator = s.lr_discriminator;
  out.seed = derive_seed(cfg.seed, kSeedStage2);
  return out;
}

DistillConfig distill_config(const TrainConfig& cfg) {
  DistillConfig out;
  out.optim = optim_settings(cfg.distill.optim);
  out.lambda_p = cfg.distill.lambda_p;
  out.seed = derive_seed(cfg.seed, kSeedDistill);
  return out;
}

void save_segnet(const fs::path& path, const SegNet<float>& net, const std::string& tag) {
  const auto& c = net.config();
  Checkpoint ckpt;
  ckpt.tag = tag;
  ckpt.meta = {{"kind", "segnet"},
               {"variant", to_string(c.variant)},
               {"classes", c.classes},
               {"conditions", c.conditions},
               {"feature_dim", c.feature_dim},
               {"width", c.width}};
  ckpt.tensors = to_double(net.state());
  save_checkpoint(path, ckpt);
}

namespace {

Checkpoint load_kind(const fs::path& path, const std::string& kind) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != kind)
    throw std::runtime_error("checkpoint " + path.string() + " does not hold a " + kind);
  return ckpt;
}

}  // namespace

SegNet<float> load_segnet(const fs::path& path) {
  const Checkpoint ckpt = load_kind(path, "segnet");
  SegNetConfig c;
  try {
    c.variant = head_variant_from_string(ckpt.meta.at("variant").get<std::string>());
    c.classes = ckpt.meta.at("classes").get<int>();
    c.conditions = ckpt.meta.at("conditions").get<int>();
    c.feature_dim = ckpt.meta.at("feature_dim").get<int>();
    c.width = ckpt.meta.at("width").get<int>();
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() + " has malformed metadata: " + e.what());
  }
  Rng rng(0);
  SegNet<float> net(c, rng);
  net.load_state(from_double<float>(ckpt.tensors));
  return net;
}

void save_bank(const fs::path& path, const DiscriminatorBank<float>& bank) {
  const auto state = bank.state();
  Checkpoint ckpt;
  ckpt.tag = "discriminators";
  ckpt.meta = {{"kind", "discriminator-bank"},
               {"classes", state.at("dca.c1.weight").shape().c},
               {"conditions", bank.conditions()},
               {"width", state.at("dca.c1.weight").shape().n}};
  ckpt.tensors = to_double(state);
  save_checkpoint(path, ckpt);
}

DiscriminatorBank<float> load_bank(const fs::path& path) {
  const Checkpoint ckpt = load_kind(path, "discriminator-bank");
  Rng rng(0);
  DiscriminatorBank<float> bank(ckpt.meta.at("classes").get<int>(), ckpt.meta.at("conditions").get<int>(),
                                ckpt.meta.at("width").get<int>(), rng);
  bank.load_state(from_double<float>(ckpt.tensors));
  return bank;
}

void save_translator(const fs::path& path, const TranslatorNets& nets, const TranslatorConfig& cfg) {
  Checkpoint ckpt;
  ckpt.tag = "translator";
  ckpt.meta = {{"kind", "translator"},
               {"conditions", cfg.conditions},
               {"generator_width", cfg.generator_width},
               {"discriminator_width", cfg.discriminator_width}};
  ckpt.tensors = to_double(nets.generator.state("generator"));
  for (auto& [k, v] : to_double(nets.discriminator.state("discriminator"))) ckpt.tensors.emplace(k, v);
  save_checkpoint(path, ckpt);
}

TranslatorNets load_translator(const fs::path& path) {
  const Checkpoint ckpt = load_kind(path, "translator");
  TranslatorConfig cfg;
  cfg.conditions = ckpt.meta.at("conditions").get<int>();
  cfg.generator_width = ckpt.meta.at("generator_width").get<int>();
  cfg.discriminator_width = ckpt.meta.at("discriminator_width").get<int>();
  TranslatorNets nets = make_translator(cfg);
  const auto state = from_double<float>(ckpt.tensors);
  nets.generator.load_state(state, "generator");
  nets.discriminator.load_state(state, "discriminator");
  return nets;
}

PredictMode eval_mode(const TrainConfig& cfg, const SegNet<float>& net) {
  return net.config().variant == HeadVariant::cam ? predict_mode_from_string(cfg.eval.mode) : PredictMode::mean_vote;
}

MetricReport evaluate_into(const SegNet<float>& net, const ArtifactLayout& layout, const std::string& name,
                           PredictMode mode, const fs::path& dir) {
  const Split eval = data_split(layout, "target_eval");
  MetricReport r = evaluate(net, eval.samples, eval.manifest, mode, name);
  write_report(r, dir);
  spdlog::info("{} ({}): target mIoU {:.4f}", name, to_string(mode), r.miou());
  return r;
}

void gen_data(const TrainConfig& cfg, const ArtifactLayout& layout) {
  cfg.validate();
  build_dataset(data_config(cfg), layout.data);
  save_config(cfg, layout.data / "config.json");
  spdlog::info("dataset written to {}", layout.data.string());
}

MetricReport train_source(const TrainConfig& cfg, const ArtifactLayout& layout) {
  const Split src = data_split(layout, "source_train");
  fresh_dir(layout.source);
  save_config(cfg, layout.source / "config.json");
  CurveLog curves;
  SegNet<float> net = timed("source-only training", [&] { return train_source_only(source_config(cfg), src.samples, &curves); });
  save_segnet(layout.source / "model.ckpt", net, "source-only");
  curves.write(layout.source / "curves.csv");
  return evaluate_into(net, layout, "source-only", eval_mode(cfg, net), layout.source);
}

TranslatorSummary train_cgst(const TrainConfig& cfg, const ArtifactLayout& layout) {
  const Split src = data_split(layout, "source_train");
  const Split tgt = data_split(layout, "target_train");
  const Split src_eval = data_split(layout, "source_eval");
  require_file(layout.source / "model.ckpt", "train-source");
  const SegNet<float> segmenter = load_segnet(layout.source / "model.ckpt");
  fresh_dir(layout.cgst);
  save_config(cfg, layout.cgst / "config.json");
  const TranslatorConfig tc = translator_config(cfg);
  CurveLog curves;
  TranslatorNets nets = timed("translator training", [&] { return train_translator(tc, src.samples, tgt.samples, segmenter, &curves); });
  save_translator(layout.cgst / "translator.ckpt", nets, tc);
  curves.write(layout.cgst / "curves.csv");

  TranslatorSummary summary;
  summary.condition_accuracy = condition_accuracy(nets, src_eval.samples);
  const auto stylized = stylize(nets.generator, src_eval.samples, condition_names(cfg));
  const MetricReport r = evaluate(segmenter, stylized, src_eval.manifest, eval_mode(cfg, segmenter), "segmenter-on-translated");
  write_report(r, layout.cgst / "segmenter_on_translated");
  summary.segmenter_miou = r.miou();
  summary.condition_contrast = condition_contrast(nets.generator, src_eval.samples, 0, 1);
  json j = {{"condition_accuracy", summary.condition_accuracy},
            {"conditions", condition_names(cfg)},
            {"segmenter_miou_on_translated", summary.segmenter_miou},
            {"condition_contrast", summary.condition_contrast},
            {"lambda_sc", tc.lambda_sc}};
  write_text(layout.cgst / "summary.json", j.dump(2) + "\n");
  spdlog::info("translator: condition accuracy {}, segmenter mIoU on translated {:.4f}",
               fmt::format("{:.3f}", fmt::join(summary.condition_accuracy, "/")), summary.segmenter_miou);
  return summary;
}

void translate_source(const TrainConfig& cfg, const ArtifactLayout& layout) {
  const Split src = data_split(layout, "source_train");
  require_file(layout.cgst / "translator.ckpt", "train-cgst");
  const TranslatorNets nets = load_translator(layout.cgst / "translator.ckpt");
  const auto stylized = stylize(nets.generator, src.samples, condition_names(cfg));
  save_samples(stylized, layout.stylized, "stylized_source", "train", cfg.data.classes, src.manifest.conditions,
               src.manifest.seen_conditions);
  save_config(cfg, layout.stylized / "config.json");
  spdlog::info("stylized source written to {}", layout.stylized.string());
}

namespace {

Split stylized_split(const ArtifactLayout& layout) { return load_split(layout.stylized, "translate"); }

}  // namespace

MetricReport train_stage1(const TrainConfig& cfg, const ArtifactLayout& layout) {
  const Split sty = stylized_split(layout);
  const Split tgt = data_split(layout, "target_train");
  fresh_dir(layout.stage1);
  save_config(cfg, layout.stage1 / "config.json");
  Stage1Config sc = stage1_config(cfg);
  sc.on_epoch = [&](int, const SegNet<float>& net) { save_segnet(layout.stage1 / "M0.last.ckpt", net, "M0"); };
  CurveLog curves;
  Stage1Result r = timed("stage-1 training", [&] { return stage1_train(sc, sty.samples, tgt.samples, &curves); });
  save_segnet(layout.stage1 / "M0.ckpt", r.net, "M0");
  save_bank(layout.stage1 / "discriminators.ckpt", r.bank);
  fs::remove(layout.stage1 / "M0.last.ckpt");
  curves.write(layout.stage1 / "curves.csv");
  return evaluate_into(r.net, layout, "M0", eval_mode(cfg, r.net), layout.stage1);
}

std::vector<MetricReport> train_stage2(const TrainConfig& cfg, const ArtifactLayout& layout) {
  const Split sty = stylized_split(layout);
  const Split tgt = data_split(layout, "target_train");
  require_file(layout.stage1 / "M0.ckpt", "train-stage1");
  require_file(layout.stage1 / "discriminators.ckpt", "train-stage1");
  const SegNet<float> teacher = load_segnet(layout.stage1 / "M0.ckpt");
  const DiscriminatorBank<float> bank = load_bank(layout.stage1 / "discriminators.ckpt");
  fresh_dir(layout.stage2);
  save_config(cfg, layout.stage2 / "config.json");
  std::vector<MetricReport> out;
  for (double lp : cfg.stage2.lambda_p) {
    const fs::path dir = layout.stage2_run(lp);
    fs::create_directories(dir);
    CurveLog curves;
    const SegNet<float> m1 = timed("stage-2 training " + lambda_tag(lp), [&] {
      return stage2_train(stage2_config(cfg, lp), teacher, bank, sty.samples, tgt.samples, &curves);
    });
    save_segnet(dir / "M1.ckpt", m1, "M1");
    curves.write(dir / "curves.csv");
    out.push_back(evaluate_into(m1, layout, "M1-" + lambda_tag(lp), eval_mode(cfg, m1), dir));
  }
  return out;
}

MetricReport distill(const TrainConfig& cfg, const ArtifactLayout& layout) {
  const Split sty = stylized_split(layout);
  const Split tgt = data_split(layout, "target_train");
  const fs::path teacher_path = layout.stage2_run(cfg.stage2.lambda_p.front()) / "M1.ckpt";
  require_file(teacher_path, "train-stage2");
  const SegNet<float> teacher = load_segnet(teacher_path);
  fresh_dir(layout.distill);
  save_config(cfg, layout.distill / "config.json");
  CurveLog curves;
  const SegNet<float> student = timed("distillation", [&] { return distill_student(distill_config(cfg), teacher, sty.samples, tgt.samples, &curves); });
  save_segnet(layout.distill / "student.ckpt", student, "student");
  curves.write(layout.distill / "curves.csv");
  json j = {{"teacher_parameters", teacher.parameter_count()}, {"student_parameters", student.parameter_count()}};
  write_text(layout.distill / "summary.json", j.dump(2) + "\n");
  return evaluate_into(student, layout, "student", eval_mode(cfg, student), layout.distill);
}

namespace {

struct FoundModel {
  std::string name;
  fs::path path;
};

std::vector<FoundModel> trained_models(const TrainConfig& cfg, const ArtifactLayout& layout) {
  std::vector<FoundModel> out;
  auto add = [&](const std::string& name, const fs::path& p) {
    if (fs::exists(p)) out.push_back({name, p});
  };
  add("source-only", layout.source / "model.ckpt");
  add("M0", layout.stage1 / "M0.ckpt");
  for (double lp : cfg.stage2.lambda_p) add("M1-" + lambda_tag(lp), layout.stage2_run(lp) / "M1.ckpt");
  add("student", layout.distill / "student.ckpt");
  return out;
}

void write_eval_panels(const TrainConfig& cfg, const SegNet<float>& net, PredictMode mode, const Split& eval,
                       const SegNet<float>* teacher, const DiscriminatorBank<float>* bank, const fs::path& dir) {
  if (cfg.eval.panels <= 0) return;
  std::map<int, int> written;
  NoGradGuard guard;
  for (std::size_t i = 0; i < eval.samples.size(); ++i) {
    const Sample& s = eval.samples[i];
    if (written[s.condition.index]++ >= cfg.eval.panels) continue;
    const Batch b = make_batch(eval.samples, {i});
    const Shape is = b.images.shape();
    const auto bundle = net.forward(constant(b.images));
    const Tensor<float> low = bundle_probs(bundle, mode).value();
    const LabelMap pred = argmax_labels(upsample_probs(low, is.h, is.w));
    LabelMap pseudo;
    Tensor<float> d;
    if (teacher) {
      pseudo = assign_pseudolabels(teacher->forward(constant(b.images)), cfg.stage2.lambda_p.front(), is.h, is.w,
                                   pseudo_label_mode_from_string(cfg.stage2.pseudo_labels))
                   .labels;
    }
    if (bank) d = resize_bilinear(ambivalence_map(low, bank->global()), is.h, is.w);
    const std::string stem = fmt::format("{}_{:04d}", s.condition.index < 0 ? std::string("none") : s.condition.name, i);
    write_panels(dir / "panels", stem, pred, b.labels, cfg.data.classes, teacher ? &pseudo : nullptr,
                 bank ? &d : nullptr);
  }
}

}  // namespace

std::vector<MetricReport> eval_models(const TrainConfig& cfg, const ArtifactLayout& layout) {
  const Split eval = data_split(layout, "target_eval");
  const auto models = trained_models(cfg, layout);
  if (models.empty()) throw MissingArtifact("no trained model under " + layout.root.string() + "; run `condadapt train-source` first");
  std::optional<SegNet<float>> teacher;
  std::optional<DiscriminatorBank<float>> bank;
  if (fs::exists(layout.stage1 / "M0.ckpt")) teacher = load_segnet(layout.stage1 / "M0.ckpt");
  if (fs::exists(layout.stage1 / "discriminators.ckpt")) bank = load_bank(layout.stage1 / "discriminators.ckpt");
  fresh_dir(layout.eval);
  save_config(cfg, layout.eval / "config.json");

  std::vector<MetricReport> reports;
  std::string summary = "model,mode,condition,unseen,miou\n";
  std::vector<std::string> categories;
  std::map<std::string, std::vector<double>> bars;
  for (const auto& m : models) {
    const SegNet<float> net = load_segnet(m.path);
    std::vector<PredictMode> modes{eval_mode(cfg, net)};
    if (net.config().variant == HeadVariant::cam)
      for (PredictMode extra : {PredictMode::fused, PredictMode::ca_only})
        if (extra != modes.front()) modes.push_back(extra);
    for (PredictMode mode : modes) {
      AmbivalenceFn amb;
      if (bank && bank->classes() == net.config().classes)
        amb = [&](const Tensor<float>& probs) { return ambivalence_map(probs, bank->global()); };
      const fs::path dir = layout.eval / m.name / to_string(mode);
      MetricReport r = evaluate(net, eval.samples, eval.manifest, mode, m.name, amb);
      write_report(r, dir);
      const bool self_trained = m.name.rfind("M1", 0) == 0 || m.name == "M0";
      write_eval_panels(cfg, net, mode, eval, self_trained && teacher ? &*teacher : nullptr, bank ? &*bank : nullptr,
                        dir);
      if (categories.empty()) {
        for (const auto& c : r.conditions) categories.push_back(c.condition);
        categories.push_back("overall");
      }
      std::vector<double> values;
      for (const auto& c : r.conditions) {
        summary += fmt::format("{},{},{},{},{:.6f}\n", m.name, to_string(mode), c.condition, c.unseen ? 1 : 0, c.iou.mean);
        values.push_back(c.iou.mean * 100.0);
      }
      summary += fmt::format("{},{},overall,0,{:.6f}\n", m.name, to_string(mode), r.miou());
      values.push_back(r.miou() * 100.0);
      if (mode == modes.front() && values.size() == categories.size()) bars.emplace(m.name, values);
      spdlog::info("{} ({}): target mIoU {:.4f}", m.name, to_string(mode), r.miou());
      reports.push_back(std::move(r));
    }
  }
  write_text(layout.eval / "summary.csv", summary);
  write_text(layout.eval / "miou_by_condition.svg", bar_chart_svg("Target mIoU by condition (%)", categories, bars));
  return reports;
}

const std::vector<std::string>& ablation_blocks() {
  static const std::vector<std::string> blocks{"cam", "csat", "self-training", "ambivalence", "lambda-p"};
  return blocks;
}

namespace {

struct Cell {
  std::string name;
  MetricReport report;
};

class AblationRunner {
 public:
  AblationRunner(const TrainConfig& cfg, const ArtifactLayout& layout, const std::string& block)
      : cfg_(cfg), layout_(layout), dir_(layout.ablate / block), sty_(stylized_split(layout)),
        tgt_(data_split(layout, "target_train")) {
    fresh_dir(dir_);
    save_config(cfg, dir_ / "config.json");
  }

  Stage1Result stage1(const std::string& cell, HeadVariant variant, AdversarialMode mode) {
    Stage1Config sc = stage1_config(cfg_);
    sc.net = segnet_config(cfg_, variant);
    sc.adversarial = mode;
    CurveLog curves;
    Stage1Result r = timed("ablation cell " + cell, [&] { return stage1_train(sc, sty_.samples, tgt_.samples, &curves); });
    finish(cell, r.net, curves);
    save_bank(dir_ / cell / "discriminators.ckpt", r.bank);
    return r;
  }

  void stage2(const std::string& cell, const Stage1Result& m0, const Stage2Config& sc) {
    CurveLog curves;
    const SegNet<float> m1 = timed("ablation cell " + cell, [&] { return stage2_train(sc, m0.net, m0.bank, sty_.samples, tgt_.samples, &curves); });
    finish(cell, m1, curves);
  }

  void write_summary() const {
    std::string csv = "cell,miou";
    const auto& conds = cells_.empty() ? std::vector<ConditionMetrics>{} : cells_.front().report.conditions;
    for (const auto& c : conds) csv += "," + c.condition;
    csv += "\n";
    std::map<std::string, std::vector<double>> bars;
    std::vector<std::string> categories;
    for (const auto& c : conds) categories.push_back(c.condition);
    categories.push_back("overall");
    for (const auto& cell : cells_) {
      csv += fmt::format("{},{:.6f}", cell.name, cell.report.miou());
      std::vector<double> values;
      for (const auto& c : cell.report.conditions) {
        csv += fmt::format(",{:.6f}", c.iou.mean);
        values.push_back(c.iou.mean * 100.0);
      }
      values.push_back(cell.report.miou() * 100.0);
      csv += "\n";
      if (values.size() == categories.size()) bars.emplace(cell.name, values);
    }
    write_text(dir_ / "summary.csv", csv);
    write_text(dir_ / "summary.svg", bar_chart_svg("Ablation " + dir_.filename().string() + ": target mIoU (%)",
                                                   categories, bars));
  }

 private:
  void finish(const std::string& cell, const SegNet<float>& net, const CurveLog& curves) {
    const fs::path dir = dir_ / cell;
    fs::create_directories(dir);
    save_segnet(dir / "model.ckpt", net, cell);
    if (!curves.rows().empty()) curves.write(dir / "curves.csv");
    cells_.push_back({cell, evaluate_into(net, layout_, cell, eval_mode(cfg_, net), dir)});
  }

  const TrainConfig& cfg_;
  const ArtifactLayout& layout_;
  fs::path dir_;
  Split sty_, tgt_;
  std::vector<Cell> cells_;
};

}  // namespace

void ablate(const TrainConfig& cfg, const ArtifactLayout& layout, const std::string& block) {
  const auto& blocks = ablation_blocks();
  if (std::find(blocks.begin(), blocks.end(), block) == blocks.end())
    throw std::invalid_argument("unknown ablation block '" + block + "'");
  AblationRunner run(cfg, layout, block);
  const AdversarialMode csat = AdversarialMode::csat;
  auto stage2_cfg = [&](double lp, PseudoLabelMode labels, TargetLoss loss, bool hard) {
    Stage2Config sc = stage2_config(cfg, lp);
    sc.pseudo_labels = labels;
    sc.target_loss = loss;
    sc.hard_adv = hard;
    return sc;
  };

  if (block == "cam") {
    for (HeadVariant v : {HeadVariant::mix, HeadVariant::sep, HeadVariant::sm, HeadVariant::cam})
      run.stage1(to_string(v), v, csat);
  } else if (block == "csat") {
    const Stage1Result dat = run.stage1("dat-s1", HeadVariant::cam, AdversarialMode::dat);
    const Stage1Result cs = run.stage1("csat-s1", HeadVariant::cam, csat);
    const double lp = cfg.stage2.lambda_p.front();
    run.stage2("dat-s2", dat, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::weighted, true));
    run.stage2("csat-s2", cs, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::weighted, true));
  } else if (block == "self-training") {
    // Plain CE at a strict threshold; the baseline is the stage-one model.
    const double lp = 0.9;
    const Stage1Result m0 = run.stage1("baseline", HeadVariant::cam, csat);
    run.stage2("maxv", m0, stage2_cfg(lp, PseudoLabelMode::maxv, TargetLoss::plain, false));
    run.stage2("meanv", m0, stage2_cfg(lp, PseudoLabelMode::meanv, TargetLoss::plain, false));
    run.stage2("apla", m0, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::plain, false));
  } else if (block == "ambivalence") {
    const double lp = 0.6;
    const Stage1Result m0 = run.stage1("stage1", HeadVariant::cam, csat);
    run.stage2("plain-ce", m0, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::plain, false));
    run.stage2("weighted-ce", m0, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::weighted, false));
    run.stage2("weighted-ce+hard-adv", m0, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::weighted, true));
  } else {
    const Stage1Result m0 = run.stage1("stage1", HeadVariant::cam, csat);
    for (double lp : cfg.stage2.lambda_p) {
      const std::string t = lambda_tag(lp);
      run.stage2("plain-ce-" + t, m0, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::plain, false));
      run.stage2("weighted-ce-" + t, m0, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::weighted, false));
      run.stage2("weighted-ce+hard-adv-" + t, m0, stage2_cfg(lp, PseudoLabelMode::apla, TargetLoss::weighted, true));
    }
  }
  run.write_summary();
}

void run_pipeline(const TrainConfig& cfg, const ArtifactLayout& layout) {
  gen_data(cfg, layout);
  train_source(cfg, layout);
  train_cgst(cfg, layout);
  translate_source(cfg, layout);
  train_stage1(cfg, layout);
  train_stage2(cfg, layout);
  distill(cfg, layout);
  eval_models(cfg, layout);
  plot_artifacts(layout);
}

void plot_artifacts(const ArtifactLayout& layout) {
  if (!fs::exists(layout.root)) throw MissingArtifact("no artifacts under " + layout.root.string());
  std::vector<fs::path> found;
  fresh_dir(layout.plots);
  for (const auto& entry : fs::recursive_directory_iterator(layout.root))
    if (entry.is_regular_file() && entry.path().filename() == "curves.csv") found.push_back(entry.path());
  std::sort(found.begin(), found.end());
  for (const auto& path : found) {
    const CurveLog log = CurveLog::read(path);
    std::map<std::string, Series> series;
    for (const auto& row : log.rows()) series[row.name].emplace_back(static_cast<double>(row.step), row.value);
    const fs::path rel = fs::relative(path.parent_path(), layout.root);
    std::string stem = rel.generic_string();
    std::replace(stem.begin(), stem.end(), '/', '_');
    write_text(layout.plots / (stem + "_curves.svg"), line_chart_svg(rel.generic_string() + " training curves", series));
  }
  spdlog::info("plotted {} curve files", found.size());
}

}  // namespace condadapt
