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
// Acceptance checks. Each TEST_CASE is one criterion and prints a single
// "ACCEPTANCE <id> PASS|FAIL ..." line; ctest runs them one per entry.
//
// The toy-scale criteria (4 to 7) read results written by the "toy runs"
// case, which trains three seeds of the default configuration under
// $CONDADAPT_ACCEPTANCE_DIR.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "condadapt/checkpoint.hpp"
#include "condadapt/losses.hpp"
#include "condadapt/pipeline.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace condadapt;
using condadapt::testing::grad_check;
using condadapt::testing::random_tensor;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::uint64_t> kSeeds{1, 2, 3};
constexpr double kOracleTol = 1e-6;
constexpr int kOracleTrials = 100;

void verdict(const std::string& id, bool pass, const std::string& detail) {
  const std::string line = fmt::format("ACCEPTANCE {} {} {}", id, pass ? "PASS" : "FAIL", detail);
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
  INFO(line);
  CHECK(pass);
}

fs::path work_dir() {
  const char* env = std::getenv("CONDADAPT_ACCEPTANCE_DIR");
  return env ? fs::path(env) : fs::temp_directory_path() / "condadapt_acceptance";
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Worst absolute deviation over a set of comparisons.
struct Worst {
  double value = 0.0;
  int count = 0;
  void add(double a, double b) {
    value = std::max(value, std::abs(a - b));
    ++count;
  }
};

std::vector<int> random_conditions(int n, int K, std::mt19937_64& rng) {
  std::vector<int> out;
  for (int i = 0; i < n; ++i) out.push_back(int(rng() % std::uint64_t(K)));
  return out;
}

PredictionBundle<double> bundle_of(const std::vector<Tensor<double>>& heads, const Tensor<double>& ca,
                                   const Tensor<double>* attention = nullptr) {
  PredictionBundle<double> b;
  for (const auto& h : heads) b.probs.push_back(constant(h));
  b.ca_probs = constant(ca);
  if (attention) b.attention = constant(*attention);
  return b;
}

Tensor<double> logits_of(const PatchDiscriminator<double>& d, const Tensor<double>& probs) {
  NoGradGuard guard;
  return d(constant(probs)).value();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("missing " + p.string() + "; the toy runs did not complete");
  return json::parse(in);
}

std::vector<json> toy_results() {
  std::vector<json> out;
  for (auto seed : kSeeds) out.push_back(read_json(work_dir() / fmt::format("seed{}", seed) / "results.json"));
  return out;
}

std::vector<double> column(const std::vector<json>& runs, const std::string& key) {
  std::vector<double> v;
  for (const auto& r : runs) v.push_back(r.at(key).get<double>());
  return v;
}

std::string list(const std::vector<double>& v) { return fmt::format("[{:.4f}]", fmt::join(v, ", ")); }

void link_inputs(const ArtifactLayout& from, const ArtifactLayout& to, const std::vector<fs::path ArtifactLayout::*>& dirs) {
  fs::remove_all(to.root);
  fs::create_directories(to.root);
  for (auto member : dirs) fs::create_directory_symlink(fs::absolute(from.*member), to.*member);
}

}  // namespace

TEST_CASE("criterion 1: loss terms match scalar references") {
  std::mt19937_64 rng(101);
  Worst cgan, cls, sc, adv, src, plain, weighted, hard;
  for (int t = 0; t < kOracleTrials; ++t) {
    const int B = 1 + int(rng() % 4), K = 2 + int(rng() % 3), L = 2 + int(rng() % 5), h = 4 + 2 * int(rng() % 3);

    auto real = oracle::uniform({B, 1, 3, 3}, rng, -5, 5);
    auto fake = oracle::uniform({B, 1, 3, 3}, rng, -5, 5);
    cgan.add(cgan_loss(constant(real), constant(fake)).value().item(), oracle::cgan(real, fake));

    auto rl = oracle::uniform({B, K, 1, 1}, rng, -4, 4), fl = oracle::uniform({B, K, 1, 1}, rng, -4, 4);
    auto rc = random_conditions(B, K, rng), fc = random_conditions(B, K, rng);
    cls.add(cls_loss(constant(rl), rc, constant(fl), fc).value().item(), oracle::cls(rl, rc, fl, fc));

    std::vector<Tensor<double>> heads;
    for (int i = 0; i < K; ++i) heads.push_back(oracle::simplex({B, L, h, h}, rng));
    auto ca = oracle::simplex({B, L, h, h}, rng);
    auto labels = oracle::labels({B, 1, h, h}, L, rng, 0.3);
    auto conds = random_conditions(B, K, rng);
    if (labeled_count(labels) > 0) {
      sc.add(sc_loss(constant(ca), labels).value().item(), oracle::sc(ca, labels));
      src.add(source_ce_loss(bundle_of(heads, ca), labels, conds).value().item(),
              oracle::source_ce(ca, heads, labels, conds));
    }

    Rng init(std::uint64_t(t) + 1);
    DiscriminatorBank<double> bank(L, K, 4, init);
    std::vector<Tensor<double>> head_logits;
    for (int i = 0; i < K; ++i) head_logits.push_back(logits_of(bank.condition(i), heads[std::size_t(i)]));
    adv.add(csat_adv_loss(bundle_of(heads, ca), conds, bank).value().item(),
            oracle::adversarial(logits_of(bank.global(), ca), head_logits,
                                [&](int n, int i) { return conds[std::size_t(n)] == i; }));

    auto d = oracle::uniform({B, 1, h, h}, rng, 0.01, 0.99);
    plain.add(plain_ce(constant(ca), labels).value().item(), oracle::weighted_nll(ca, labels, nullptr).mean());
    weighted.add(weighted_ce(constant(ca), labels, d).value().item(), oracle::weighted_nll(ca, labels, &d).mean());
    hard.add(hard_region_adv(constant(d), labels).value().item(), oracle::hard_region(d, labels));
  }

  // Analytic values.
  const int L = 5;
  Tensor<double> uniform(Shape{2, L, 4, 4}, 1.0 / L);
  LabelMap labels(Shape{2, 1, 4, 4}, 2);
  labels(0, 0, 0, 0) = 0;
  Tensor<double> ones(Shape{2, 1, 4, 4}, 1.0);
  std::mt19937_64 r2(7);
  auto probs = oracle::simplex({2, L, 4, 4}, r2);
  LabelMap full(Shape{2, 1, 4, 4}, 3);
  const double ce_uniform = plain_ce(constant(uniform), labels).value().item();
  const double sc_uniform = sc_loss(constant(uniform), labels).value().item();
  const double w_vs_p = std::abs(weighted_ce(constant(probs), labels, ones).value().item() -
                                 plain_ce(constant(probs), labels).value().item());
  const double hard_empty = hard_region_adv(constant(ones), full).value().item();
  const bool analytic = std::abs(ce_uniform - std::log(double(L))) < 1e-12 &&
                        std::abs(sc_uniform - std::log(double(L))) < 1e-12 && w_vs_p == 0.0 && hard_empty == 0.0;

  const double worst = std::max({cgan.value, cls.value, sc.value, adv.value, src.value, plain.value, weighted.value,
                                 hard.value});
  const int fewest = std::min({cgan.count, cls.count, sc.count, adv.count, src.count, plain.count, weighted.count,
                               hard.count});
  verdict("1", worst <= kOracleTol && fewest >= kOracleTrials * 9 / 10 && analytic,
          fmt::format("worst |tape - reference| {:.2e} over >= {} trials per term (tol {:.0e}); analytic spot values {}",
                      worst, fewest, kOracleTol, analytic ? "exact" : "WRONG"));
}

TEST_CASE("criterion 2: pseudo-labels are sound and monotone") {
  std::mt19937_64 rng(202);
  bool equal = true, monotone = true;
  int trials = 0;
  for (int t = 0; t < kOracleTrials; ++t) {
    const int B = 1 + int(rng() % 3), K = 2 + int(rng() % 3), L = 2 + int(rng() % 5), h = 4 + int(rng() % 5);
    std::vector<Tensor<double>> heads;
    for (int i = 0; i < K; ++i) heads.push_back(oracle::simplex({B, L, h, h}, rng));
    auto ca = oracle::simplex({B, L, h, h}, rng);
    auto attention = oracle::simplex({B, K, h, h}, rng);
    const auto bundle = bundle_of(heads, ca, &attention);
    const auto fused = oracle::fuse(attention, heads, ca);
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    for (double lambda : {0.5, 0.6, 0.7, 0.8, 0.9}) {
      const auto pack = assign_pseudolabels(bundle, lambda, h, h);
      equal = equal && pack.labels == oracle::threshold(fused, lambda);
      monotone = monotone && pack.labeled() <= previous;
      previous = pack.labeled();
    }
    ++trials;
  }
  verdict("2", equal && monotone,
          fmt::format("{} random teachers x lambda_p 0.5..0.9: oracle equality {}, labeled count non-increasing {}",
                      trials, equal ? "yes" : "NO", monotone ? "yes" : "NO"));
}

TEST_CASE("criterion 3: composite objectives match finite differences") {
  // Stage-one objective: source CE + lambda_adv * condition-selective adversarial loss.
  Rng init(303);
  SegNetConfig cfg;
  cfg.classes = 3;
  cfg.conditions = 2;
  cfg.feature_dim = 3;
  cfg.width = 4;
  SegNet<double> net(cfg, init);
  DiscriminatorBank<double> bank(3, 2, 3, init);
  bank.set_trainable(false);
  std::mt19937_64 rng(303);
  auto src_images = constant(random_tensor({2, 3, 16, 16}, rng, 0, 1));
  auto tgt_images = constant(random_tensor({2, 3, 16, 16}, rng, 0, 1));
  auto labels = oracle::labels({2, 1, 16, 16}, 3, rng, 0.2);
  const std::vector<int> src_conds{0, 1}, tgt_conds{1, 1};
  auto stage1 = [&] {
    auto ce = source_ce_loss(net.forward(src_images), labels, src_conds);
    auto adv = csat_adv_loss(net.forward(tgt_images), tgt_conds, bank);
    return add(ce, scale(adv, kDefaultLambdaAdv));
  };
  auto r1 = grad_check(stage1, net.parameters(), 400, 1, 1e-3);

  // Translator objective: cGAN + cls + lambda_sc * semantic consistency
  // through a frozen segmenter.
  Generator<double> g(2, 3, init);
  StyleDiscriminator<double> d(2, 3, init);
  SegNetConfig seg_cfg = cfg;
  seg_cfg.variant = HeadVariant::mix;
  SegNet<double> seg(seg_cfg, init);
  seg.set_trainable(false);
  {
    auto state = g.state();
    for (auto& [name, t] : state) t.array() += random_tensor(t.shape(), rng, -0.05, 0.05).array();
    g.load_state(state);
  }
  auto images = constant(random_tensor({2, 3, 16, 16}, rng, 0.3, 0.7));
  auto target = constant(random_tensor({2, 3, 16, 16}, rng, 0, 1));
  const std::vector<int> conds{0, 1};
  auto cgst = [&] {
    auto fake = g(images, conds);
    auto real_out = d(target);
    auto fake_out = d(fake);
    auto seg_probs = resize_bilinear(bundle_probs(seg.forward(fake), PredictMode::mean_vote), 16, 16);
    return cgst_objective(cgan_loss(real_out.realism, fake_out.realism),
                          cls_loss(real_out.condition, conds, fake_out.condition, conds), sc_loss(seg_probs, labels),
                          kDefaultLambdaSc);
  };
  auto params = g.parameters();
  for (auto& p : d.parameters()) params.push_back(p);
  auto r2 = grad_check(cgst, params, 400, 2, 1e-3);

  verdict("3", r1.pass_fraction() >= 0.95 && r2.pass_fraction() >= 0.95,
          fmt::format("stage-one objective {:.1f}% of {} coordinates within 1e-3; translator objective {:.1f}% of {}",
                      100 * r1.pass_fraction(), r1.checked, 100 * r2.pass_fraction(), r2.checked));
}

TEST_CASE("toy runs") {
  spdlog::set_level(spdlog::level::warn);
  const auto start = std::chrono::steady_clock::now();
  for (auto seed : kSeeds) {
    const fs::path root = work_dir() / fmt::format("seed{}", seed);
    fs::remove_all(root);
    TrainConfig cfg;
    cfg.seed = seed;
    const ArtifactLayout main(root / "main");
    json out;
    gen_data(cfg, main);
    out["source_only"] = train_source(cfg, main).miou();
    const auto cgst = train_cgst(cfg, main);
    out["condition_accuracy"] = cgst.condition_accuracy;
    out["translated_miou_sc5"] = cgst.segmenter_miou;
    translate_source(cfg, main);
    out["stage1"] = train_stage1(cfg, main).miou();
    out["stage2"] = train_stage2(cfg, main).front().miou();
    out["student"] = distill(cfg, main).miou();

    const ArtifactLayout no_sc(root / "no_sc");
    link_inputs(main, no_sc, {&ArtifactLayout::data, &ArtifactLayout::source});
    TrainConfig cfg0 = cfg;
    cfg0.translator.lambda_sc = 0.0;
    out["translated_miou_sc0"] = train_cgst(cfg0, no_sc).segmenter_miou;

    const ArtifactLayout plain(root / "plain");
    link_inputs(main, plain, {&ArtifactLayout::data, &ArtifactLayout::stylized, &ArtifactLayout::stage1});
    TrainConfig cfgp = cfg;
    cfgp.stage2.target_loss = "plain";
    cfgp.stage2.hard_adv = false;
    out["stage2_plain"] = train_stage2(cfgp, plain).front().miou();

    const SegNet<float> m0 = load_segnet(main.stage1 / "M0.ckpt");
    const DiscriminatorBank<float> bank = load_bank(main.stage1 / "discriminators.ckpt");
    const auto manifest = DatasetManifest::load(main.split("target_eval"));
    const auto report = evaluate(m0, load_samples(manifest), manifest, PredictMode::fused, "M0",
                                 [&](const Tensor<float>& p) { return ambivalence_map(p, bank.global()); });
    out["d_correct"] = report.ambivalence.mean_correct;
    out["d_wrong"] = report.ambivalence.mean_wrong;
    out["d_point_biserial"] = report.ambivalence.point_biserial;

    std::ofstream(root / "results.json") << out.dump(2) << "\n";
    std::printf("seed %llu: %s\n", static_cast<unsigned long long>(seed), out.dump().c_str());
    std::fflush(stdout);
  }
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  json timing{{"minutes", minutes}};
  std::ofstream(work_dir() / "timing.json") << timing.dump() << "\n";
  std::printf("toy runs took %.1f min\n", minutes);
}

TEST_CASE("criterion 4: adaptation stages improve in order") {
  const auto runs = toy_results();
  const double minutes = read_json(work_dir() / "timing.json").at("minutes").get<double>();
  const auto src = column(runs, "source_only"), s1 = column(runs, "stage1"), s2 = column(runs, "stage2"),
             plain = column(runs, "stage2_plain");
  const double m_src = median(src), m_s1 = median(s1), m_s2 = median(s2), m_plain = median(plain);
  const bool a = m_s1 - m_src >= 0.05, b = m_s2 >= m_s1, c = m_s2 >= m_plain, fast = minutes < 60.0;
  verdict("4", a && b && c && fast,
          fmt::format("median mIoU source-only {:.4f}, stage-1 {:.4f} ({}{:+.1f} pts), stage-2 {:.4f} ({}), "
                      "plain stage-2 {:.4f} ({}); runtime {:.1f} min ({})",
                      m_src, m_s1, a ? "" : "FAIL ", 100 * (m_s1 - m_src), m_s2, b ? ">= stage-1" : "FAIL < stage-1",
                      m_plain, c ? "<= stage-2" : "FAIL > stage-2", minutes, fast ? "< 60" : "FAIL >= 60"));
  MESSAGE("per seed: source " << list(src) << " stage-1 " << list(s1) << " stage-2 " << list(s2) << " plain "
                              << list(plain));
}

TEST_CASE("criterion 5: discriminator confidence tracks correctness") {
  const auto runs = toy_results();
  const auto correct = column(runs, "d_correct"), wrong = column(runs, "d_wrong");
  std::vector<double> gaps;
  bool all = true;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    gaps.push_back(correct[i] - wrong[i]);
    all = all && gaps.back() > 0;
  }
  verdict("5", median(gaps) > 0,
          fmt::format("mean d correct - mean d wrong per seed {} (median {:+.4f}; every seed positive: {})", list(gaps),
                      median(gaps), all ? "yes" : "no"));
}

TEST_CASE("criterion 6: translator honours conditions and semantics") {
  const auto runs = toy_results();
  double worst = 1.0;
  for (const auto& r : runs)
    for (double a : r.at("condition_accuracy").get<std::vector<double>>()) worst = std::min(worst, a);
  const double sc5 = median(column(runs, "translated_miou_sc5")), sc0 = median(column(runs, "translated_miou_sc0"));
  verdict("6", worst >= 0.9 && sc0 < sc5,
          fmt::format("lowest per-condition classifier accuracy {:.3f} (>= 0.9); frozen segmenter mIoU on translated "
                      "images median {:.4f} with lambda_sc=5 vs {:.4f} with lambda_sc=0",
                      worst, sc5, sc0));
}

TEST_CASE("criterion 7: the single-head student stays close to its teacher") {
  const auto runs = toy_results();
  std::vector<double> gaps;
  for (const auto& r : runs) gaps.push_back(r.at("stage2").get<double>() - r.at("student").get<double>());
  const double gap = median(gaps);
  verdict("7", gap <= 0.02,
          fmt::format("teacher - student mIoU per seed {} (median {:+.2f} pts, limit 2)", list(gaps), 100 * gap));
}

TEST_CASE("criterion 8: commands reproduce metric files byte for byte") {
  spdlog::set_level(spdlog::level::warn);
  TrainConfig cfg;
  cfg.seed = 11;
  std::vector<std::string> mismatched;
  std::size_t compared = 0;
  const fs::path base = work_dir() / "determinism";
  fs::remove_all(base);
  for (const char* run : {"a", "b"}) {
    const ArtifactLayout layout(base / run);
    gen_data(cfg, layout);
    train_source(cfg, layout);
    eval_models(cfg, layout);
  }
  for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), base / "a");
    const std::string ext = rel.extension().string();
    if (ext != ".csv" && ext != ".ckpt" && ext != ".json") continue;
    ++compared;
    if (slurp(entry.path()) != slurp(base / "b" / rel)) mismatched.push_back(rel.string());
  }
  verdict("8", mismatched.empty() && compared >= 5,
          fmt::format("{} csv/json/checkpoint files compared across two identical runs; {} differ{}", compared,
                      mismatched.size(), mismatched.empty() ? "" : " (first: " + mismatched.front() + ")"));
  fs::remove_all(base);
}
