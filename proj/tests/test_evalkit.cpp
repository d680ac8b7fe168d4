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

#include "condadapt/evalkit.hpp"
#include "fixtures.hpp"
#include "scratch_dir.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace condadapt;

namespace {

// One pixel per (gt, pred) count.
std::pair<LabelMap, LabelMap> from_counts(const std::vector<std::vector<int>>& counts) {
  std::vector<int> gt, pred;
  for (std::size_t r = 0; r < counts.size(); ++r)
    for (std::size_t c = 0; c < counts[r].size(); ++c)
      for (int k = 0; k < counts[r][c]; ++k) {
        gt.push_back(int(r) + 1);
        pred.push_back(int(c) + 1);
      }
  LabelMap g(Shape{1, 1, 1, int(gt.size())}), p(Shape{1, 1, 1, int(pred.size())});
  for (std::size_t i = 0; i < gt.size(); ++i) {
    g[i] = gt[i];
    p[i] = pred[i];
  }
  return {p, g};
}

LabelMap random_labels(Shape s, int classes, std::mt19937_64& rng, bool allow_zero) {
  std::uniform_int_distribution<int> d(allow_zero ? 0 : 1, classes);
  LabelMap t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = d(rng);
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("confusion counts and merges") {
  LabelMap gt(Shape{1, 1, 1, 4}), pred(Shape{1, 1, 1, 4});
  gt[0] = 1, gt[1] = 2, gt[2] = 0, gt[3] = 2;
  pred[0] = 1, pred[1] = 1, pred[2] = 2, pred[3] = 2;
  auto c = confusion(pred, gt, 2);
  CHECK(c.total() == 3);
  CHECK(c.counts()(0, 0) == 1);
  CHECK(c.counts()(1, 0) == 1);
  CHECK(c.counts()(1, 1) == 1);

  std::mt19937_64 rng(1);
  auto p1 = random_labels({2, 1, 5, 5}, 3, rng, false), g1 = random_labels({2, 1, 5, 5}, 3, rng, true);
  auto p2 = random_labels({1, 1, 5, 5}, 3, rng, false), g2 = random_labels({1, 1, 5, 5}, 3, rng, true);
  Confusion merged = confusion(p1, g1, 3);
  merged.merge(confusion(p2, g2, 3));
  Confusion running(3);
  running.add(p1, g1);
  running.add(p2, g2);
  CHECK(merged == running);
  CHECK_THROWS(merged.merge(Confusion(4)));
  LabelMap bad = p1;
  bad[0] = 4;
  CHECK_THROWS(running.add(bad, g1));
}

TEST_CASE("IoU on a hand-built confusion matrix") {
  auto [pred, gt] = from_counts({{5, 1, 0}, {0, 4, 2}, {1, 0, 7}});
  auto r = miou(confusion(pred, gt, 3));
  REQUIRE(r.per_class.size() == 3);
  CHECK(r.per_class[0] == doctest::Approx(5.0 / 7.0));
  CHECK(r.per_class[1] == doctest::Approx(4.0 / 7.0));
  CHECK(r.per_class[2] == doctest::Approx(7.0 / 10.0));
  CHECK(r.mean == doctest::Approx((5.0 / 7.0 + 4.0 / 7.0 + 0.7) / 3.0));
}

TEST_CASE("perfect, disjoint and absent classes") {
  auto [p, g] = from_counts({{3, 0, 0}, {0, 2, 0}, {0, 0, 0}});
  auto perfect = miou(confusion(p, g, 3));
  CHECK(perfect.per_class[0] == 1.0);
  CHECK(perfect.per_class[1] == 1.0);
  CHECK(std::isnan(perfect.per_class[2]));
  CHECK(perfect.mean == 1.0);

  auto [dp, dg] = from_counts({{0, 3}, {2, 0}});
  auto disjoint = miou(confusion(dp, dg, 2));
  CHECK(disjoint.per_class[0] == 0.0);
  CHECK(disjoint.mean == 0.0);
  CHECK(std::isnan(miou(Confusion(3)).mean));
}

TEST_CASE("mIoU is invariant to relabeling classes consistently") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto pred = random_labels({2, 1, 6, 6}, 4, rng, false);
    auto gt = random_labels({2, 1, 6, 6}, 4, rng, true);
    std::vector<int> perm{0, 1, 2, 3, 4};
    std::shuffle(perm.begin() + 1, perm.end(), rng);
    LabelMap pp = pred, pg = gt;
    for (std::size_t i = 0; i < pp.size(); ++i) {
      pp[i] = perm[std::size_t(pred[i])];
      pg[i] = perm[std::size_t(gt[i])];
    }
    CHECK(miou(confusion(pred, gt, 4)).mean == doctest::Approx(miou(confusion(pp, pg, 4)).mean).epsilon(1e-12));
  }
}

TEST_CASE("point-biserial correlation") {
  CHECK(point_biserial({1, 1, 0, 0}, {true, true, false, false}) == doctest::Approx(1.0));
  CHECK(point_biserial({0, 0, 1, 1}, {true, true, false, false}) == doctest::Approx(-1.0));
  CHECK(std::isnan(point_biserial({1, 2, 3}, {true, true, true})));
  CHECK(std::isnan(point_biserial({2, 2, 2}, {true, false, true})));
  // Equal to the Pearson correlation with a 0/1 outcome.
  std::vector<double> s{0.1, 0.4, 0.35, 0.8, 0.9, 0.2};
  std::vector<bool> o{false, true, false, true, true, false};
  double ms = 0, mo = 0;
  for (std::size_t i = 0; i < s.size(); ++i) ms += s[i] / 6, mo += (o[i] ? 1.0 : 0.0) / 6;
  double cov = 0, vs = 0, vo = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double os = o[i] ? 1.0 : 0.0;
    cov += (s[i] - ms) * (os - mo);
    vs += (s[i] - ms) * (s[i] - ms);
    vo += (os - mo) * (os - mo);
  }
  CHECK(point_biserial(s, o) == doctest::Approx(cov / std::sqrt(vs * vo)).epsilon(1e-12));
}

TEST_CASE("reports are reproducible and mark unseen conditions") {
  condadapt::testing::ScratchDir dir("evalkit");
  auto samples = condadapt::testing::tiny_samples(6, Domain::target, 16, 7);
  auto manifest = save_samples(samples, dir.path() / "eval", "eval", "eval", 6,
                               condadapt::testing::fixture_conditions(), 2);
  auto loaded = load_samples(manifest);
  Rng rng(3);
  SegNetConfig cfg;
  cfg.feature_dim = 4;
  cfg.width = 4;
  SegNet<float> net(cfg, rng);
  auto half = [](const Tensor<float>& p) {
    return Tensor<float>(Shape{p.shape().n, 1, p.shape().h, p.shape().w}, 0.5f);
  };
  auto a = evaluate(net, loaded, manifest, PredictMode::fused, "m", half);
  auto b = evaluate(net, loaded, manifest, PredictMode::fused, "m", half, 4);
  CHECK(report_csv(a) == report_csv(b));
  REQUIRE(a.conditions.size() == 3);
  CHECK_FALSE(a.conditions[0].unseen);
  CHECK(a.conditions[2].unseen);
  CHECK(a.conditions[2].condition == "rain");
  Confusion seen(6);
  seen.merge(a.conditions[0].confusion);
  seen.merge(a.conditions[1].confusion);
  CHECK(a.overall == seen);
  CHECK(a.has_ambivalence);
  CHECK(a.ambivalence.correct_pixels + a.ambivalence.wrong_pixels == std::size_t(seen.total()));
  CHECK(report_csv(a).rfind("model,mode,condition,unseen,samples,class,iou\n", 0) == 0);
  CHECK(report_csv(a).find("m,fused,rain,1,2,miou,") != std::string::npos);

  write_report(a, dir.path() / "r1");
  write_report(b, dir.path() / "r2");
  CHECK(slurp(dir.path() / "r1" / "metrics.csv") == slurp(dir.path() / "r2" / "metrics.csv"));
  CHECK(std::filesystem::exists(dir.path() / "r1" / "metrics.txt"));
}

TEST_CASE("region map shades hard, wrong and right pixels") {
  LabelMap pseudo(Shape{1, 1, 1, 3}), gt(Shape{1, 1, 1, 3});
  pseudo[0] = 0, pseudo[1] = 2, pseudo[2] = 3;
  gt[0] = 1, gt[1] = 1, gt[2] = 3;
  auto m = region_map(pseudo, gt);
  CHECK(m[0] == 0.0f);
  CHECK((m[1] > 0.0f && m[1] < 1.0f));
  CHECK(m[2] == 1.0f);
}

TEST_CASE("panels are written as image files") {
  condadapt::testing::ScratchDir dir("panels");
  LabelMap pred(Shape{1, 1, 4, 4}, 1), gt(Shape{1, 1, 4, 4}, 2), pseudo(Shape{1, 1, 4, 4}, 0);
  Tensor<float> d(Shape{1, 1, 4, 4}, 0.3f);
  write_panels(dir.path(), "x", pred, gt, 3, &pseudo, &d);
  for (const char* f : {"x_pred.ppm", "x_error.pgm", "x_regions.pgm", "x_ambivalence.pgm"})
    CHECK(std::filesystem::exists(dir.path() / f));
}
