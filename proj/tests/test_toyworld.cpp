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

#include "condadapt/image_io.hpp"
#include "condadapt/toyworld.hpp"
#include "scratch_dir.hpp"

#include <fstream>
#include <set>

using namespace condadapt;
namespace fs = std::filesystem;

TEST_CASE("generation is deterministic and labels every pixel") {
  const auto spec = default_scene_spec();
  for (std::uint64_t seed : {0u, 1u, 77u}) {
    const Sample a = generate_scene(seed, spec);
    const Sample b = generate_scene(seed, spec);
    CHECK(a.image == b.image);
    CHECK(a.label == b.label);
    std::set<int> classes;
    for (std::size_t i = 0; i < a.label.size(); ++i) {
      REQUIRE(a.label[i] >= 1);
      REQUIRE(a.label[i] <= spec.classes);
      classes.insert(a.label[i]);
    }
    CHECK(classes.size() >= 3);
    CHECK(a.image.array().minCoeff() >= 0.f);
    CHECK(a.image.array().maxCoeff() <= 1.f);
  }
  CHECK_FALSE(generate_scene(1, spec).label == generate_scene(2, spec).label);
}

TEST_CASE("source and target share layout but not texture") {
  const Sample s = generate_scene(5, default_scene_spec(Domain::source));
  const Sample t = generate_scene(5, default_scene_spec(Domain::target));
  CHECK(s.label == t.label);
  CHECK((s.image.array() - t.image.array()).abs().mean() > 0.02f);
}

TEST_CASE("class frequencies over 1000 seeds stay inside the bands") {
  for (Domain d : {Domain::source, Domain::target}) {
    const auto spec = default_scene_spec(d);
    std::vector<double> freq(static_cast<std::size_t>(spec.classes), 0.0);
    const int corpus = 1000;
    for (int seed = 0; seed < corpus; ++seed) {
      const Sample s = generate_scene(static_cast<std::uint64_t>(seed), spec);
      for (std::size_t i = 0; i < s.label.size(); ++i)
        freq[static_cast<std::size_t>(s.label[i] - 1)] += 1.0;
    }
    const double total = static_cast<double>(corpus) * spec.height * spec.width;
    for (int c = 0; c < spec.classes; ++c) {
      const double f = freq[static_cast<std::size_t>(c)] / total;
      const auto band = spec.frequency_bands[static_cast<std::size_t>(c)];
      INFO("class " << c + 1 << " frequency " << f);
      CHECK(f >= band[0]);
      CHECK(f <= band[1]);
    }
  }
}

TEST_CASE("invalid scene specs are rejected") {
  SceneSpec spec = default_scene_spec();
  spec.frequency_bands.clear();
  spec.classes = 1;
  CHECK_THROWS_AS(generate_scene(0, spec), std::invalid_argument);
  spec.classes = 6;
  spec.height = 15;
  CHECK_THROWS_AS(generate_scene(0, spec), std::invalid_argument);
  spec.height = 64;
  spec.width = 8;
  CHECK_THROWS_AS(generate_scene(0, spec), std::invalid_argument);
}

TEST_CASE("two-class specs render sky and ground only") {
  SceneSpec spec = default_scene_spec();
  spec.frequency_bands.clear();
  spec.classes = 2;
  const Sample s = generate_scene(3, spec);
  CHECK(s.label.array().minCoeff() == 1);
  CHECK(s.label.array().maxCoeff() == 2);
}

TEST_CASE("clean is the identity and fog follows the blend") {
  const Sample s = generate_scene(11, default_scene_spec(Domain::target));
  CHECK(apply_condition(s.image, "clean", 0.f, 3) == s.image);

  const auto fog = apply_condition(s.image, "fog", 1.f, 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        REQUIRE(fog(0, c, y, x) ==
                doctest::Approx(0.4f * s.image(0, c, y, x) + 0.6f * kHazeColor[c]).epsilon(1e-6));
}

TEST_CASE("fog at half strength matches a scalar loop") {
  const Sample s = generate_scene(12, default_scene_spec(Domain::target));
  const auto fog = apply_condition(s.image, "fog", 0.5f, 0);
  const double haze[3] = {0.78, 0.80, 0.82};
  double worst = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double t = 1.0 - 0.6 * 0.5;
        const double expect = t * s.image(0, c, y, x) + (1.0 - t) * haze[c];
        worst = std::max(worst, std::abs(expect - fog(0, c, y, x)));
      }
  CHECK(worst <= 1e-6);
}

TEST_CASE("rain is seeded, bounded and brightens") {
  const Sample s = generate_scene(13, default_scene_spec(Domain::target));
  const auto a = apply_condition(s.image, "rain", 0.8f, 9);
  const auto b = apply_condition(s.image, "rain", 0.8f, 9);
  const auto c = apply_condition(s.image, "rain", 0.8f, 10);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.array().minCoeff() >= 0.f);
  CHECK(a.array().maxCoeff() <= 1.f);
  CHECK((a.array() >= s.image.array()).all());
  CHECK(apply_condition(s.image, "rain", 0.f, 9) == s.image);
}

TEST_CASE("conditions never touch labels and reject bad input") {
  const Sample s = generate_scene(14, default_scene_spec(Domain::target));
  for (const auto& name : known_conditions()) {
    Sample copy = s;
    copy.image = apply_condition(copy.image, name, 0.7f, 1);
    CHECK(copy.label == s.label);
  }
  CHECK_THROWS_AS(apply_condition(s.image, "snow", 0.5f, 0), std::invalid_argument);
  CHECK_THROWS_AS(apply_condition(s.image, "fog", 1.5f, 0), std::invalid_argument);
}

TEST_CASE("netpbm round trip stays within one quantization step") {
  testing::ScratchDir dir("toyworld_io");
  const Sample s = generate_scene(21, default_scene_spec(Domain::target));
  write_ppm(dir.path() / "a.ppm", s.image);
  write_pgm(dir.path() / "a.pgm", s.label);
  const auto image = read_ppm(dir.path() / "a.ppm");
  CHECK((image.array() - s.image.array()).abs().maxCoeff() <= 1.f / 255.f);
  CHECK(read_pgm(dir.path() / "a.pgm") == s.label);

  CHECK_THROWS_WITH_AS(read_ppm(dir.path() / "missing.ppm"),
                       doctest::Contains("missing.ppm"), std::runtime_error);
  std::ofstream(dir.path() / "bad.ppm") << "P6\n64 64\n255\nxx";
  CHECK_THROWS_WITH_AS(read_ppm(dir.path() / "bad.ppm"), doctest::Contains("bad.ppm"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(read_pgm(dir.path() / "a.ppm"), doctest::Contains("a.ppm"),
                       std::runtime_error);
}

namespace {

DataConfig small_config() {
  DataConfig cfg;
  cfg.height = 32;
  cfg.width = 32;
  cfg.source_train = 10;
  cfg.source_eval = 4;
  cfg.target_train = 9;
  cfg.target_eval_per_condition = 3;
  cfg.unseen_eval = 2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("built datasets load back with the expected counts") {
  testing::ScratchDir dir("toyworld_build");
  const DataConfig cfg = small_config();
  const DatasetPaths paths = build_dataset(cfg, dir.path());

  const auto source = DatasetManifest::load(paths.source_train);
  const auto target = DatasetManifest::load(paths.target_train);
  const auto eval = DatasetManifest::load(paths.target_eval / "manifest.json");
  CHECK(source.size() == 10);
  CHECK(target.size() == 9);
  CHECK(eval.size() == 11);
  CHECK(eval.seen_conditions == 3);
  CHECK(eval.conditions == std::vector<std::string>{"clean", "fog", "rain", "overcast"});

  int unseen = 0;
  std::vector<int> per_condition(3, 0);
  for (const auto& r : eval.records) {
    if (r.condition.index >= eval.seen_conditions) ++unseen;
    CHECK(r.domain == Domain::target);
  }
  for (const auto& r : target.records) ++per_condition[static_cast<std::size_t>(r.condition.index)];
  CHECK(unseen == 2);
  CHECK(per_condition == std::vector<int>{3, 3, 3});

  const auto samples = load_samples(target);
  CHECK(samples.size() == target.size());
  CHECK(samples[0].image.shape() == Shape{1, 3, 32, 32});

  // Rebuilding with the same seed writes identical files.
  testing::ScratchDir again("toyworld_build_again");
  const DatasetPaths paths2 = build_dataset(cfg, again.path());
  const auto samples2 = load_samples(DatasetManifest::load(paths2.target_train));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].image == samples2[i].image);
    CHECK(samples[i].label == samples2[i].label);
  }
}

TEST_CASE("target samples differ from their clean render only by the condition") {
  testing::ScratchDir dir("toyworld_cond");
  const DataConfig cfg = small_config();
  const DatasetPaths paths = build_dataset(cfg, dir.path());
  const auto manifest = DatasetManifest::load(paths.target_eval);
  const auto samples = load_samples(manifest);
  SceneSpec spec = default_scene_spec(Domain::target);
  spec.height = cfg.height;
  spec.width = cfg.width;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample clean = generate_scene(manifest.records[i].scene_seed, spec);
    CHECK(clean.label == samples[i].label);
    if (manifest.records[i].condition.name == "clean")
      CHECK((clean.image.array() - samples[i].image.array()).abs().maxCoeff() <= 1.f / 255.f);
  }
}

TEST_CASE("manifest errors name the offending path") {
  testing::ScratchDir dir("toyworld_missing");
  const DatasetPaths paths = build_dataset(small_config(), dir.path());
  const auto manifest = DatasetManifest::load(paths.source_train);
  const fs::path victim = manifest.root / manifest.records[3].image;
  const std::string victim_name = victim.string();
  fs::remove(victim);
  CHECK_THROWS_WITH_AS(DatasetManifest::load(paths.source_train),
                       doctest::Contains(victim_name.c_str()), std::runtime_error);
  CHECK_THROWS_WITH_AS(DatasetManifest::load(dir.path() / "nowhere"),
                       doctest::Contains("nowhere"), std::runtime_error);
  CHECK_THROWS_WITH_AS(load_samples(manifest), doctest::Contains(victim_name.c_str()),
                       std::runtime_error);
}

TEST_CASE("batch stream covers each sample once per epoch, reproducibly") {
  std::vector<Sample> samples;
  SceneSpec spec = default_scene_spec();
  spec.height = spec.width = 16;
  for (int i = 0; i < 11; ++i) samples.push_back(generate_scene(static_cast<std::uint64_t>(i), spec));

  BatchStream stream(samples, 4, 42);
  CHECK(stream.batches_per_epoch() == 3);
  for (int e = 0; e < 3; ++e) {
    std::multiset<std::size_t> seen;
    for (const auto& b : stream.epoch(e)) seen.insert(b.begin(), b.end());
    CHECK(seen.size() == 11);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 11);
  }
  CHECK(stream.epoch(1) == BatchStream(samples, 4, 42).epoch(1));
  CHECK_FALSE(stream.epoch(0) == stream.epoch(1));
  CHECK_FALSE(stream.epoch(0) == BatchStream(samples, 4, 43).epoch(0));

  const auto batches = stream.epoch_batches(0);
  CHECK(batches.back().size() == 3);
  CHECK(batches[0].images.shape() == Shape{4, 3, 16, 16});
  CHECK(batches[0].labels.shape() == Shape{4, 1, 16, 16});
  const auto first = batches[0].indices[1];
  CHECK(batches[0].images.slice_batch(1, 1) == samples[first].image);
}

TEST_CASE("condition-balanced sampler fills every slot cycle with each condition") {
  std::vector<Sample> samples;
  SceneSpec spec = default_scene_spec(Domain::target);
  spec.height = spec.width = 16;
  for (int i = 0; i < 10; ++i) {
    Sample s = generate_scene(static_cast<std::uint64_t>(i), spec);
    s.condition = {i % 3 == 0 ? 0 : (i % 3 == 1 ? 1 : 2), "x"};
    if (i == 9) s.condition = {3, "unseen"};
    samples.push_back(std::move(s));
  }
  ConditionBalancedSampler sampler(samples, 3, 1);
  for (int step = 0; step < 20; ++step) {
    const Batch b = sampler.next(3);
    std::set<int> conditions(b.conditions.begin(), b.conditions.end());
    CHECK(conditions == std::set<int>{0, 1, 2});
  }
  ConditionBalancedSampler a(samples, 3, 7), b(samples, 3, 7);
  for (int step = 0; step < 5; ++step) CHECK(a.next(4).indices == b.next(4).indices);

  samples.resize(2);
  CHECK_THROWS_AS(ConditionBalancedSampler(samples, 3, 1), std::invalid_argument);
}
