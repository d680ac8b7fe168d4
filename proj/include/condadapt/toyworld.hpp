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
#pragma once

// Procedural source/target scenes with weather-like sub-domains.

#include "condadapt/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace condadapt {

enum class Domain { source, target };

std::string to_string(Domain d);
Domain domain_from_string(const std::string& s);

/// Index into a dataset's condition list. Raw source samples carry
/// index -1 ("none").
struct ConditionId {
  int index = -1;
  std::string name = "none";
  friend bool operator==(const ConditionId&, const ConditionId&) = default;
};

/// Names apply_condition understands.
const std::vector<std::string>& known_conditions();

struct Sample {
  Tensor<float> image;  // [1,3,H,W] in [0,1]
  LabelMap label;       // [1,1,H,W], 0 = ignore, classes 1..L
  Domain domain = Domain::source;
  ConditionId condition;
};

using Rgb = std::array<float, 3>;

struct SceneSpec {
  int height = 64;
  int width = 64;
  int classes = 6;
  int min_shapes = 1;
  int max_shapes = 6;
  Domain domain = Domain::source;

  // Source texture: flat colours with a darkened grid.
  int grid_spacing = 8;
  float grid_darkening = 0.15f;
  // Target texture: per-region colour jitter and per-pixel noise.
  float color_jitter = 0.06f;
  float pixel_noise = 0.04f;

  /// Accepted band for each class's mean pixel fraction over a corpus;
  /// index 0 is class 1. Empty means "not constrained".
  std::vector<std::array<double, 2>> frequency_bands;

  /// Throws std::invalid_argument for L < 2, H or W < 16, or bad shape counts.
  void validate() const;
  /// Class colour for this spec's domain; label in 1..L.
  Rgb palette(int label) const;
};

/// Default L=6 spec with frequency bands for the default geometry.
SceneSpec default_scene_spec(Domain domain = Domain::source);

/// Pure function of (seed, spec). Every pixel gets a label in 1..L.
Sample generate_scene(std::uint64_t seed, const SceneSpec& spec);

/// Weather-style transform; labels are never touched.
///  clean    identity
///  fog      t*img + (1-t)*haze with t = 1 - 0.6*strength
///  rain     seeded slanted additive streaks, clipped to [0,1]
///  overcast darkening blend toward a blue-grey sky light
Tensor<float> apply_condition(const Tensor<float>& image, const std::string& condition,
                              float strength, std::uint64_t seed);

inline constexpr Rgb kHazeColor{0.78f, 0.80f, 0.82f};

// ---------------------------------------------------------------------------
// On-disk datasets

struct ManifestRecord {
  std::string image;  // relative to the manifest directory
  std::string label;
  Domain domain = Domain::source;
  ConditionId condition;
  std::uint64_t scene_seed = 0;
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding manifest.json
  std::string name;
  std::string split = "train";  // train | eval
  int classes = 6;
  int height = 64;
  int width = 64;
  /// All condition names referenced by records; the first `seen_conditions`
  /// are the training sub-domains, the rest are unseen.
  std::vector<std::string> conditions;
  int seen_conditions = 0;
  std::vector<ManifestRecord> records;

  std::size_t size() const { return records.size(); }
  void save() const;
  /// Parses and checks that every referenced file exists.
  static DatasetManifest load(const std::filesystem::path& manifest_or_dir);
};

struct DataConfig {
  int height = 64;
  int width = 64;
  int classes = 6;
  std::vector<std::string> conditions{"clean", "fog", "rain"};
  std::vector<std::string> unseen_conditions{"overcast"};
  int source_train = 600;
  int source_eval = 150;
  int target_train = 600;
  int target_eval_per_condition = 150;
  int unseen_eval = 50;
  float min_strength = 0.5f;
  float max_strength = 1.0f;
  std::uint64_t seed = 0;
};

struct DatasetPaths {
  std::filesystem::path source_train;
  std::filesystem::path source_eval;
  std::filesystem::path target_train;
  std::filesystem::path target_eval;
};

/// Renders all splits under `root` (one subdirectory each).
DatasetPaths build_dataset(const DataConfig& cfg, const std::filesystem::path& root);

/// Writes in-memory samples as a dataset in `dir` (replacing its contents).
/// Condition indices refer to `conditions`.
DatasetManifest save_samples(const std::vector<Sample>& samples, const std::filesystem::path& dir,
                             const std::string& name, const std::string& split, int classes,
                             const std::vector<std::string>& conditions, int seen_conditions);

/// Reads every image of a manifest into memory.
std::vector<Sample> load_samples(const DatasetManifest& manifest);

struct Batch {
  Tensor<float> images;  // [B,3,H,W]
  LabelMap labels;       // [B,1,H,W]
  std::vector<int> conditions;
  std::vector<std::size_t> indices;
  int size() const { return images.shape().n; }
};

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);

/// Deterministic permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Epoch-wise batch stream: every sample exactly once per epoch, order a
/// pure function of (shuffle_seed, epoch). The last batch may be short.
class BatchStream {
 public:
  BatchStream(const std::vector<Sample>& samples, int batch_size, std::uint64_t shuffle_seed,
              bool shuffle = true);

  std::size_t batches_per_epoch() const;
  /// Index lists for one epoch.
  std::vector<std::vector<std::size_t>> epoch(int epoch_index) const;
  std::vector<Batch> epoch_batches(int epoch_index) const;

 private:
  const std::vector<Sample>* samples_;
  int batch_size_;
  std::uint64_t seed_;
  bool shuffle_;
};

/// Endless sampler whose batch slots cycle through the conditions, so every
/// batch of size >= K holds each condition. Samples with a condition index
/// outside [0, K) are never drawn.
class ConditionBalancedSampler {
 public:
  ConditionBalancedSampler(const std::vector<Sample>& samples, int conditions, std::uint64_t seed);
  Batch next(int batch_size);

 private:
  std::size_t draw(int condition);

  const std::vector<Sample>* samples_;
  int conditions_;
  std::uint64_t seed_;
  std::vector<std::vector<std::size_t>> pools_;
  std::vector<std::vector<std::size_t>> queues_;
  std::vector<std::size_t> cursor_;
  std::vector<int> refills_;
  long slot_ = 0;
};

}  // namespace condadapt
