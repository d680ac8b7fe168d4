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

// Run configuration with strict JSON (de)serialization. Unknown keys are
// errors; dotted-key overrides ("stage1.optim.lr=0.01") patch a loaded config.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace condadapt {

struct DataSection {
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
  double min_strength = 0.5;
  double max_strength = 1.0;
  bool operator==(const DataSection&) const = default;
};

struct ModelSection {
  int feature_dim = 32;
  int width = 32;
  bool operator==(const ModelSection&) const = default;
};

struct SgdSection {
  int epochs = 10;
  int batch = 6;
  double lr = 0.0025;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double poly_power = 0.9;
  bool operator==(const SgdSection&) const = default;
};

struct SourceSection {
  SgdSection optim{12, 8, 0.02, 0.9, 5e-4, 0.9};
  bool operator==(const SourceSection&) const = default;
};

struct TranslatorSection {
  int epochs = 10;
  int batch = 6;
  int generator_width = 16;
  int discriminator_width = 16;
  double lr_generator = 2e-4;
  double lr_discriminator = 2e-4;
  double beta1 = 0.5;
  double lambda_sc = 5.0;
  bool operator==(const TranslatorSection&) const = default;
};

struct Stage1Section {
  std::string variant = "cam";        // mix | sep | sm | cam
  std::string adversarial = "csat";   // csat | dat | none
  SgdSection optim{8, 6, 0.02, 0.9, 5e-4, 0.9};
  double lambda_adv = 0.001;
  double lr_discriminator = 1e-4;
  int discriminator_width = 32;
  bool operator==(const Stage1Section&) const = default;
};

struct Stage2Section {
  SgdSection optim{6, 6, 0.01, 0.9, 5e-4, 0.9};
  std::vector<double> lambda_p{0.6};
  std::string pseudo_labels = "apla";  // apla | ca | maxv | meanv
  std::string target_loss = "weighted";  // weighted | plain
  bool hard_adv = true;
  bool source_all_heads = true;
  bool normalize = true;  // divide by active-pixel counts
  double lambda_adv = 0.001;
  double lr_discriminator = 1e-4;
  bool operator==(const Stage2Section&) const = default;
};

struct DistillSection {
  SgdSection optim{6, 6, 0.01, 0.9, 5e-4, 0.9};
  double lambda_p = 0.9;
  bool operator==(const DistillSection&) const = default;
};

struct EvalSection {
  std::string mode = "fused";  // fused | ca_only | mean_vote
  int panels = 4;              // per-image panels written per condition
  bool operator==(const EvalSection&) const = default;
};

struct TrainConfig {
  std::uint64_t seed = 0;
  DataSection data;
  ModelSection model;
  SourceSection source;
  TranslatorSection translator;
  Stage1Section stage1;
  Stage2Section stage2;
  DistillSection distill;
  EvalSection eval;
  bool operator==(const TrainConfig&) const = default;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw std::invalid_argument.
TrainConfig config_from_json(const nlohmann::json& j);

TrainConfig load_config(const std::filesystem::path& path);
void save_config(const TrainConfig& cfg, const std::filesystem::path& path);

/// Applies "a.b.c=value" overrides. The value is parsed as JSON when
/// possible ("0.01", "true", "[0.5,0.6]") and as a string otherwise; a bare
/// comma list of numbers becomes an array.
TrainConfig apply_overrides(const TrainConfig& cfg, const std::vector<std::string>& overrides);

}  // namespace condadapt
