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

// End-to-end commands over an artifact directory. Every command reads its
// inputs from upstream directories, writes only under its own directory,
// and stores the resolved config next to its outputs.

#include "condadapt/adversarial.hpp"
#include "condadapt/config.hpp"
#include "condadapt/evalkit.hpp"
#include "condadapt/selftrain.hpp"
#include "condadapt/translator.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace condadapt {

/// An input artifact does not exist yet; the message names the command
/// that produces it.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kArtifactRootEnv = "CONDADAPT_ARTIFACTS";

/// $CONDADAPT_ARTIFACTS if set, else "artifacts".
std::filesystem::path default_artifact_root();

struct ArtifactLayout {
  explicit ArtifactLayout(std::filesystem::path root);

  std::filesystem::path root, data, source, cgst, stylized, stage1, stage2, distill, eval, ablate, plots;

  std::filesystem::path stage2_run(double lambda_p) const;
  /// Split directories under data/.
  std::filesystem::path split(const std::string& name) const { return data / name; }
};

/// "lp0.6" style directory names.
std::string lambda_tag(double lambda_p);

// Config translation.
DataConfig data_config(const TrainConfig& cfg);
SegNetConfig segnet_config(const TrainConfig& cfg, HeadVariant variant);
SourceOnlyConfig source_config(const TrainConfig& cfg);
TranslatorConfig translator_config(const TrainConfig& cfg);
Stage1Config stage1_config(const TrainConfig& cfg);
Stage2Config stage2_config(const TrainConfig& cfg, double lambda_p);
DistillConfig distill_config(const TrainConfig& cfg);

// Model checkpoints carry their architecture in the metadata.
void save_segnet(const std::filesystem::path& path, const SegNet<float>& net, const std::string& tag);
SegNet<float> load_segnet(const std::filesystem::path& path);
void save_bank(const std::filesystem::path& path, const DiscriminatorBank<float>& bank);
DiscriminatorBank<float> load_bank(const std::filesystem::path& path);
void save_translator(const std::filesystem::path& path, const TranslatorNets& nets, const TranslatorConfig& cfg);
TranslatorNets load_translator(const std::filesystem::path& path);

/// Evaluation mode for a network under the config: eval.mode for CAM
/// networks, mean voting otherwise.
PredictMode eval_mode(const TrainConfig& cfg, const SegNet<float>& net);

/// Evaluates on the target eval split and writes metrics.csv/.txt to `dir`.
MetricReport evaluate_into(const SegNet<float>& net, const ArtifactLayout& layout, const std::string& name,
                           PredictMode mode, const std::filesystem::path& dir);

struct TranslatorSummary {
  std::vector<double> condition_accuracy;  // per condition, translated source eval images
  double segmenter_miou = 0.0;             // frozen segmenter on translated source eval images
  double condition_contrast = 0.0;         // mean |G(x,c0) - G(x,c1)|
};

// Commands.
void gen_data(const TrainConfig& cfg, const ArtifactLayout& layout);
MetricReport train_source(const TrainConfig& cfg, const ArtifactLayout& layout);
TranslatorSummary train_cgst(const TrainConfig& cfg, const ArtifactLayout& layout);
void translate_source(const TrainConfig& cfg, const ArtifactLayout& layout);
MetricReport train_stage1(const TrainConfig& cfg, const ArtifactLayout& layout);
/// One run per stage2.lambda_p entry.
std::vector<MetricReport> train_stage2(const TrainConfig& cfg, const ArtifactLayout& layout);
MetricReport distill(const TrainConfig& cfg, const ArtifactLayout& layout);
/// Reports, panels and plots for every trained model found.
std::vector<MetricReport> eval_models(const TrainConfig& cfg, const ArtifactLayout& layout);

const std::vector<std::string>& ablation_blocks();
/// Trains the cells of one ablation block under ablate/<block>/ and writes
/// ablate/<block>/summary.csv.
void ablate(const TrainConfig& cfg, const ArtifactLayout& layout, const std::string& block);

/// gen-data through eval.
void run_pipeline(const TrainConfig& cfg, const ArtifactLayout& layout);

/// Line charts under plots/ for every curves.csv found below the root.
void plot_artifacts(const ArtifactLayout& layout);

}  // namespace condadapt
