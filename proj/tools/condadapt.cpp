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

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fmt/format.h>

#include <functional>
#include <iostream>
#include <map>

namespace {

using namespace condadapt;

struct CommonOptions {
  std::string config;
  std::string out;
  std::string device = "cpu";
  std::string lambda_p;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool verbose = false;
  bool quiet = false;
};

TrainConfig resolve_config(const CommonOptions& o) {
  TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_config(o.config);
  std::vector<std::string> overrides = o.overrides;
  if (o.seed_given) overrides.push_back("seed=" + std::to_string(o.seed));
  if (!o.lambda_p.empty()) overrides.push_back("stage2.lambda_p=" + o.lambda_p);
  cfg = apply_overrides(cfg, overrides);
  if (o.device != "cpu") throw std::invalid_argument("device '" + o.device + "' is not available; use cpu");
  return cfg;
}

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, std::string("Artifact root (default $") + kArtifactRootEnv + " or ./artifacts)");
  sub->add_option("--seed", o.seed, "Base seed")->each([&o](const std::string&) { o.seed_given = true; });
  sub->add_option("--device", o.device, "Compute device")->default_val("cpu");
  sub->add_option("--lambda_p", o.lambda_p, "Stage-2 thresholds, comma separated");
  sub->add_option("overrides", o.overrides, "Dotted-key overrides such as stage1.optim.lr=0.01");
  sub->add_flag("-v,--verbose", o.verbose, "Debug logging");
  sub->add_flag("-q,--quiet", o.quiet, "Warnings and errors only");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Condition-guided domain adaptation for semantic segmentation on a procedural toy world"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string block;

  using Action = std::function<void(const TrainConfig&, const ArtifactLayout&)>;
  const std::vector<std::tuple<std::string, std::string, Action>> commands{
      {"gen-data", "Render the source and target datasets", gen_data},
      {"train-source", "Train the source-only network (also the translator's frozen segmenter)",
       [](const TrainConfig& c, const ArtifactLayout& l) { train_source(c, l); }},
      {"train-cgst", "Train the condition-guided style translator",
       [](const TrainConfig& c, const ArtifactLayout& l) { train_cgst(c, l); }},
      {"translate", "Render the source training set in every target condition", translate_source},
      {"train-stage1", "Adversarial stage-one training (M0)",
       [](const TrainConfig& c, const ArtifactLayout& l) { train_stage1(c, l); }},
      {"train-stage2", "Self-training from M0, one run per lambda_p",
       [](const TrainConfig& c, const ArtifactLayout& l) { train_stage2(c, l); }},
      {"distill", "Distil the stage-two model into a single-head student",
       [](const TrainConfig& c, const ArtifactLayout& l) { distill(c, l); }},
      {"eval", "Metric reports, panels and charts for every trained model",
       [](const TrainConfig& c, const ArtifactLayout& l) { eval_models(c, l); }},
      {"ablate", "Run one ablation block",
       [&block](const TrainConfig& c, const ArtifactLayout& l) { ablate(c, l, block); }},
      {"pipeline", "gen-data through eval in one go", run_pipeline},
      {"plot", "Training-curve charts for every run found",
       [](const TrainConfig&, const ArtifactLayout& l) { plot_artifacts(l); }},
  };

  std::map<CLI::App*, Action> actions;
  for (const auto& [name, help, action] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, opts);
    if (name == "ablate")
      sub->add_option("--block", block, "Ablation block")->required()->check(CLI::IsMember(ablation_blocks()));
    actions.emplace(sub, action);
  }

  CLI11_PARSE(app, argc, argv);

  if (opts.quiet) spdlog::set_level(spdlog::level::warn);
  if (opts.verbose) spdlog::set_level(spdlog::level::debug);
  try {
    const TrainConfig cfg = resolve_config(opts);
    const ArtifactLayout layout(opts.out.empty() ? default_artifact_root() : std::filesystem::path(opts.out));
    for (const auto& [sub, action] : actions)
      if (sub->parsed()) action(cfg, layout);
  } catch (const MissingArtifact& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
