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
#include "condadapt/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace condadapt {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DataSection, height, width, classes, conditions,
                                                unseen_conditions, source_train, source_eval, target_train,
                                                target_eval_per_condition, unseen_eval, min_strength,
                                                max_strength)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelSection, feature_dim, width)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SgdSection, epochs, batch, lr, momentum, weight_decay,
                                                poly_power)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SourceSection, optim)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TranslatorSection, epochs, batch, generator_width,
                                                discriminator_width, lr_generator, lr_discriminator, beta1,
                                                lambda_sc)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Stage1Section, variant, adversarial, optim, lambda_adv,
                                                lr_discriminator, discriminator_width)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Stage2Section, optim, lambda_p, pseudo_labels, target_loss,
                                                hard_adv, source_all_heads, normalize, lambda_adv,
                                                lr_discriminator)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DistillSection, optim, lambda_p)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalSection, mode, panels)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, seed, data, model, source, translator, stage1,
                                                stage2, distill, eval)

namespace {

void reject_unknown(const json& given, const json& reference, const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw std::invalid_argument("unknown config key '" + where + "'");
    if (reference[key].is_object()) {
      if (!value.is_object()) throw std::invalid_argument("config key '" + where + "' must be an object");
      reject_unknown(value, reference[key], where);
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid config: " + what);
}

void check_optim(const SgdSection& s, const std::string& name) {
  require(s.epochs >= 0, name + ".epochs must be >= 0");
  require(s.batch >= 1, name + ".batch must be >= 1");
  require(s.lr > 0, name + ".lr must be positive");
  require(s.momentum >= 0 && s.momentum < 1, name + ".momentum must lie in [0,1)");
  require(s.weight_decay >= 0, name + ".weight_decay must be >= 0");
  require(s.poly_power >= 0, name + ".poly_power must be >= 0");
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (v == o) return true;
  return false;
}

}  // namespace

void TrainConfig::validate() const {
  require(data.classes >= 2, "data.classes must be >= 2");
  require(data.height >= 16 && data.width >= 16, "data.height and data.width must be >= 16");
  require(data.height % 8 == 0 && data.width % 8 == 0, "data.height and data.width must be multiples of 8");
  require(data.conditions.size() >= 2, "data.conditions needs K >= 2 entries");
  require(data.min_strength >= 0 && data.min_strength <= data.max_strength && data.max_strength <= 1,
          "data strengths must satisfy 0 <= min <= max <= 1");
  require(model.feature_dim >= 1 && model.width >= 2, "model channel counts must be positive");
  check_optim(source.optim, "source.optim");
  check_optim(stage1.optim, "stage1.optim");
  check_optim(stage2.optim, "stage2.optim");
  check_optim(distill.optim, "distill.optim");
  require(translator.epochs >= 0 && translator.batch >= 1, "translator epochs/batch");
  require(translator.lambda_sc >= 0, "translator.lambda_sc must be >= 0");
  require(one_of(stage1.variant, {"mix", "sep", "sm", "cam"}), "stage1.variant must be mix|sep|sm|cam");
  require(one_of(stage1.adversarial, {"csat", "dat", "none"}), "stage1.adversarial must be csat|dat|none");
  require(stage1.lambda_adv >= 0 && stage2.lambda_adv >= 0, "lambda_adv must be >= 0");
  require(!stage2.lambda_p.empty(), "stage2.lambda_p must list at least one value");
  for (double v : stage2.lambda_p) require(v >= 0 && v < 1, "stage2.lambda_p values must lie in [0,1)");
  require(distill.lambda_p >= 0 && distill.lambda_p < 1, "distill.lambda_p must lie in [0,1)");
  require(one_of(stage2.pseudo_labels, {"apla", "ca", "maxv", "meanv"}),
          "stage2.pseudo_labels must be apla|ca|maxv|meanv");
  require(one_of(stage2.target_loss, {"weighted", "plain"}), "stage2.target_loss must be weighted|plain");
  require(one_of(eval.mode, {"fused", "ca_only", "mean_vote"}), "eval.mode must be fused|ca_only|mean_vote");
}

json to_json(const TrainConfig& cfg) {
  json j = cfg;
  return j;
}

TrainConfig config_from_json(const json& j) {
  reject_unknown(j, to_json(TrainConfig{}), "");
  TrainConfig cfg;
  try {
    cfg = j.get<TrainConfig>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("cannot parse config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const TrainConfig& cfg, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << to_json(cfg).dump(2) << "\n";
}

TrainConfig apply_overrides(const TrainConfig& cfg, const std::vector<std::string>& overrides) {
  json j = to_json(cfg);
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw std::invalid_argument("override '" + item + "' is not of the form key=value");
    const std::string key = item.substr(0, eq), text = item.substr(eq + 1);
    json* node = &j;
    std::stringstream parts(key);
    std::string part;
    while (std::getline(parts, part, '.')) {
      if (!node->is_object() || !node->contains(part))
        throw std::invalid_argument("unknown config key '" + key + "'");
      node = &(*node)[part];
    }
    json value;
    try {
      value = json::parse(text);
    } catch (const json::exception&) {
      if (node->is_array() && text.find(',') != std::string::npos) {
        try {
          value = json::parse("[" + text + "]");
        } catch (const json::exception&) {
          value = text;
        }
      } else {
        value = text;
      }
    }
    if (node->is_array() && !value.is_array()) value = json::array({value});
    *node = value;
  }
  return config_from_json(j);
}

}  // namespace condadapt
