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
#include "condadapt/toyworld.hpp"

#include "condadapt/image_io.hpp"
#include "condadapt/random.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace condadapt {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Domain d) { return d == Domain::source ? "source" : "target"; }

Domain domain_from_string(const std::string& s) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  throw std::invalid_argument("unknown domain '" + s + "'");
}

const std::vector<std::string>& known_conditions() {
  static const std::vector<std::string> names{"clean", "fog", "rain", "overcast"};
  return names;
}

namespace {

// Saturated, flat "rendered" colours.
constexpr std::array<Rgb, 6> kSourcePalette{{
    {0.55f, 0.75f, 0.95f},  // sky
    {0.42f, 0.40f, 0.44f},  // ground
    {0.75f, 0.50f, 0.30f},  // building
    {0.20f, 0.68f, 0.22f},  // vegetation
    {0.88f, 0.18f, 0.20f},  // vehicle
    {0.95f, 0.85f, 0.20f},  // pole
}};

// Washed-out "camera" colours of the target world.
constexpr std::array<Rgb, 6> kTargetPalette{{
    {0.66f, 0.72f, 0.78f},
    {0.30f, 0.30f, 0.31f},
    {0.58f, 0.50f, 0.44f},
    {0.32f, 0.46f, 0.28f},
    {0.62f, 0.28f, 0.34f},
    {0.76f, 0.72f, 0.46f},
}};

Rgb hue_color(int k, bool washed) {
  const double h = std::fmod(0.13 + 0.381966 * k, 1.0) * 6.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  std::array<double, 3> rgb{};
  switch (static_cast<int>(h)) {
    case 0: rgb = {1, x, 0}; break;
    case 1: rgb = {x, 1, 0}; break;
    case 2: rgb = {0, 1, x}; break;
    case 3: rgb = {0, x, 1}; break;
    case 4: rgb = {x, 0, 1}; break;
    default: rgb = {1, 0, x}; break;
  }
  Rgb out{};
  for (int c = 0; c < 3; ++c) {
    const double v = 0.2 + 0.65 * rgb[c];
    out[c] = static_cast<float>(washed ? 0.6 * v + 0.2 : v);
  }
  return out;
}

struct Region {
  int label;
  Rgb jitter{};
};

}  // namespace

void SceneSpec::validate() const {
  if (classes < 2) throw std::invalid_argument("scene spec needs at least 2 classes");
  if (height < 16 || width < 16) throw std::invalid_argument("scene spec needs H, W >= 16");
  if (classes > 255) throw std::invalid_argument("scene spec supports at most 255 classes");
  if (min_shapes < 0 || max_shapes < min_shapes)
    throw std::invalid_argument("scene spec has an invalid shape count range");
  if (classes >= 3 && min_shapes < 1)
    throw std::invalid_argument("scene spec with shape classes needs min_shapes >= 1");
  if (!frequency_bands.empty() && frequency_bands.size() != static_cast<std::size_t>(classes))
    throw std::invalid_argument("frequency bands must list every class");
}

Rgb SceneSpec::palette(int label) const {
  if (label < 1 || label > classes) throw std::out_of_range("palette label " + std::to_string(label));
  const bool target = domain == Domain::target;
  if (label <= 6) return target ? kTargetPalette[label - 1] : kSourcePalette[label - 1];
  return hue_color(label, target);
}

SceneSpec default_scene_spec(Domain domain) {
  SceneSpec spec;
  spec.domain = domain;
  // Bands bracket the corpus means measured for this geometry.
  spec.frequency_bands = {{0.30, 0.43}, {0.41, 0.55}, {0.050, 0.090},
                          {0.025, 0.050}, {0.020, 0.042}, {0.012, 0.026}};
  return spec;
}

Sample generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  const int H = spec.height, W = spec.width, L = spec.classes;
  std::mt19937_64 layout(derive_seed(seed, 0x5CE7E));
  std::mt19937_64 texture(derive_seed(seed, 0x7E87 + static_cast<int>(spec.domain)));

  // Region map: 0 sky, 1 ground, 2.. shapes; labels per region.
  std::vector<int> region(static_cast<std::size_t>(H) * W);
  std::vector<Region> regions;
  regions.push_back({1, {}});
  regions.push_back({2, {}});

  const double horizon = H * uniform(layout, 0.35, 0.55);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) region[static_cast<std::size_t>(y) * W + x] = y < horizon ? 0 : 1;

  auto fill_rect = [&](double x0, double y0, double x1, double y1, int id) {
    const int xa = std::max(0, static_cast<int>(std::floor(x0)));
    const int xb = std::min(W, static_cast<int>(std::ceil(x1)));
    const int ya = std::max(0, static_cast<int>(std::floor(y0)));
    const int yb = std::min(H, static_cast<int>(std::ceil(y1)));
    for (int y = ya; y < yb; ++y)
      for (int x = xa; x < xb; ++x) region[static_cast<std::size_t>(y) * W + x] = id;
  };

  if (L >= 3) {
    const int shapes = uniform_int(layout, spec.min_shapes, spec.max_shapes);
    for (int s = 0; s < shapes; ++s) {
      const int label = uniform_int(layout, 3, L);
      const int id = static_cast<int>(regions.size());
      regions.push_back({label, {}});
      switch ((label - 3) % 4) {
        case 0: {  // building: block standing on the horizon
          const double w = W * uniform(layout, 0.2, 0.4);
          const double h = H * uniform(layout, 0.18, 0.38);
          const double x0 = uniform(layout, 0.0, W - w);
          const double bottom = horizon + H * uniform(layout, 0.0, 0.06);
          fill_rect(x0, bottom - h, x0 + w, bottom, id);
          break;
        }
        case 1: {  // vegetation: ellipse around the horizon
          const double r = H * uniform(layout, 0.08, 0.16);
          const double cx = uniform(layout, 0.0, W);
          const double cy = horizon + H * uniform(layout, -0.10, 0.08);
          for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
              const double dx = (x + 0.5 - cx) / (1.25 * r), dy = (y + 0.5 - cy) / r;
              if (dx * dx + dy * dy <= 1.0) region[static_cast<std::size_t>(y) * W + x] = id;
            }
          break;
        }
        case 2: {  // vehicle: box on the ground
          const double w = W * uniform(layout, 0.16, 0.3);
          const double h = H * uniform(layout, 0.1, 0.18);
          const double x0 = uniform(layout, 0.0, W - w);
          const double bottom = horizon + (H - horizon) * uniform(layout, 0.35, 1.0);
          fill_rect(x0, bottom - h, x0 + w, bottom, id);
          break;
        }
        default: {  // pole: thin upright bar
          const double w = uniform_int(layout, 3, 4);
          const double h = H * uniform(layout, 0.25, 0.45);
          const double x0 = uniform(layout, 0.0, W - w);
          const double bottom = horizon + (H - horizon) * uniform(layout, 0.1, 0.6);
          fill_rect(x0, bottom - h, x0 + w, bottom, id);
          break;
        }
      }
    }
  }

  for (auto& r : regions)
    for (auto& j : r.jitter)
      j = static_cast<float>(uniform(texture, -spec.color_jitter, spec.color_jitter));

  Sample sample;
  sample.domain = spec.domain;
  sample.image = Tensor<float>(Shape{1, 3, H, W});
  sample.label = LabelMap(Shape{1, 1, H, W});
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const Region& r = regions[region[static_cast<std::size_t>(y) * W + x]];
      sample.label(0, 0, y, x) = r.label;
      const Rgb base = spec.palette(r.label);
      for (int c = 0; c < 3; ++c) {
        float v = base[c];
        if (spec.domain == Domain::source) {
          if (spec.grid_spacing > 0 && (x % spec.grid_spacing == 0 || y % spec.grid_spacing == 0))
            v *= 1.f - spec.grid_darkening;
        } else {
          v += r.jitter[c] + static_cast<float>(spec.pixel_noise * standard_normal(texture));
        }
        sample.image(0, c, y, x) = std::clamp(v, 0.f, 1.f);
      }
    }
  }
  return sample;
}

Tensor<float> apply_condition(const Tensor<float>& image, const std::string& condition,
                              float strength, std::uint64_t seed) {
  if (image.shape().c != 3) throw std::invalid_argument("apply_condition expects 3-channel images");
  if (strength < 0.f || strength > 1.f)
    throw std::invalid_argument("condition strength must lie in [0,1]");
  Tensor<float> out = image;
  const Shape s = image.shape();
  if (condition == "clean") return out;
  if (condition == "fog") {
    const float t = 1.f - 0.6f * strength;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < 3; ++c)
        out.plane(n, c) = t * image.plane(n, c) + (1.f - t) * kHazeColor[c];
    return out;
  }
  if (condition == "rain") {
    std::mt19937_64 rng(derive_seed(seed, 0x4A1));
    const int streaks = static_cast<int>(std::lround(strength * s.h * s.w / 48.0));
    for (int n = 0; n < s.n; ++n) {
      for (int k = 0; k < streaks; ++k) {
        const double x0 = uniform(rng, 0.0, s.w);
        const double y0 = uniform(rng, -8.0, s.h);
        const int length = uniform_int(rng, 4, 10);
        const float intensity = strength * static_cast<float>(uniform(rng, 0.3, 0.6));
        for (int t = 0; t < length; ++t) {
          const int y = static_cast<int>(std::floor(y0)) + t;
          const int x = static_cast<int>(std::floor(x0 + 0.4 * t));
          if (y < 0 || y >= s.h || x < 0 || x >= s.w) continue;
          for (int c = 0; c < 3; ++c) out(n, c, y, x) += intensity;
        }
      }
    }
    out.array() = out.array().min(1.f).max(0.f);
    return out;
  }
  if (condition == "overcast") {
    constexpr Rgb sky{0.45f, 0.48f, 0.56f};
    const float t = 1.f - 0.45f * strength;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < 3; ++c) out.plane(n, c) = t * image.plane(n, c) + (1.f - t) * sky[c];
    return out;
  }
  throw std::invalid_argument("unknown condition '" + condition + "'");
}

// ---------------------------------------------------------------------------

void DatasetManifest::save() const {
  json records_json = json::array();
  for (const auto& r : records) {
    records_json.push_back({{"image", r.image},
                            {"label", r.label},
                            {"domain", to_string(r.domain)},
                            {"condition", r.condition.name},
                            {"condition_index", r.condition.index},
                            {"scene_seed", r.scene_seed}});
  }
  json j = {{"format", "condadapt-manifest"},
            {"version", 1},
            {"name", name},
            {"split", split},
            {"classes", classes},
            {"height", height},
            {"width", width},
            {"conditions", conditions},
            {"seen_conditions", seen_conditions},
            {"records", records_json}};
  fs::create_directories(root);
  std::ofstream out(root / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + root.string());
  out << j.dump(1) << "\n";
}

DatasetManifest DatasetManifest::load(const fs::path& manifest_or_dir) {
  const fs::path file =
      fs::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.json" : manifest_or_dir;
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open manifest " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt manifest " + file.string() + ": " + e.what());
  }
  DatasetManifest m;
  m.root = file.parent_path();
  try {
    if (j.at("format") != "condadapt-manifest" || j.at("version") != 1)
      throw std::runtime_error("unsupported manifest format");
    m.name = j.at("name");
    m.split = j.at("split");
    m.classes = j.at("classes");
    m.height = j.at("height");
    m.width = j.at("width");
    m.conditions = j.at("conditions").get<std::vector<std::string>>();
    m.seen_conditions = j.at("seen_conditions");
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.image = r.at("image");
      rec.label = r.at("label");
      rec.domain = domain_from_string(r.at("domain"));
      rec.condition.name = r.at("condition");
      rec.condition.index = r.at("condition_index");
      rec.scene_seed = r.at("scene_seed");
      m.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + file.string() + ": " + e.what());
  }
  for (const auto& r : m.records) {
    for (const auto& rel : {r.image, r.label})
      if (!fs::exists(m.root / rel))
        throw std::runtime_error("manifest " + file.string() + " references missing file " +
                                 (m.root / rel).string());
    if (r.condition.index >= static_cast<int>(m.conditions.size()))
      throw std::runtime_error("manifest " + file.string() + " has condition index out of range");
  }
  return m;
}

namespace {

ConditionId condition_id(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw std::invalid_argument("condition '" + name + "' not in list");
  return {static_cast<int>(it - names.begin()), name};
}

void add_sample(DatasetManifest& m, const Sample& s, std::uint64_t scene_seed) {
  char stem[32];
  std::snprintf(stem, sizeof(stem), "%06zu", m.records.size());
  ManifestRecord rec;
  rec.image = std::string("images/") + stem + ".ppm";
  rec.label = std::string("labels/") + stem + ".pgm";
  rec.domain = s.domain;
  rec.condition = s.condition;
  rec.scene_seed = scene_seed;
  write_ppm(m.root / rec.image, s.image);
  write_pgm(m.root / rec.label, s.label);
  m.records.push_back(std::move(rec));
}

}  // namespace

DatasetPaths build_dataset(const DataConfig& cfg, const fs::path& root) {
  if (cfg.conditions.size() < 2) throw std::invalid_argument("need at least K=2 conditions");
  for (const auto& c : cfg.conditions)
    if (std::find(known_conditions().begin(), known_conditions().end(), c) ==
        known_conditions().end())
      throw std::invalid_argument("unknown condition '" + c + "'");
  std::vector<std::string> all = cfg.conditions;
  for (const auto& c : cfg.unseen_conditions) {
    if (std::find(all.begin(), all.end(), c) != all.end())
      throw std::invalid_argument("condition '" + c + "' is both seen and unseen");
    all.push_back(c);
  }
  const int K = static_cast<int>(cfg.conditions.size());

  SceneSpec source_spec = default_scene_spec(Domain::source);
  SceneSpec target_spec = default_scene_spec(Domain::target);
  for (SceneSpec* spec : {&source_spec, &target_spec}) {
    spec->height = cfg.height;
    spec->width = cfg.width;
    spec->classes = cfg.classes;
    spec->frequency_bands.clear();
  }

  auto make_manifest = [&](const std::string& name, const std::string& split) {
    DatasetManifest m;
    m.root = root / name;
    m.name = name;
    m.split = split;
    m.classes = cfg.classes;
    m.height = cfg.height;
    m.width = cfg.width;
    m.conditions = all;
    m.seen_conditions = K;
    fs::remove_all(m.root);
    return m;
  };

  auto render_source = [&](const std::string& name, const std::string& split, int count,
                           std::uint64_t stream) {
    DatasetManifest m = make_manifest(name, split);
    for (int i = 0; i < count; ++i) {
      const std::uint64_t seed = derive_seed(cfg.seed, stream, static_cast<std::uint64_t>(i));
      add_sample(m, generate_scene(seed, source_spec), seed);
    }
    m.save();
    return m.root;
  };

  auto render_target = [&](DatasetManifest& m, const std::string& condition, std::uint64_t seed) {
    Sample s = generate_scene(seed, target_spec);
    std::mt19937_64 rng(derive_seed(seed, 0x57E));
    const float strength = static_cast<float>(uniform(rng, cfg.min_strength, cfg.max_strength));
    s.image = apply_condition(s.image, condition, strength, derive_seed(seed, 0xC0D));
    s.condition = condition_id(all, condition);
    add_sample(m, s, seed);
  };

  DatasetPaths paths;
  paths.source_train = render_source("source_train", "train", cfg.source_train, 1);
  paths.source_eval = render_source("source_eval", "eval", cfg.source_eval, 2);

  {
    DatasetManifest m = make_manifest("target_train", "train");
    for (int i = 0; i < cfg.target_train; ++i)
      render_target(m, cfg.conditions[static_cast<std::size_t>(i % K)],
                    derive_seed(cfg.seed, 3, static_cast<std::uint64_t>(i)));
    m.save();
    paths.target_train = m.root;
  }
  {
    DatasetManifest m = make_manifest("target_eval", "eval");
    std::uint64_t index = 0;
    for (const auto& c : cfg.conditions)
      for (int i = 0; i < cfg.target_eval_per_condition; ++i)
        render_target(m, c, derive_seed(cfg.seed, 4, index++));
    for (const auto& c : cfg.unseen_conditions)
      for (int i = 0; i < cfg.unseen_eval; ++i) render_target(m, c, derive_seed(cfg.seed, 4, index++));
    m.save();
    paths.target_eval = m.root;
  }
  spdlog::info("dataset written to {}", root.string());
  return paths;
}

DatasetManifest save_samples(const std::vector<Sample>& samples, const fs::path& dir,
                             const std::string& name, const std::string& split, int classes,
                             const std::vector<std::string>& conditions, int seen_conditions) {
  if (samples.empty()) throw std::invalid_argument("save_samples: nothing to save");
  DatasetManifest m;
  m.root = dir;
  m.name = name;
  m.split = split;
  m.classes = classes;
  m.height = samples[0].image.shape().h;
  m.width = samples[0].image.shape().w;
  m.conditions = conditions;
  m.seen_conditions = seen_conditions;
  fs::remove_all(dir);
  for (const auto& s : samples) add_sample(m, s, 0);
  m.save();
  return m;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.size());
  for (const auto& r : manifest.records) {
    Sample s;
    s.image = read_ppm(manifest.root / r.image);
    s.label = read_pgm(manifest.root / r.label);
    if (s.image.shape().h != manifest.height || s.image.shape().w != manifest.width ||
        !(s.label.shape() == Shape{1, 1, manifest.height, manifest.width}))
      throw std::runtime_error("image/label geometry mismatch for " + (manifest.root / r.image).string());
    if (s.label.array().maxCoeff() > manifest.classes)
      throw std::runtime_error("label above class count in " + (manifest.root / r.label).string());
    s.domain = r.domain;
    s.condition = r.condition;
    out.push_back(std::move(s));
  }
  return out;
}

Batch make_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
  std::vector<const Tensor<float>*> images;
  std::vector<const LabelMap*> labels;
  Batch b;
  for (auto i : indices) {
    images.push_back(&samples.at(i).image);
    labels.push_back(&samples[i].label);
    b.conditions.push_back(samples[i].condition.index);
  }
  b.images = stack_batch(images);
  b.labels = stack_batch(labels);
  b.indices = indices;
  return b;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

BatchStream::BatchStream(const std::vector<Sample>& samples, int batch_size,
                         std::uint64_t shuffle_seed, bool shuffle)
    : samples_(&samples), batch_size_(batch_size), seed_(shuffle_seed), shuffle_(shuffle) {
  if (batch_size <= 0) throw std::invalid_argument("batch size must be positive");
}

std::size_t BatchStream::batches_per_epoch() const {
  return (samples_->size() + static_cast<std::size_t>(batch_size_) - 1) /
         static_cast<std::size_t>(batch_size_);
}

std::vector<std::vector<std::size_t>> BatchStream::epoch(int epoch_index) const {
  std::vector<std::size_t> order;
  if (shuffle_) {
    order = shuffled_indices(samples_->size(), derive_seed(seed_, 0xE90C, static_cast<std::uint64_t>(epoch_index)));
  } else {
    order.resize(samples_->size());
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size_)) {
    const auto end = std::min(order.size(), i + static_cast<std::size_t>(batch_size_));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

std::vector<Batch> BatchStream::epoch_batches(int epoch_index) const {
  std::vector<Batch> out;
  for (const auto& idx : epoch(epoch_index)) out.push_back(make_batch(*samples_, idx));
  return out;
}

ConditionBalancedSampler::ConditionBalancedSampler(const std::vector<Sample>& samples,
                                                   int conditions, std::uint64_t seed)
    : samples_(&samples), conditions_(conditions), seed_(seed) {
  if (conditions <= 0) throw std::invalid_argument("sampler needs at least one condition");
  pools_.resize(static_cast<std::size_t>(conditions));
  queues_.resize(pools_.size());
  cursor_.assign(pools_.size(), 0);
  refills_.assign(pools_.size(), 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int c = samples[i].condition.index;
    if (c >= 0 && c < conditions) pools_[static_cast<std::size_t>(c)].push_back(i);
  }
  for (int c = 0; c < conditions; ++c)
    if (pools_[static_cast<std::size_t>(c)].empty())
      throw std::invalid_argument("no samples for condition " + std::to_string(c));
}

std::size_t ConditionBalancedSampler::draw(int condition) {
  const auto c = static_cast<std::size_t>(condition);
  if (cursor_[c] >= queues_[c].size()) {
    const auto order = shuffled_indices(
        pools_[c].size(), derive_seed(seed_, static_cast<std::uint64_t>(condition) + 1,
                                      static_cast<std::uint64_t>(refills_[c]++)));
    queues_[c].clear();
    for (auto i : order) queues_[c].push_back(pools_[c][i]);
    cursor_[c] = 0;
  }
  return queues_[c][cursor_[c]++];
}

Batch ConditionBalancedSampler::next(int batch_size) {
  std::vector<std::size_t> idx;
  for (int k = 0; k < batch_size; ++k) idx.push_back(draw(static_cast<int>(slot_++ % conditions_)));
  return make_batch(*samples_, idx);
}

}  // namespace condadapt
