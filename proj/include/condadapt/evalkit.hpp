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

// Segmentation metrics and diagnostic artifacts.

#include "condadapt/segnet.hpp"
#include "condadapt/toyworld.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace condadapt {

/// L x L pixel counts, rows = ground truth, columns = prediction.
/// Pixels with ground truth 0 are skipped.
class Confusion {
 public:
  using Matrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

  explicit Confusion(int classes = 0);

  /// pred and gt are [N,1,H,W]; predictions must lie in 1..L.
  void add(const LabelMap& pred, const LabelMap& gt);
  void merge(const Confusion& other);

  int classes() const { return static_cast<int>(counts_.rows()); }
  const Matrix& counts() const { return counts_; }
  std::int64_t total() const { return counts_.sum(); }

  friend bool operator==(const Confusion& a, const Confusion& b) { return a.counts_ == b.counts_; }

 private:
  Matrix counts_;
};

Confusion confusion(const LabelMap& pred, const LabelMap& gt, int classes);

struct IouResult {
  /// NaN for classes absent from both ground truth and prediction.
  std::vector<double> per_class;
  /// Mean over the classes that are present; NaN if none are.
  double mean = std::numeric_limits<double>::quiet_NaN();
};

IouResult miou(const Confusion& c);

/// Point-biserial correlation between a continuous score and a binary
/// outcome; NaN when either group is empty or the score is constant.
double point_biserial(const std::vector<double>& score, const std::vector<bool>& outcome);

struct ConditionMetrics {
  std::string condition;
  bool unseen = false;
  std::size_t samples = 0;
  Confusion confusion;
  IouResult iou;
};

struct AmbivalenceStats {
  double mean_correct = std::numeric_limits<double>::quiet_NaN();
  double mean_wrong = std::numeric_limits<double>::quiet_NaN();
  double point_biserial = std::numeric_limits<double>::quiet_NaN();
  std::size_t correct_pixels = 0;
  std::size_t wrong_pixels = 0;
  double gap() const { return mean_correct - mean_wrong; }
};

struct MetricReport {
  std::string model;
  std::string mode;
  int classes = 0;
  Confusion overall;      // every seen-condition sample
  IouResult overall_iou;
  std::vector<ConditionMetrics> conditions;  // manifest order, unseen last
  bool has_ambivalence = false;
  AmbivalenceStats ambivalence;

  /// mIoU over the seen conditions (the headline number).
  double miou() const { return overall_iou.mean; }
  const ConditionMetrics* find(const std::string& condition) const;
};

/// Maps prediction-resolution probabilities [B,L,h,w] to a confidence
/// map [B,1,h,w] in (0,1).
using AmbivalenceFn = std::function<Tensor<float>(const Tensor<float>&)>;

/// Accumulates a MetricReport over a dataset. With `ambivalence` set, also
/// gathers the confidence-versus-correctness statistics.
MetricReport evaluate(const SegNet<float>& net, const std::vector<Sample>& samples,
                      const DatasetManifest& manifest, PredictMode mode, const std::string& model_name,
                      const AmbivalenceFn& ambivalence = {}, int batch_size = 16);

/// CSV with one row per class and condition plus mIoU rows.
std::string report_csv(const MetricReport& r);
/// Human-readable table.
std::string report_text(const MetricReport& r);
void write_report(const MetricReport& r, const std::filesystem::path& dir);

/// Per-pixel colour image of a label map, 0 drawn black.
Tensor<float> colorize_labels(const LabelMap& labels, int classes);

/// Pseudo-label region map: hard (no label) black, wrong grey, right white.
Tensor<float> region_map(const LabelMap& pseudo, const LabelMap& gt);

/// Writes `<stem>_pred.ppm`, `<stem>_error.pgm` (white where wrong) and,
/// when given, `<stem>_regions.pgm` and `<stem>_ambivalence.pgm`. All maps
/// are single images at label resolution.
void write_panels(const std::filesystem::path& dir, const std::string& stem, const LabelMap& pred,
                  const LabelMap& gt, int classes, const LabelMap* pseudo = nullptr,
                  const Tensor<float>* ambivalence = nullptr);

}  // namespace condadapt
