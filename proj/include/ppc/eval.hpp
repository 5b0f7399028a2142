// Copyright 2026 The ppc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <json.hpp>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ppc/network.hpp"
#include "ppc/tasks.hpp"
#include "ppc/training.hpp"

namespace ppc {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;  // instances of this class in the truth labels
};

/// Rows are truth, columns are predictions.
std::vector<std::vector<int>> confusion_matrix(std::span<const int> preds, std::span<const int> truth,
                                               int classes);
std::vector<ClassMetrics> per_class_metrics(std::span<const int> preds, std::span<const int> truth,
                                            int classes);

/// Unweighted mean of per-class F1; a class with P + R = 0 scores 0.
double f1_macro(std::span<const int> preds, std::span<const int> truth, int classes);
double accuracy(std::span<const int> preds, std::span<const int> truth);

/// Step-wise area under the precision-recall curve. Thresholds are the
/// distinct scores in descending order, so tied scores enter together.
double average_precision(std::span<const double> scores, std::span<const int> truth);

/// Labels for the front task.
inline constexpr int kBack = 0;
inline constexpr int kFront = 1;

/// View A is the tablet as captured, view B its x-axis rotation. A correct
/// model labels B oppositely, so the views agree when pred(B) = 1 - pred(A);
/// the emitted label is pred(A). Disagreement abstains.
std::optional<int> agreement_predict(const RowVec& logits_a, const RowVec& logits_b);

struct AgreementStats {
  size_t tablets = 0;
  size_t emitted = 0;
  size_t correct = 0;
  double coverage = 0.0;
  double precision = 0.0;  // 0 when nothing was emitted
};

struct InstancePrediction {
  std::string tablet_id;
  bool flipped = false;
  int truth = 0;
  int pred = 0;
  std::vector<double> probabilities;
};

struct EvalReport {
  std::string task;
  std::string variant;
  uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::optional<double> average_precision;  // two-class tasks
  std::optional<AgreementStats> agreement;  // front task
  std::vector<std::vector<int>> confusion;
  std::vector<InstancePrediction> predictions;
  nlohmann::ordered_json network;  // spec echo of the evaluated model
  double final_train_acc = -1.0;   // < 0 when not trained in this run
};

nlohmann::ordered_json to_json(const EvalReport& r);

/// task,variant,seed,macro_f1,ap,accuracy,coverage,precision; missing
/// values are empty cells.
void write_report_csv(std::span<const EvalReport> reports, std::ostream& out);
void write_predictions_csv(const EvalReport& r, std::ostream& out);

/// Eval-mode logits for one instance. The shuffle stream depends only on
/// (seed, tablet id), so both views of a tablet see the same permutation.
Mat predict_instance(const Model& model, const Instance& inst, CloudSource& clouds, uint64_t seed);

EvalReport evaluate(const Model& model, const TaskDataset& data, std::span<const size_t> split,
                    CloudSource& clouds, uint64_t seed);

/// Builds the variant spec, trains it with the base params and seed, then
/// evaluates on the test split.
EvalReport ablation_run(const NetworkSpec& base, Omission omit, const TaskDataset& data,
                        CloudSource& clouds, const TrainParams& params);

/// One run per input size; every layer size scales proportionally.
std::vector<EvalReport> point_sweep(const NetworkSpec& base, std::span<const int> sizes,
                                    const TaskDataset& data, CloudSource& clouds,
                                    const TrainParams& params);

/// SVG renderings: a precision-recall curve and a bar chart of macro-F1.
std::string pr_curve_svg(std::span<const double> scores, std::span<const int> truth,
                         const std::string& title);
std::string bar_chart_svg(std::span<const EvalReport> reports, const std::string& title);

}  // namespace ppc
