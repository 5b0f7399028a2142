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

#include <functional>
#include <json.hpp>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ppc/network.hpp"
#include "ppc/tasks.hpp"

namespace ppc {

/// Defaults: SGD, lr 0.001, cosine annealing, dropout 0.6, 300 epochs,
/// batch 10, weight decay 0.01, jitter 3% of the channel variance.
struct TrainParams {
  std::string optimizer = "sgd";
  double momentum = 0.9;
  double learning_rate = 0.001;
  std::string scheduler = "cosine";
  int epochs = 300;
  int batch_size = 10;
  double weight_decay = 0.01;
  double dropout = 0.6;
  double focal_gamma = 2.0;
  std::vector<double> focal_alpha;  // optional per-class weights
  double jitter_fraction = 0.03;
  uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 = final checkpoint only
  /// After the last epoch, replace running normalization estimates with
  /// statistics pooled over one pass of the (un-jittered) training set.
  bool recalibrate_norms = true;

  void validate() const;
  bool operator==(const TrainParams&) const = default;
};

nlohmann::ordered_json to_json(const TrainParams& p);
TrainParams train_params_from_json(const nlohmann::json& j);

struct LossResult {
  double loss = 0.0;
  Mat grad;  // d loss / d logits
};

/// Mean over the batch of -alpha_t (1 - p_t)^gamma log p_t, p_t the softmax
/// probability of the true class.
LossResult focal_loss(const Mat& logits, std::span<const int> labels, double gamma,
                      std::span<const double> alpha = {});

/// Scalar form for one true-class probability.
double focal_term(double p_t, double gamma);

/// 0.5 * lr0 * (1 + cos(pi * epoch / epochs)).
double lr_at(int epoch, const TrainParams& params);

/// v <- mu v + g + wd theta; theta <- theta - lr v.
void sgd_step(Parameter& param, Mat& velocity, double lr, double momentum, double weight_decay);

class SgdOptimizer {
 public:
  void step(Model& model, double lr, double momentum, double weight_decay);

  std::vector<Mat>& velocities() { return velocity_; }
  const std::vector<Mat>& velocities() const { return velocity_; }

 private:
  std::vector<Mat> velocity_;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// epoch,loss,train_acc,lr. Wall-clock is left out so reruns compare
  /// byte-for-byte.
  void write_csv(std::ostream& out) const;
};

struct TrainState {
  SgdOptimizer optimizer;
  int next_epoch = 0;
};

struct TrainHooks {
  std::function<void(const EpochRecord&, Model&, const TrainState&)> on_epoch;
};

/// Runs epochs [state.next_epoch, params.epochs). Every random draw is
/// derived from (params.seed, epoch, position), so a resumed run matches an
/// uninterrupted one.
TrainHistory train(Model& model, const TaskDataset& data, CloudSource& clouds,
                   const TrainParams& params, TrainState& state, const TrainHooks& hooks = {});

/// Pooled-statistics pass: Train-mode forward over the training split in
/// fixed order, no dropout, no jitter, parameters untouched.
void recalibrate_norms(Model& model, const TaskDataset& data, CloudSource& clouds, const TrainParams& params);

/// Fresh weights drawn from a stream derived from `seed` alone.
Model initial_model(const NetworkSpec& spec, uint64_t seed);

inline TrainHistory train(Model& model, const TaskDataset& data, CloudSource& clouds,
                          const TrainParams& params) {
  TrainState state;
  return train(model, data, clouds, params, state);
}

}  // namespace ppc
