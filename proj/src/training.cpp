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

#include "ppc/training.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numbers>

#include "ppc/error.hpp"
#include "ppc/json_util.hpp"

namespace ppc {

void TrainParams::validate() const {
  auto fail = [](const std::string& what) { throw_usage("training: " + what); };
  if (optimizer != "sgd") fail("only the 'sgd' optimizer is supported");
  if (scheduler != "cosine") fail("only the 'cosine' scheduler is supported");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0, 1)");
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (focal_gamma < 0.0) fail("focal_gamma must be >= 0");
  if (jitter_fraction < 0.0) fail("jitter_fraction must be >= 0");
  if (checkpoint_every < 0) fail("checkpoint_every must be >= 0");
  for (double a : focal_alpha) {
    if (!(a > 0.0)) fail("focal_alpha entries must be positive");
  }
}

nlohmann::ordered_json to_json(const TrainParams& p) {
  nlohmann::ordered_json j;
  j["optimizer"] = p.optimizer;
  j["momentum"] = p.momentum;
  j["learning_rate"] = p.learning_rate;
  j["scheduler"] = p.scheduler;
  j["epochs"] = p.epochs;
  j["batch_size"] = p.batch_size;
  j["weight_decay"] = p.weight_decay;
  j["dropout"] = p.dropout;
  j["focal_gamma"] = p.focal_gamma;
  j["focal_alpha"] = p.focal_alpha;
  j["jitter_fraction"] = p.jitter_fraction;
  j["seed"] = p.seed;
  j["checkpoint_every"] = p.checkpoint_every;
  j["recalibrate_norms"] = p.recalibrate_norms;
  return j;
}

TrainParams train_params_from_json(const nlohmann::json& j) {
  check_keys(j, {"optimizer", "momentum", "learning_rate", "scheduler", "epochs", "batch_size",
                 "weight_decay", "dropout", "focal_gamma", "focal_alpha", "jitter_fraction", "seed",
                 "checkpoint_every", "recalibrate_norms"},
             "training");
  TrainParams p;
  get_if(j, "optimizer", p.optimizer, "training");
  get_if(j, "momentum", p.momentum, "training");
  get_if(j, "learning_rate", p.learning_rate, "training");
  get_if(j, "scheduler", p.scheduler, "training");
  get_if(j, "epochs", p.epochs, "training");
  get_if(j, "batch_size", p.batch_size, "training");
  get_if(j, "weight_decay", p.weight_decay, "training");
  get_if(j, "dropout", p.dropout, "training");
  get_if(j, "focal_gamma", p.focal_gamma, "training");
  get_if(j, "focal_alpha", p.focal_alpha, "training");
  get_if(j, "jitter_fraction", p.jitter_fraction, "training");
  get_if(j, "seed", p.seed, "training");
  get_if(j, "checkpoint_every", p.checkpoint_every, "training");
  get_if(j, "recalibrate_norms", p.recalibrate_norms, "training");
  p.validate();
  return p;
}

double focal_term(double p_t, double gamma) {
  return -std::pow(1.0 - p_t, gamma) * std::log(p_t);
}

LossResult focal_loss(const Mat& logits, std::span<const int> labels, double gamma,
                      std::span<const double> alpha) {
  const auto batch = logits.rows();
  const auto classes = logits.cols();
  if (static_cast<size_t>(batch) != labels.size()) throw_usage("focal_loss: label count mismatch");
  if (batch == 0) throw_usage("focal_loss: empty batch");
  if (gamma < 0.0) throw_usage("focal_loss: gamma must be >= 0");
  if (!alpha.empty() && static_cast<Eigen::Index>(alpha.size()) != classes) {
    throw_usage("focal_loss: alpha must have one weight per class");
  }
  LossResult out;
  out.grad.resize(batch, classes);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int t = labels[static_cast<size_t>(b)];
    if (t < 0 || t >= classes) throw_usage("focal_loss: label " + std::to_string(t) + " out of range");
    const double zmax = logits.row(b).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) sum += std::exp(logits(b, c) - zmax);
    const double lse = zmax + std::log(sum);
    const double log_pt = logits(b, t) - lse;
    const double pt = std::exp(log_pt);
    const double a = alpha.empty() ? 1.0 : alpha[static_cast<size_t>(t)];
    const double one_minus = 1.0 - pt;
    const double mod = std::pow(one_minus, gamma);
    out.loss += -a * mod * log_pt;
    // d/dz_c = a [gamma (1-p)^(gamma-1) p log p - (1-p)^gamma] (delta_ct - p_c)
    double slope = -mod;
    if (gamma != 0.0 && one_minus > 0.0) slope += gamma * std::pow(one_minus, gamma - 1.0) * pt * log_pt;
    slope *= a / static_cast<double>(batch);
    for (Eigen::Index c = 0; c < classes; ++c) {
      const double pc = std::exp(logits(b, c) - lse);
      out.grad(b, c) = slope * ((c == t ? 1.0 : 0.0) - pc);
    }
  }
  out.loss /= static_cast<double>(batch);
  return out;
}

double lr_at(int epoch, const TrainParams& params) {
  if (epoch < 0 || epoch >= params.epochs) {
    throw_usage("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(params.epochs) + ")");
  }
  const double lr = 0.5 * params.learning_rate *
                    (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(params.epochs)));
  return std::max(0.0, lr);
}

void sgd_step(Parameter& param, Mat& velocity, double lr, double momentum, double weight_decay) {
  if (!param.grad.allFinite()) throw_numeric("sgd_step: non-finite gradient");
  if (velocity.rows() != param.value.rows() || velocity.cols() != param.value.cols()) {
    velocity = Mat::Zero(param.value.rows(), param.value.cols());
  }
  velocity = momentum * velocity + param.grad + weight_decay * param.value;
  param.value -= lr * velocity;
}

void SgdOptimizer::step(Model& model, double lr, double momentum, double weight_decay) {
  auto params = model.parameters();
  velocity_.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    try {
      sgd_step(*params[i].second, velocity_[i], lr, momentum, weight_decay);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " in '" + params[i].first + "'");
    }
  }
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,loss,train_acc,lr\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << std::setprecision(17) << e.loss << ',' << e.train_acc << ',' << e.lr << '\n';
  }
}

namespace {
enum StreamTag : uint64_t { kOrder = 1, kJitter = 2, kForward = 3, kInit = 4, kCalibrate = 5 };
}

void recalibrate_norms(Model& model, const TaskDataset& data, CloudSource& clouds, const TrainParams& params) {
  struct Pool {
    double count = 0.0;
    RowVec sum, sum_sq;
  };
  std::map<BatchNorm*, Pool> pools;
  ForwardOptions fopts;
  fopts.mode = Mode::Train;
  fopts.dropout = 0.0;
  const Rng root(params.seed);
  size_t batch_no = 0;
  for (size_t start = 0; start < data.train.size(); start += static_cast<size_t>(params.batch_size), ++batch_no) {
    const size_t end = std::min(data.train.size(), start + static_cast<size_t>(params.batch_size));
    std::vector<PointCloud> batch;
    for (size_t i = start; i < end; ++i) batch.push_back(clouds.get(data.instances[data.train[i]]));
    Rng fr = root.derive({kCalibrate, batch_no});
    ForwardTrace trace;
    forward(model, batch, fopts, fr, &trace);
    for (auto& [norm, st] : traced_norms(model, trace)) {
      auto& p = pools[norm];
      const double n = static_cast<double>(st->count);
      const RowVec sq = st->var.array() + st->mean.array().square();
      if (p.count == 0.0) {
        p.sum = n * st->mean;
        p.sum_sq = n * sq;
      } else {
        p.sum += n * st->mean;
        p.sum_sq += n * sq;
      }
      p.count += n;
    }
  }
  for (auto& [norm, p] : pools) {
    if (p.count < 2.0) continue;
    const RowVec mean = p.sum / p.count;
    const RowVec var = (p.sum_sq / p.count).array() - mean.array().square();
    norm->running_mean = mean;
    norm->running_var = var.cwiseMax(0.0) * (p.count / (p.count - 1.0));
  }
}

Model initial_model(const NetworkSpec& spec, uint64_t seed) {
  Rng rng = Rng(seed).derive({kInit});
  return build_network(spec, rng);
}

TrainHistory train(Model& model, const TaskDataset& data, CloudSource& clouds,
                   const TrainParams& params, TrainState& state, const TrainHooks& hooks) {
  params.validate();
  if (data.train.empty()) throw_data("train: training split is empty");
  for (size_t i : data.train) {
    if (data.instances[i].label >= model.spec.num_classes) {
      throw_data("train: label " + std::to_string(data.instances[i].label) + " exceeds the model's " +
                 std::to_string(model.spec.num_classes) + " classes");
    }
  }
  const Rng root(params.seed);
  TrainHistory history;
  ForwardOptions fopts;
  fopts.mode = Mode::Train;
  fopts.dropout = params.dropout;

  for (int epoch = state.next_epoch; epoch < params.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_at(epoch, params);
    std::vector<size_t> order = data.train;
    Rng order_rng = root.derive({kOrder, static_cast<uint64_t>(epoch)});
    order_rng.shuffle(order);

    double loss_sum = 0.0;
    size_t correct = 0;
    size_t batch_no = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(params.batch_size), ++batch_no) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(params.batch_size));
      std::vector<PointCloud> batch;
      std::vector<int> labels;
      for (size_t i = start; i < end; ++i) {
        const auto& inst = data.instances[order[i]];
        Rng jr = root.derive({kJitter, static_cast<uint64_t>(epoch), order[i]});
        batch.push_back(jitter(clouds.get(inst), params.jitter_fraction, jr));
        labels.push_back(inst.label);
      }
      Rng fr = root.derive({kForward, static_cast<uint64_t>(epoch), batch_no});
      ForwardTrace trace;
      model.zero_grad();
      const Mat logits = forward(model, batch, fopts, fr, &trace);
      const LossResult loss = focal_loss(logits, labels, params.focal_gamma, params.focal_alpha);
      if (!std::isfinite(loss.loss)) throw_numeric("train: non-finite loss at epoch " + std::to_string(epoch));
      backward(model, trace, loss.grad);
      apply_running_stats(model, trace);
      state.optimizer.step(model, lr, params.momentum, params.weight_decay);

      loss_sum += loss.loss * static_cast<double>(labels.size());
      for (Eigen::Index b = 0; b < logits.rows(); ++b) {
        Eigen::Index arg;
        logits.row(b).maxCoeff(&arg);
        if (arg == labels[static_cast<size_t>(b)]) ++correct;
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.lr = lr;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.epochs.push_back(rec);
    state.next_epoch = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(rec, model, state);
  }
  if (params.recalibrate_norms && !history.epochs.empty()) recalibrate_norms(model, data, clouds, params);
  return history;
}

}  // namespace ppc
