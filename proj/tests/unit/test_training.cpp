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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "gradcheck.hpp"
#include "ppc/error.hpp"
#include "ppc/eval.hpp"
#include "ppc/training.hpp"
#include "shapes.hpp"

using namespace ppc;

namespace {

double cross_entropy(const Mat& logits, std::span<const int> labels) {
  double s = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const double z = logits.row(b).maxCoeff();
    const double lse = z + std::log((logits.row(b).array() - z).exp().sum());
    s += lse - logits(b, labels[static_cast<size_t>(b)]);
  }
  return s / static_cast<double>(logits.rows());
}

using ppc::test::overfit_spec;

CloudSource memory_source(size_t points) {
  SourceOptions so;
  so.n_points = points;
  return CloudSource(so);
}

bool same_parameters(Model& a, Model& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].second->value != pb[i].second->value) return false;
  }
  auto ba = a.buffers();
  auto bb = b.buffers();
  for (size_t i = 0; i < ba.size(); ++i) {
    if (*ba[i].second != *bb[i].second) return false;
  }
  return pa.size() == pb.size();
}

}  // namespace

TEST_CASE("default training parameters") {
  const TrainParams p;
  CHECK(p.optimizer == "sgd");
  CHECK(p.learning_rate == 0.001);
  CHECK(p.scheduler == "cosine");
  CHECK(p.dropout == 0.6);
  CHECK(p.epochs == 300);
  CHECK(p.batch_size == 10);
  CHECK(p.weight_decay == 0.01);
  CHECK(p.jitter_fraction == 0.03);
  CHECK(p.focal_gamma == 2.0);
  CHECK(p.momentum == 0.9);
  CHECK(p.focal_alpha.empty());
  CHECK(train_params_from_json(nlohmann::json::parse(to_json(p).dump())) == p);
  CHECK_THROWS_AS(train_params_from_json(nlohmann::json{{"learning_rate", -1.0}}), Error);
  CHECK_THROWS_AS(train_params_from_json(nlohmann::json{{"optimiser", "sgd"}}), Error);
  CHECK_THROWS_AS(train_params_from_json(nlohmann::json{{"scheduler", "step"}}), Error);
}

TEST_CASE("focal loss reference values") {
  Mat z = Mat::Zero(1, 2);
  const std::vector<int> y{0};
  CHECK(focal_loss(z, y, 0.0).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(focal_loss(z, y, 0.0).loss - 0.693147) < 1e-6);
  CHECK(focal_term(0.9, 2.0) == doctest::Approx(1.0536e-3).epsilon(1e-4));
  CHECK(std::abs(focal_term(0.9, 2.0) - 0.01 * -std::log(0.9)) < 1e-15);
  // Logits giving p_t = 0.9 for two classes.
  Mat z9(1, 2);
  z9 << std::log(9.0), 0.0;
  CHECK(focal_loss(z9, y, 2.0).loss == doctest::Approx(0.01 * -std::log(0.9)).epsilon(1e-12));
}

TEST_CASE("gamma zero is cross-entropy") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const int b = 1 + static_cast<int>(rng.below(10));
    const int c = 2 + static_cast<int>(rng.below(5));
    const Mat z = ppc::test::random_mat(b, c, rng, 5.0);
    std::vector<int> y;
    for (int i = 0; i < b; ++i) y.push_back(static_cast<int>(rng.below(static_cast<uint64_t>(c))));
    CHECK(std::abs(focal_loss(z, y, 0.0).loss - cross_entropy(z, y)) < 1e-9);
  }
}

TEST_CASE("focal loss stays below cross-entropy and falls to zero") {
  double prev = 1e300;
  for (int i = 1; i <= 10000; ++i) {
    const double p = static_cast<double>(i) / 10001.0;
    const double fl = focal_term(p, 2.0);
    CHECK(fl <= -std::log(p));
    CHECK(fl < prev);
    prev = fl;
  }
  CHECK(focal_term(1.0, 2.0) == 0.0);
}

TEST_CASE("focal loss rejects bad labels") {
  const Mat z = Mat::Zero(2, 3);
  CHECK_THROWS_AS(focal_loss(z, std::vector<int>{0, 3}, 2.0), Error);
  CHECK_THROWS_AS(focal_loss(z, std::vector<int>{0, -1}, 2.0), Error);
  CHECK_THROWS_AS(focal_loss(z, std::vector<int>{0}, 2.0), Error);
  CHECK_THROWS_AS(focal_loss(z, std::vector<int>{0, 1}, -1.0), Error);
}

TEST_CASE("gradient checks: focal loss") {
  Rng rng(2029);
  for (int i = 0; i < 50; ++i) {
    const auto rep = ppc::test::check_focal(rng);
    INFO("config " << i);
    CHECK(rep.worst < 1e-4);
  }
}

TEST_CASE("cosine schedule") {
  TrainParams p;
  p.epochs = 300;
  CHECK(lr_at(0, p) == 0.001);
  CHECK(lr_at(150, p) == 0.0005);
  for (int e : {0, 75, 150, 225, 299}) {
    const double closed = 0.5 * 0.001 * (1.0 + std::cos(std::numbers::pi * e / 300.0));
    CHECK(std::abs(lr_at(e, p) - closed) < 1e-12);
  }
  CHECK(lr_at(299, p) > 0.0);
  CHECK_THROWS_AS(lr_at(300, p), Error);
  CHECK_THROWS_AS(lr_at(-1, p), Error);
}

TEST_CASE("sgd update rule") {
  Parameter th;
  th.value = Mat::Constant(1, 1, 1.0);
  th.grad = Mat::Constant(1, 1, 1.0);
  Mat v;
  sgd_step(th, v, 0.1, 0.0, 0.0);
  CHECK(th.value(0, 0) == doctest::Approx(0.9).epsilon(1e-15));

  th.value(0, 0) = 1.0;
  th.grad(0, 0) = 0.0;
  v.resize(0, 0);
  sgd_step(th, v, 0.1, 0.0, 0.01);
  CHECK(th.value(0, 0) == doctest::Approx(0.999).epsilon(1e-15));

  Rng rng(2);
  th.value = ppc::test::random_mat(3, 4, rng);
  const Mat keep = th.value;
  th.grad.setZero(3, 4);
  v.resize(0, 0);
  sgd_step(th, v, 0.1, 0.9, 0.0);
  CHECK(th.value == keep);

  // Momentum accumulates: v1 = g, v2 = 0.9 g + g.
  th.value = Mat::Zero(1, 1);
  th.grad = Mat::Constant(1, 1, 1.0);
  v.resize(0, 0);
  sgd_step(th, v, 1.0, 0.9, 0.0);
  sgd_step(th, v, 1.0, 0.9, 0.0);
  CHECK(th.value(0, 0) == doctest::Approx(-2.9));

  th.grad(0, 0) = std::nan("");
  try {
    sgd_step(th, v, 0.1, 0.9, 0.0);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numeric);
  }
}

TEST_CASE("weight decay alone shrinks every parameter") {
  Rng rng(3);
  Model m = build_network(ppc::test::tiny_spec(), rng);
  m.zero_grad();
  SgdOptimizer opt;
  std::vector<Mat> prev;
  for (auto& [n, p] : m.parameters()) prev.push_back(p->value);
  for (int step = 0; step < 5; ++step) {
    opt.step(m, 0.1, 0.0, 0.01);
    size_t i = 0;
    for (auto& [n, p] : m.parameters()) {
      const Mat& before = prev[i];
      for (Eigen::Index k = 0; k < before.size(); ++k) {
        if (before.data()[k] != 0.0) CHECK(std::abs(p->value.data()[k]) < std::abs(before.data()[k]));
      }
      prev[i++] = p->value;
    }
  }
}

TEST_CASE("zero epochs leaves the model untouched") {
  auto data = ppc::test::separable_dataset(2, 3, 1);
  Model a = initial_model(overfit_spec(2), 5);
  Model b = initial_model(overfit_spec(2), 5);
  auto src = memory_source(128);
  TrainParams p;
  p.epochs = 0;
  const auto h = train(a, data, src, p);
  CHECK(h.epochs.empty());
  CHECK(same_parameters(a, b));
}

TEST_CASE("training is deterministic and resumable") {
  auto data = ppc::test::separable_dataset(2, 4, 2);
  auto src = memory_source(128);
  TrainParams p;
  p.epochs = 4;
  p.batch_size = 3;
  p.seed = 17;

  Model a = initial_model(overfit_spec(2), 9);
  Model b = initial_model(overfit_spec(2), 9);
  const auto ha = train(a, data, src, p);
  const auto hb = train(b, data, src, p);
  CHECK(same_parameters(a, b));
  std::ostringstream ca, cb;
  ha.write_csv(ca);
  hb.write_csv(cb);
  CHECK(ca.str() == cb.str());
  REQUIRE(ha.epochs.size() == 4);
  CHECK(ha.epochs[2].lr == lr_at(2, p));

  // Two epochs, stop, continue from the saved state.
  Model c = initial_model(overfit_spec(2), 9);
  TrainState st;
  TrainParams first = p;
  first.recalibrate_norms = false;
  TrainHooks stop;
  Model snapshot = c;
  SgdOptimizer snap_opt;
  stop.on_epoch = [&](const EpochRecord& r, Model& m, const TrainState& s) {
    if (r.epoch == 1) {
      snapshot = m;
      snap_opt = s.optimizer;
    }
  };
  train(c, data, src, first, st, stop);
  TrainState resumed;
  resumed.optimizer = snap_opt;
  resumed.next_epoch = 2;
  const auto hr = train(snapshot, data, src, p, resumed);
  REQUIRE(hr.epochs.size() == 2);
  CHECK(hr.epochs[0].epoch == 2);
  CHECK(hr.epochs[1].loss == ha.epochs[3].loss);
  CHECK(same_parameters(snapshot, a));
}

TEST_CASE("a different seed changes the run") {
  auto data = ppc::test::separable_dataset(2, 3, 2);
  auto src = memory_source(128);
  TrainParams p;
  p.epochs = 1;
  Model a = initial_model(overfit_spec(2), 9);
  Model b = initial_model(overfit_spec(2), 9);
  p.seed = 1;
  train(a, data, src, p);
  p.seed = 2;
  train(b, data, src, p);
  CHECK_FALSE(same_parameters(a, b));
}

TEST_CASE("labels beyond the model's classes are rejected") {
  auto data = ppc::test::separable_dataset(3, 2, 1);
  auto src = memory_source(128);
  Model m = initial_model(overfit_spec(2), 1);
  TrainParams p;
  p.epochs = 1;
  CHECK_THROWS_AS(train(m, data, src, p), Error);
}

TEST_CASE("loss falls over the first ten epochs") {
  // Full-batch steps without dropout, so each epoch is one deterministic
  // descent step apart from jitter.
  auto data = ppc::test::separable_dataset(4, 10, 7);
  auto src = memory_source(128);
  Model m = initial_model(overfit_spec(4), 1);
  TrainParams p;
  p.epochs = 10;
  p.seed = 3;
  p.batch_size = 40;
  p.dropout = 0.0;
  p.learning_rate = 0.01;
  const auto h = train(m, data, src, p);
  int non_improving = 0;
  for (size_t e = 1; e < h.epochs.size(); ++e) {
    if (h.epochs[e].loss >= h.epochs[e - 1].loss) ++non_improving;
  }
  CHECK(non_improving <= 1);
  CHECK(h.epochs.back().loss < 0.5 * h.epochs.front().loss);
}

TEST_CASE("separable two-class set is fit within 50 epochs") {
  auto data = ppc::test::separable_dataset(2, 10, 7);
  auto src = memory_source(128);
  Model m = initial_model(overfit_spec(2), 1);
  TrainParams p;
  p.epochs = 50;
  p.seed = 3;
  train(m, data, src, p);
  const auto rep = evaluate(m, data, data.train, src, 0);
  CHECK(rep.accuracy == 1.0);
}
