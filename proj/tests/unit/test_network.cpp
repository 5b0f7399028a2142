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

#include <functional>

#include "gradcheck.hpp"
#include "ppc/error.hpp"
#include "ppc/network.hpp"

using namespace ppc;
using ppc::test::random_cloud;
using ppc::test::tiny_spec;

namespace {

bool same_parameters(Model& a, Model& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].first != pb[i].first || pa[i].second->value != pb[i].second->value) return false;
  }
  return true;
}

PointCloud permuted(const PointCloud& pc, Rng& rng) {
  const auto perm = rng.permutation(pc.size());
  PointCloud out = pc;
  for (size_t i = 0; i < perm.size(); ++i) {
    out.positions.row(static_cast<Eigen::Index>(i)) = pc.positions.row(perm[i]);
    out.normals.row(static_cast<Eigen::Index>(i)) = pc.normals.row(perm[i]);
  }
  return out;
}

}  // namespace

TEST_CASE("standard spec reproduces the five-level pyramid") {
  const NetworkSpec s = NetworkSpec::standard(4);
  REQUIRE(s.layers.size() == 5);
  const ConvVariant variants[] = {ConvVariant::LocalEdge, ConvVariant::EdgeVertex, ConvVariant::Vertex,
                                  ConvVariant::Vertex, ConvVariant::Vertex};
  const int in[] = {32768, 16384, 8192, 4096, 2048};
  const int out[] = {16384, 8192, 4096, 2048, 1024};
  const int feat[] = {32, 32, 64, 64, 64};
  const int dil[] = {1, 1, 2, 2, 1};
  for (size_t l = 0; l < 5; ++l) {
    CHECK(s.layers[l].variant == variants[l]);
    CHECK(s.layers[l].input_size == in[l]);
    CHECK(s.layers[l].output_size == out[l]);
    CHECK(s.layers[l].features == feat[l]);
    CHECK(s.layers[l].dilation == dil[l]);
    CHECK(s.layers[l].neighbors == 16);
  }
  CHECK(s.input_points == 32768);
  CHECK(s.final_points() == 1024);
  CHECK(s.top_edgeconv.features == 128);
  CHECK(s.top_edgeconv.neighbors == 16);
  CHECK(s.concat_width() == 32 + 32 + 64 + 64 + 64 + 128);
  CHECK(s.fusion.width == 512);
  CHECK(s.head_hidden == std::vector<int>{512, 256});
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("scaled spec keeps the halving chain") {
  const NetworkSpec s = NetworkSpec::standard(4).scaled_to(8192);
  CHECK(s.layers.front().input_size == 8192);
  CHECK(s.final_points() == 256);
  CHECK_THROWS_AS(NetworkSpec::standard(4).scaled_to(1000), Error);
}

TEST_CASE("broken specs are rejected") {
  const std::vector<std::function<void(NetworkSpec&)>> breakers{
      [](NetworkSpec& s) { s.layers[2].output_size = 4000; },
      [](NetworkSpec& s) { s.layers[3].input_size = 2048; },
      [](NetworkSpec& s) { s.layers[4].neighbors = 1100; },
      [](NetworkSpec& s) { s.num_classes = 1; },
      [](NetworkSpec& s) { s.layers.clear(); },
      [](NetworkSpec& s) { s.top_edgeconv.neighbors = 1024; },
      [](NetworkSpec& s) { s.head_hidden = {512}; },
  };
  for (size_t i = 0; i < breakers.size(); ++i) {
    NetworkSpec s = NetworkSpec::standard(4);
    breakers[i](s);
    INFO("breaker " << i);
    CHECK_THROWS_AS(s.validate(), Error);
    Rng rng(1);
    CHECK_THROWS_AS(build_network(s, rng), Error);
  }
}

TEST_CASE("omissions") {
  const NetworkSpec s = NetworkSpec::standard(4);
  const auto d = apply_omission(s, Omission::Dilation);
  for (size_t l = 0; l < 5; ++l) CHECK(d.dilation(l) == 1);
  CHECK_FALSE(apply_omission(s, Omission::Normals).use_normals);
  const auto v = apply_omission(s, Omission::VertexConv);
  CHECK(v.layers[0].variant == ConvVariant::LocalEdge);
  for (size_t l = 1; l < 5; ++l) CHECK(v.layers[l].variant == ConvVariant::EdgeVertex);
  CHECK_FALSE(apply_omission(s, Omission::FusionConv).fusion.enabled);
  CHECK(apply_omission(s, Omission::FusionConv).head_input_width() == s.concat_width());
  CHECK_FALSE(apply_omission(s, Omission::TopEdgeConv).top_edgeconv.enabled);
  CHECK(apply_omission(s, Omission::TopEdgeConv).concat_width() == 256);
  CHECK(apply_omission(s, Omission::None) == s);
  for (Omission o : kAllOmissions) CHECK(parse_omission(to_string(o)) == o);
  CHECK_THROWS_AS(parse_omission("Attention"), Error);
}

TEST_CASE("spec JSON round trip and strictness") {
  NetworkSpec s = NetworkSpec::standard(3);
  s.fusion.width = 64;
  CHECK(network_spec_from_json(nlohmann::json::parse(to_json(s).dump())) == s);
  auto j = nlohmann::json::parse(to_json(s).dump());
  j["bogus"] = 1;
  CHECK_THROWS_AS(network_spec_from_json(j), Error);
}

TEST_CASE("same seed gives bit-identical parameters") {
  const NetworkSpec s = tiny_spec();
  Rng a(42), b(42), c(43);
  Model ma = build_network(s, a), mb = build_network(s, b), mc = build_network(s, c);
  CHECK(same_parameters(ma, mb));
  CHECK_FALSE(same_parameters(ma, mc));
}

TEST_CASE("gather_prefix") {
  Rng rng(2);
  const Mat x = ppc::test::random_mat(10, 3, rng);
  CHECK(gather_prefix(x, 10) == x);
  CHECK(gather_prefix(x, 4) == x.topRows(4));
  CHECK_THROWS_AS(gather_prefix(x, 0), Error);
  CHECK_THROWS_AS(gather_prefix(x, 11), Error);
}

TEST_CASE("forward shapes and level positions share a prefix") {
  const NetworkSpec s = NetworkSpec::standard(4).scaled_to(2048);
  Rng rng(3);
  Model m = build_network(s, rng);
  std::vector<PointCloud> batch{random_cloud(2500, rng), random_cloud(2048, rng)};
  ForwardOptions opts;
  ForwardTrace trace;
  Rng fr(9);
  const Mat logits = forward(m, batch, opts, fr, &trace);
  CHECK(logits.rows() == 2);
  CHECK(logits.cols() == 4);
  REQUIRE(trace.level_positions.size() == 6);
  const int final_pts = s.final_points();
  CHECK(final_pts == 64);
  CHECK(trace.concat.cols() == s.concat_width());
  CHECK(trace.concat.rows() == 2 * final_pts);
  for (size_t b = 0; b < 2; ++b) {
    for (size_t l = 0; l < trace.level_positions.size(); ++l) {
      const Eigen::Index stride = l == 0 ? s.input_points : s.layers[l - 1].output_size;
      CHECK(trace.level_positions[l].rows() == 2 * stride);
      const Mat a = trace.level_positions[l].middleRows(static_cast<Eigen::Index>(b) * stride, final_pts);
      const Mat z = trace.level_positions[0].middleRows(static_cast<Eigen::Index>(b) * s.input_points, final_pts);
      CHECK(a == z);
    }
  }
  for (size_t l = 0; l < 5; ++l) {
    CHECK(trace.layer_outputs[l].rows() == 2 * s.layers[l].output_size);
    CHECK(trace.layer_outputs[l].cols() == s.layers[l].features);
  }
}

TEST_CASE("Eval forward is deterministic for a fixed shuffle seed") {
  const NetworkSpec s = tiny_spec(3);
  Rng rng(4);
  Model m = build_network(s, rng);
  const std::vector<PointCloud> batch{random_cloud(80, rng)};
  ForwardOptions opts;
  Rng a(7), b(7);
  CHECK(forward(m, batch, opts, a) == forward(m, batch, opts, b));
}

TEST_CASE("too few points is a data error") {
  const NetworkSpec s = tiny_spec();
  Rng rng(5);
  Model m = build_network(s, rng);
  const std::vector<PointCloud> batch{random_cloud(40, rng)};
  try {
    forward(m, batch, ForwardOptions{}, rng);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("row-permuted input with canonical ordering gives the same logits") {
  const NetworkSpec s = NetworkSpec::standard(4).scaled_to(1024);
  Rng rng(6);
  Model m = build_network(s, rng);
  const PointCloud pc = random_cloud(1500, rng);
  const PointCloud pp = permuted(pc, rng);
  ForwardOptions opts;
  opts.canonical_order = true;
  Rng a(11), b(11);
  const Mat la = forward(m, std::span<const PointCloud>(&pc, 1), opts, a);
  const Mat lb = forward(m, std::span<const PointCloud>(&pp, 1), opts, b);
  CHECK((la - lb).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("end-to-end gradient on a tiny spec") {
  Rng rng(2028);
  for (int trial = 0; trial < 3; ++trial) {
    bool nonzero = false;
    const auto rep = ppc::test::check_network(rng, tiny_spec(trial == 2 ? 3 : 2), &nonzero);
    INFO("trial " << trial << " worst " << rep.worst << " at " << rep.where << ", kinks " << rep.kinks << "/"
                  << rep.entries);
    CHECK(rep.worst < 1e-3);
    CHECK(rep.kink_fraction() < 0.02);
    CHECK(nonzero);
  }
}

TEST_CASE("every parameter group gets a gradient under each omission") {
  for (Omission o : kAllOmissions) {
    Rng rng(77);
    bool nonzero = false;
    const auto rep = ppc::test::check_network(rng, apply_omission(tiny_spec(), o), &nonzero);
    INFO(to_string(o) << " worst " << rep.worst << " at " << rep.where);
    CHECK(nonzero);
    CHECK(rep.worst < 1e-3);
  }
}
