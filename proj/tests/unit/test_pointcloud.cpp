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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <limits>
#include <tuple>

#include "ppc/error.hpp"
#include "ppc/pointcloud.hpp"
#include "test_util.hpp"

using namespace ppc;
using ppc::test::random_cloud;
using ppc::test::TempDir;

namespace {

Mesh unit_square() {
  Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

Mesh unit_cube() {
  Mesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const uint32_t q[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& f : q) {
    m.faces.push_back({f[0], f[1], f[2]});
    m.faces.push_back({f[0], f[2], f[3]});
  }
  return m;
}

PointCloud from_positions(std::initializer_list<std::array<double, 3>> pts) {
  PointCloud pc;
  pc.positions.resize(static_cast<Eigen::Index>(pts.size()), 3);
  pc.normals = Mat::Zero(static_cast<Eigen::Index>(pts.size()), 3);
  Eigen::Index i = 0;
  for (const auto& p : pts) {
    pc.positions.row(i) << p[0], p[1], p[2];
    pc.normals(i, 2) = 1.0;
    ++i;
  }
  return pc;
}

}  // namespace

TEST_CASE("sample_surface: unit square splits evenly between its triangles") {
  Rng rng(11);
  const PointCloud pc = sample_surface(unit_square(), 10000, rng);
  REQUIRE(pc.size() == 10000);
  size_t below = 0;  // triangle (0,1,2) holds points with x >= y
  for (Eigen::Index i = 0; i < pc.positions.rows(); ++i) below += pc.positions(i, 0) >= pc.positions(i, 1);
  CHECK(std::abs(static_cast<double>(below) / 10000.0 - 0.5) < 0.02);
  pc.validate();
}

TEST_CASE("sample_surface: single triangle normals equal the face normal") {
  Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(0, 2, 0), Vec3(0, 0, 3)};
  m.faces = {{0, 1, 2}};
  Rng rng(3);
  const PointCloud pc = sample_surface(m, 500, rng);
  for (Eigen::Index i = 0; i < pc.normals.rows(); ++i) {
    CHECK(pc.normals(i, 0) == 1.0);
    CHECK(pc.normals(i, 1) == 0.0);
    CHECK(pc.normals(i, 2) == 0.0);
    CHECK(pc.positions(i, 0) == 0.0);
  }
}

TEST_CASE("sample_surface: cube faces get one sixth each") {
  Rng rng(5);
  const PointCloud pc = sample_surface(unit_cube(), 60000, rng);
  std::map<std::tuple<int, int, int>, int> per_face;
  for (Eigen::Index i = 0; i < pc.normals.rows(); ++i) {
    ++per_face[{static_cast<int>(std::lround(pc.normals(i, 0))), static_cast<int>(std::lround(pc.normals(i, 1))),
                static_cast<int>(std::lround(pc.normals(i, 2)))}];
  }
  CHECK(per_face.size() == 6);
  for (const auto& [k, v] : per_face) CHECK(std::abs(v / 60000.0 - 1.0 / 6.0) < 0.01);
  // Outward winding: the normal points away from the cube center.
  for (Eigen::Index i = 0; i < pc.normals.rows(); i += 97) {
    CHECK((pc.positions.row(i).array() - 0.5).matrix().dot(pc.normals.row(i)) > 0.0);
  }
}

TEST_CASE("sample_surface: zero area and n = 0 are rejected") {
  Rng rng(1);
  Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};
  m.faces = {{0, 1, 2}};
  CHECK_THROWS_AS(sample_surface(m, 10, rng), Error);
  CHECK_THROWS_AS(sample_surface(unit_square(), 0, rng), Error);
}

TEST_CASE("normalize: examples") {
  const PointCloud a = normalize(from_positions({{0, 0, 0}, {2, 0, 0}}));
  CHECK(a.positions(0, 0) == -1.0);
  CHECK(a.positions(1, 0) == 1.0);
  const PointCloud b = normalize(from_positions({{1, 1, 1}}));
  CHECK(b.positions.isZero(0.0));
  CHECK(b.normals == from_positions({{1, 1, 1}}).normals);
}

TEST_CASE("normalize: idempotent and translation invariant") {
  Rng rng(8);
  const PointCloud pc = random_cloud(500, rng);
  const PointCloud n1 = normalize(pc);
  CHECK(n1.positions.rowwise().norm().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  const PointCloud n2 = normalize(n1);
  CHECK((n2.positions - n1.positions).cwiseAbs().maxCoeff() < 1e-12);
  PointCloud shifted = pc;
  shifted.positions.rowwise() += RowVec::Constant(3, 17.25);
  CHECK((normalize(shifted).positions - n1.positions).cwiseAbs().maxCoeff() < 1e-6);
  NormalizeOptions center_only;
  center_only.scale = false;
  const PointCloud c = normalize(pc, center_only);
  CHECK(c.positions.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c.positions.rowwise().norm().maxCoeff() != doctest::Approx(1.0));
}

TEST_CASE("jitter: zero fraction and zero variance are identities") {
  Rng rng(1);
  const PointCloud pc = random_cloud(100, rng);
  CHECK(jitter(pc, 0.0, rng) == pc);
  const PointCloud single = from_positions({{0.3, 0.2, 0.1}});
  CHECK(jitter(single, 0.03, rng) == single);
}

TEST_CASE("jitter: noise std is fraction times channel variance") {
  const Eigen::Index n = 32768;
  PointCloud pc;
  pc.positions = Mat::Zero(n, 3);
  pc.normals = Mat::Zero(n, 3);
  pc.normals.col(2).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) {
    pc.positions(i, 0) = (i % 2 == 0) ? 1.0 : -1.0;  // variance exactly 1
    pc.positions(i, 1) = (i % 2 == 0) ? 2.0 : -2.0;  // variance exactly 4
  }
  Rng rng(21);
  const PointCloud j = jitter(pc, 0.03, rng);
  auto stddev = [&](int c) {
    const Eigen::ArrayXd d = (j.positions.col(c) - pc.positions.col(c)).array();
    return std::sqrt((d - d.mean()).square().mean());
  };
  CHECK(std::abs(stddev(0) - 0.03) < 0.003);
  CHECK(std::abs(stddev(1) - 0.12) < 0.012);
  CHECK(stddev(2) == 0.0);
  CHECK(j.normals == pc.normals);
}

TEST_CASE("rotate_x_180: examples and involution") {
  PointCloud pc = from_positions({{1, 2, 3}});
  const PointCloud r = rotate_x_180(pc);
  CHECK(r.positions(0, 0) == 1.0);
  CHECK(r.positions(0, 1) == -2.0);
  CHECK(r.positions(0, 2) == -3.0);
  CHECK(r.normals(0, 2) == -1.0);
  Rng rng(4);
  const PointCloud c = random_cloud(1000, rng);
  CHECK(rotate_x_180(rotate_x_180(c)) == c);
}

TEST_CASE("shuffle_truncate: permutation with pairing preserved") {
  Rng rng(6);
  const PointCloud pc = random_cloud(200, rng);
  Rng a(77), b(77);
  const PointCloud s1 = shuffle_truncate(pc, a);
  const PointCloud s2 = shuffle_truncate(pc, b);
  CHECK(s1 == s2);
  CHECK(canonical_order(s1) == canonical_order(pc));
  CHECK(!(s1 == pc));
}

TEST_CASE("shuffle_truncate: prefix of length 2 from 4 is uniform") {
  PointCloud pc = from_positions({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  Rng rng(12);
  int hits[4] = {0, 0, 0, 0};
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    const PointCloud s = prefix(shuffle_truncate(pc, rng), 2);
    for (int r = 0; r < 2; ++r) ++hits[static_cast<int>(s.positions(r, 0))];
  }
  for (int h : hits) CHECK(std::abs(static_cast<double>(h) / trials - 0.5) < 0.05);
}

TEST_CASE("prefix: bounds") {
  Rng rng(1);
  const PointCloud pc = random_cloud(10, rng);
  CHECK(prefix(pc, 10) == pc);
  CHECK(prefix(pc, 3).size() == 3);
  CHECK_THROWS_AS(prefix(pc, 0), Error);
  CHECK_THROWS_AS(prefix(pc, 11), Error);
}

TEST_CASE("cloud file: round trip at float32 precision and header layout") {
  TempDir dir("cloud");
  Rng rng(2);
  const PointCloud pc = round_to_float(random_cloud(123, rng));
  write_cloud(pc, dir / "c.ppc");
  CHECK(read_cloud(dir / "c.ppc") == pc);
  const std::string bytes = ppc::test::read_file(dir / "c.ppc");
  CHECK(bytes.substr(0, 4) == "PPC1");
  CHECK(bytes.size() == 12 + 123 * 6 * 4);
  uint32_t n = 0, ch = 0;
  std::memcpy(&n, bytes.data() + 4, 4);
  std::memcpy(&ch, bytes.data() + 8, 4);
  CHECK(n == 123);
  CHECK(ch == 6);
  ppc::test::write_file(dir / "bad.ppc", "PPC2xxxxxxxx");
  CHECK_THROWS_AS(read_cloud(dir / "bad.ppc"), Error);
}

TEST_CASE("validate: rejects non-unit or NaN normals, non-finite positions, empty clouds") {
  PointCloud pc = from_positions({{0, 0, 0}});
  pc.validate();
  pc.normals(0, 2) = 0.5;
  CHECK_THROWS_AS(pc.validate(), Error);
  pc.normals(0, 2) = std::nan("");
  CHECK_THROWS_AS(pc.validate(), Error);
  pc.normals(0, 2) = 1.0;
  pc.positions(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(pc.validate(), Error);
  PointCloud empty;
  CHECK_THROWS_AS(empty.validate(), Error);
}

TEST_CASE("provenance: json round trip") {
  CloudProvenance p;
  p.source = "a/b.ply";
  p.seed = 99;
  p.n_points = 4096;
  p.scaled = false;
  p.source_size = 1234;
  p.source_mtime = -5;
  const auto q = provenance_from_json(to_json(p));
  CHECK(to_json(q) == to_json(p));
}
