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
#include <map>
#include <set>
#include <sstream>

#include "ppc/error.hpp"
#include "ppc/tasks.hpp"
#include "test_util.hpp"

using namespace ppc;
using ppc::test::TempDir;

namespace {

constexpr const char* kHeader = "mesh_path,tablet_id,period,seal,left_sign,front_eligible\n";

/// `n` rows; period label i % classes (or a skewed mix), seal positive for
/// the first `seal_pos` rows, front eligible for the first `front` rows.
Manifest make_manifest(size_t n, int classes, size_t seal_pos, size_t front) {
  std::ostringstream csv;
  csv << kHeader;
  for (size_t i = 0; i < n; ++i) {
    csv << "m" << i << ".ply,T" << i << ',' << (i * 7 + i / 3) % static_cast<size_t>(classes) << ','
        << (i < seal_pos ? 1 : 0) << ',' << (i % 3 == 0 ? "yes" : "no") << ',' << (i < front ? 1 : 0) << '\n';
  }
  std::istringstream in(csv.str());
  return Manifest::parse(in, "/data");
}

std::set<std::string> ids(const TaskDataset& d, const std::vector<size_t>& split) {
  std::set<std::string> out;
  for (size_t i : split) out.insert(d.instances[i].tablet_id);
  return out;
}

void check_no_leak(const TaskDataset& d) {
  const auto tr = ids(d, d.train), te = ids(d, d.test);
  for (const auto& t : te) CHECK(tr.count(t) == 0);
}

}  // namespace

TEST_CASE("task and size names") {
  for (TaskKind t : {TaskKind::Period, TaskKind::Seal, TaskKind::LeftSign, TaskKind::Front}) {
    CHECK(parse_task(to_string(t)) == t);
  }
  for (SizeVariant v : {SizeVariant::Small337, SizeVariant::Medium631, SizeVariant::Full747, SizeVariant::All}) {
    CHECK(parse_size_variant(to_string(v)) == v);
  }
  CHECK(nominal_size(SizeVariant::Full747) == 747);
  CHECK_THROWS_AS(parse_task("sign"), Error);
}

TEST_CASE("manifest parsing") {
  std::istringstream in(std::string(kHeader) +
                        "a.ply,A,2,1,,yes\n"
                        "\"dir,x/b.obj\",B,,0,1,\n"
                        "/abs/c.ply,C,1,,,0\n");
  const Manifest m = Manifest::parse(in);
  REQUIRE(m.rows.size() == 3);
  CHECK(m.rows[0].period == "2");
  CHECK(m.rows[0].seal == true);
  CHECK_FALSE(m.rows[0].left_sign.has_value());
  CHECK(m.rows[0].front_eligible == true);
  CHECK(m.rows[1].mesh_path == "dir,x/b.obj");
  CHECK_FALSE(m.rows[1].period.has_value());
  CHECK(m.rows[2].front_eligible == false);
  CHECK_FALSE(m.has_split());
}

TEST_CASE("manifest errors") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return Manifest::parse(in);
  };
  CHECK_THROWS_AS(parse(""), Error);
  CHECK_THROWS_AS(parse("mesh,tablet\n"), Error);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "a.ply,A,1,1,1,1\nb.ply,A,1,1,1,1\n"), Error);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "a.ply,A,1,maybe,1,1\n"), Error);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "a.ply,A,1,1\n"), Error);
  CHECK_THROWS_AS(parse(std::string(kHeader) + "a.ply,,1,1,1,1\n"), Error);
  try {
    parse(std::string(kHeader) + "a.ply,A,1,1,1,1\na.ply,A,1,1,1,1\n");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Data);
  }
}

TEST_CASE("manifest write and reload keeps the split column") {
  TempDir dir("manifest");
  Manifest m = make_manifest(5, 2, 2, 5);
  m.rows[1].split = "test";
  m.rows[0].split = "train";
  m.write(dir / "m.csv");
  const Manifest back = Manifest::load(dir / "m.csv");
  CHECK(back.has_split());
  REQUIRE(back.rows.size() == 5);
  CHECK(back.rows[1].split == "test");
  CHECK(back.rows[3].seal == false);
  CHECK(back.base_dir == dir.path());
}

TEST_CASE("period dataset sizes and nesting") {
  const Manifest m = make_manifest(830, 4, 0, 0);
  DatasetOptions o;
  o.seed = 5;
  const auto full = build_period_dataset(m, SizeVariant::Full747, o);
  const auto medium = build_period_dataset(m, SizeVariant::Medium631, o);
  const auto small = build_period_dataset(m, SizeVariant::Small337, o);
  CHECK(full.num_classes == 4);
  CHECK(full.train.size() == 747);
  CHECK(full.test.size() == 83);
  CHECK(medium.train.size() == 631);
  for (int c : small.class_counts) CHECK(c <= 100);
  CHECK(ids(small, small.test) == ids(full, full.test));
  CHECK(ids(medium, medium.test) == ids(full, full.test));
  const auto fs = ids(full, full.train), ms = ids(medium, medium.train), ss = ids(small, small.train);
  CHECK(std::includes(fs.begin(), fs.end(), ms.begin(), ms.end()));
  CHECK(std::includes(ms.begin(), ms.end(), ss.begin(), ss.end()));
  check_no_leak(full);
  int sum = 0;
  for (int c : full.class_counts) sum += c;
  CHECK(sum == 747);
  CHECK(full.instances[0].mesh_path == "/data/m0.ply");

  const auto again = build_period_dataset(m, SizeVariant::Full747, o);
  CHECK(again.train == full.train);
  CHECK(build_period_dataset(m, SizeVariant::All, o).train.size() == 747);
}

TEST_CASE("period dataset errors") {
  CHECK_THROWS_AS(build_period_dataset(make_manifest(100, 4, 0, 0), SizeVariant::Full747), Error);
  std::istringstream in(std::string(kHeader) + "a.ply,A,,1,1,1\nb.ply,B,,0,1,1\n");
  CHECK_THROWS_AS(build_period_dataset(Manifest::parse(in), SizeVariant::All), Error);
}

TEST_CASE("explicit split column overrides the seeded split") {
  Manifest m = make_manifest(20, 2, 10, 20);
  for (size_t i = 0; i < 20; ++i) m.rows[i].split = i < 4 ? "test" : "train";
  const auto d = build_period_dataset(m, SizeVariant::All);
  CHECK(d.test.size() == 4);
  CHECK(ids(d, d.test) == std::set<std::string>{"T0", "T1", "T2", "T3"});
}

TEST_CASE("binary datasets") {
  const Manifest m = make_manifest(40, 4, 10, 0);
  DatasetOptions o;
  o.test_fraction = 0.0;
  const auto seal = build_binary_dataset(m, TaskKind::Seal, o);
  REQUIRE(seal.class_counts.size() == 2);
  CHECK(seal.class_counts[1] == 10);
  CHECK(seal.class_counts[0] == 30);
  const auto left = build_binary_dataset(m, TaskKind::LeftSign, o);
  CHECK(ids(left, left.train) == ids(seal, seal.train));
  CHECK(left.class_counts[1] == 14);
  CHECK_THROWS_AS(build_binary_dataset(make_manifest(10, 4, 10, 0), TaskKind::Seal, o), Error);
  try {
    build_binary_dataset(make_manifest(10, 4, 0, 0), TaskKind::Seal, o);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("degenerate task") != std::string::npos);
  }
  CHECK_THROWS_AS(build_binary_dataset(m, TaskKind::Period, o), Error);
  check_no_leak(build_binary_dataset(m, TaskKind::Seal));
}

TEST_CASE("front dataset: 354 eligible tablets split 319/35") {
  const Manifest m = make_manifest(400, 4, 0, 354);
  Rng rng(3);
  const auto d = build_front_dataset(m, rng);
  CHECK(ids(d, d.train).size() == 319);
  CHECK(ids(d, d.test).size() == 35);
  CHECK(d.train.size() == 638);
  CHECK(d.test.size() == 70);
  CHECK(d.class_counts[0] == d.class_counts[1]);
  check_no_leak(d);
  std::map<std::string, std::pair<int, int>> views;
  for (const auto& inst : d.instances) {
    auto& v = views[inst.tablet_id];
    (inst.label == 1 ? v.first : v.second)++;
    CHECK(inst.flipped == (inst.label == 0));
  }
  for (const auto& [id, v] : views) {
    CHECK(v.first == 1);
    CHECK(v.second == 1);
  }
  Rng none(1);
  CHECK_THROWS_AS(build_front_dataset(make_manifest(10, 4, 0, 0), none), Error);
}

TEST_CASE("dataset validation catches leaks and bad counts") {
  TaskDataset d;
  d.num_classes = 2;
  d.instances.resize(2);
  d.instances[0].tablet_id = "A";
  d.instances[1].tablet_id = "A";
  d.instances[1].label = 1;
  d.train = {0};
  d.test = {1};
  d.recount();
  CHECK_THROWS_AS(d.validate(), Error);
  d.instances[1].tablet_id = "B";
  CHECK_NOTHROW(d.validate());
  d.class_counts = {2, 0};
  CHECK_THROWS_AS(d.validate(), Error);
}

TEST_CASE("synthetic period set is balanced and reproducible") {
  SynthOptions opts;
  opts.grid = 12;
  Rng a(9), b(9);
  const auto da = synth_generate(TaskKind::Period, 25, a, opts);
  const auto db = synth_generate(TaskKind::Period, 25, b, opts);
  CHECK(da.instances.size() == 100);
  std::vector<int> per(4, 0);
  for (const auto& inst : da.instances) per[static_cast<size_t>(inst.label)]++;
  CHECK(per == std::vector<int>{25, 25, 25, 25});
  for (size_t i = 0; i < da.instances.size(); ++i) {
    CHECK(da.instances[i].tablet_id == db.instances[i].tablet_id);
    CHECK(da.instances[i].mesh->vertices == db.instances[i].mesh->vertices);
    CHECK(da.instances[i].mesh->faces == db.instances[i].mesh->faces);
  }
  check_no_leak(da);
  Rng c(10);
  CHECK(synth_generate(TaskKind::Period, 25, c, opts).instances[0].mesh->vertices != da.instances[0].mesh->vertices);
  Rng bad(1);
  CHECK_THROWS_AS(synth_generate(TaskKind::Seal, 0, bad, opts), Error);
}

TEST_CASE("synthetic front: the front face is flatter than the back") {
  SynthOptions opts;
  opts.grid = 24;
  Rng rng(21);
  const auto d = synth_generate(TaskKind::Front, 6, rng, opts);
  SourceOptions so;
  so.n_points = 6000;
  CloudSource src(so);
  for (const auto& inst : d.instances) {
    const PointCloud pc = src.get(inst);
    // Height spread of the +z and -z facing surfaces.
    auto spread = [&](double sign) {
      double s = 0.0, s2 = 0.0;
      size_t n = 0;
      for (size_t i = 0; i < pc.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        if (sign * pc.normals(r, 2) < 0.9) continue;
        const double z = pc.positions(r, 2);
        s += z;
        s2 += z * z;
        ++n;
      }
      REQUIRE(n > 50);
      const double mean = s / static_cast<double>(n);
      return s2 / static_cast<double>(n) - mean * mean;
    };
    const double up = spread(1.0), down = spread(-1.0);
    INFO(inst.tablet_id << (inst.flipped ? " flipped" : "") << " up " << up << " down " << down);
    if (inst.label == 1) CHECK(up < down);
    else CHECK(down < up);
  }
}

TEST_CASE("cloud source: fixed per-tablet sample, flip siblings, disk cache") {
  TempDir dir("cache");
  SynthOptions opts;
  opts.grid = 10;
  Rng rng(4);
  const auto d = synth_generate(TaskKind::Front, 2, rng, opts);
  SourceOptions so;
  so.n_points = 500;
  so.seed = 8;
  so.cache_dir = dir.path();
  CloudSource src(so);
  const Instance& front = d.instances[0];
  const Instance& back = d.instances[1];
  REQUIRE(front.tablet_id == back.tablet_id);
  REQUIRE(back.flipped);
  const PointCloud a = src.get(front);
  const PointCloud b = src.get(back);
  const PointCloud flipped = rotate_x_180(a);
  CHECK(b.positions == flipped.positions);
  CHECK(b.normals == flipped.normals);
  CHECK(rotate_x_180(b).positions == a.positions);
  CHECK(std::filesystem::exists(src.cache_path(front.tablet_id)));

  // A fresh source reads the cached file and returns the same cloud.
  CloudSource again(so);
  Instance no_mesh = front;
  no_mesh.mesh.reset();
  const PointCloud c = again.get(no_mesh);
  CHECK(c.positions == a.positions);
  CHECK(c.normals == a.normals);

  // Cache keys include seed and count.
  SourceOptions other = so;
  other.seed = 9;
  CHECK(CloudSource(other).cache_path("x") != src.cache_path("x"));
  other = so;
  other.n_points = 501;
  CHECK(CloudSource(other).cache_path("x") != src.cache_path("x"));

  // Values are representable as float32.
  for (Eigen::Index i = 0; i < a.positions.size(); ++i) {
    const double v = a.positions.data()[i];
    CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }

  Instance missing;
  missing.tablet_id = "nothing";
  CHECK_THROWS_AS(src.get(missing), Error);
}

TEST_CASE("synthetic corpus round trips through a manifest") {
  TempDir dir("corpus");
  SynthOptions opts;
  opts.grid = 8;
  Rng rng(12);
  const auto d = synth_generate(TaskKind::Seal, 3, rng, opts);
  write_synth_corpus(d, dir.path());
  const Manifest m = Manifest::load(dir / "manifest.csv");
  CHECK(m.has_split());
  CHECK(m.rows.size() == 6);
  const auto built = build_binary_dataset(m, TaskKind::Seal);
  CHECK(ids(built, built.test) == ids(d, d.test));
  CHECK(std::filesystem::exists(built.instances[0].mesh_path));
  const Mesh back = load_mesh(built.instances[0].mesh_path);
  CHECK(back.faces.size() == d.instances[0].mesh->faces.size());
}
