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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "ppc/error.hpp"
#include "ppc/tasks.hpp"

namespace ppc {
namespace {

constexpr double kPi = std::numbers::pi;

/// Per-class style for the period-like task.
struct PeriodStyle {
  double width, thickness;  // half extents relative to the half length 1.0
  int min_wedges, max_wedges;
  double wedge_len;         // relative to the half length
  double angle;             // radians, negative = random per wedge
};

constexpr PeriodStyle kPeriodStyles[] = {
    {0.70, 0.30, 140, 200, 0.09, 0.0},
    {0.90, 0.38, 60, 110, 0.12, kPi / 2},
    {0.60, 0.22, 20, 50, 0.16, kPi / 4},
    {0.80, 0.45, 120, 200, 0.10, -1.0},
};

struct Wedge {
  double u, v;      // center in face-local coordinates
  double angle;
  double length;
  double depth;
};

struct Shape {
  double a = 1.0, b = 0.7, c = 0.3;  // half extents
  double round = 0.18;               // edge rounding radius
  double back_bulge = 0.45;          // fraction of c
  double front_bulge = 0.03;
};

/// Depth of the deepest wedge covering local point (u, v). Each wedge is a
/// V-shaped groove whose width tapers from the head to the tail.
double wedge_depth(const std::vector<Wedge>& wedges, double u, double v) {
  double best = 0.0;
  for (const auto& w : wedges) {
    const double du = u - w.u, dv = v - w.v;
    if (du * du + dv * dv > w.length * w.length) continue;
    const double ca = std::cos(w.angle), sa = std::sin(w.angle);
    const double s = du * ca + dv * sa;   // along the wedge, 0 at head
    const double t = -du * sa + dv * ca;  // across
    if (s < 0.0 || s > w.length) continue;
    const double half = 0.25 * w.length * (1.0 - s / w.length);
    if (half <= 0.0 || std::abs(t) >= half) continue;
    const double d = w.depth * (1.0 - std::abs(t) / half) * (1.0 - 0.5 * s / w.length);
    best = std::max(best, d);
  }
  return best;
}

std::vector<Wedge> place_wedges(Rng& rng, int count, double half_u, double half_v, double length,
                                double angle, double depth_lo, double depth_hi) {
  std::vector<Wedge> out;
  for (int i = 0; i < count; ++i) {
    Wedge w;
    w.u = (2.0 * rng.uniform() - 1.0) * half_u;
    w.v = (2.0 * rng.uniform() - 1.0) * half_v;
    w.angle = angle < 0.0 ? rng.uniform() * 2.0 * kPi : angle + (rng.uniform() - 0.5) * 0.2;
    w.length = length * (0.8 + 0.4 * rng.uniform());
    w.depth = depth_lo + (depth_hi - depth_lo) * rng.uniform();
    out.push_back(w);
  }
  return out;
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo + 1)));
}

Mesh build_rounded_box(const Shape& s, int n) {
  Mesh mesh;
  const double ext[3] = {s.a, s.b, s.c};
  const double inner[3] = {s.a - s.round, s.b - s.round, s.c - s.round};
  for (int axis = 0; axis < 3; ++axis) {
    for (int sign : {-1, 1}) {
      const int i = (axis + 1) % 3, j = (axis + 2) % 3;
      const auto base = static_cast<uint32_t>(mesh.vertices.size());
      for (int r = 0; r <= n; ++r) {
        for (int col = 0; col <= n; ++col) {
          Vec3 p;
          p[axis] = sign * ext[axis];
          p[i] = (2.0 * r / n - 1.0) * ext[i];
          p[j] = (2.0 * col / n - 1.0) * ext[j];
          Vec3 core;
          for (int d = 0; d < 3; ++d) core[d] = std::clamp(p[d], -inner[d], inner[d]);
          const Vec3 dir = p - core;
          const Vec3 q = dir.norm() > 0.0 ? Vec3(core + s.round * dir.normalized()) : p;
          mesh.vertices.push_back(q);
        }
      }
      for (int r = 0; r < n; ++r) {
        for (int col = 0; col < n; ++col) {
          const uint32_t v00 = base + static_cast<uint32_t>(r * (n + 1) + col);
          const uint32_t v01 = v00 + 1, v10 = v00 + static_cast<uint32_t>(n + 1), v11 = v10 + 1;
          mesh.faces.push_back({v00, v10, v11});
          mesh.faces.push_back({v00, v11, v01});
        }
      }
    }
  }
  return mesh;
}

/// Bulges both faces (the back much more), stamps features, then orients
/// every face outward; the shape stays star-shaped about the origin.
void shape_surface(Mesh& mesh, const Shape& s, const std::vector<Wedge>& front,
                   const std::vector<Wedge>& back, const std::vector<Wedge>& left, double seal_radius,
                   double seal_u, double seal_v) {
  for (auto& q : mesh.vertices) {
    const double fx = std::max(0.0, 1.0 - (q.x() / s.a) * (q.x() / s.a));
    const double fy = std::max(0.0, 1.0 - (q.y() / s.b) * (q.y() / s.b));
    const double zfrac = std::abs(q.z()) / s.c;
    if (q.z() > 0.0) {
      q.z() += s.front_bulge * s.c * fx * fy * zfrac;
      q.z() -= wedge_depth(front, q.x(), q.y()) * zfrac;
      if (seal_radius > 0.0) {
        const double r = std::hypot(q.x() - seal_u, q.y() - seal_v);
        const double ring = std::abs(r - seal_radius);
        const double width = 0.05 * s.a;
        if (ring < width) q.z() += 0.04 * s.c * 2.0 * std::cos(0.5 * kPi * ring / width) * zfrac;
      }
    } else {
      q.z() -= s.back_bulge * s.c * fx * fy * zfrac;
      q.z() += wedge_depth(back, q.x(), q.y()) * zfrac;
    }
    if (!left.empty() && q.x() < 0.0) {
      const double xfrac = std::abs(q.x()) / s.a;
      if (xfrac > 0.9) q.x() += wedge_depth(left, q.y(), q.z()) * xfrac;
    }
  }
  for (auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
    const Vec3 center = (a + mesh.vertices[f[1]] + mesh.vertices[f[2]]) / 3.0;
    if (n.dot(center) < 0.0) std::swap(f[1], f[2]);
  }
}

}  // namespace

Mesh synth_tablet(TaskKind task, int klass, Rng& rng, const SynthOptions& opts) {
  Shape shape;
  const double thickness_scale = 2.0;  // wedge depth is relative to 2c
  int count = uniform_int(rng, opts.min_wedges, opts.max_wedges);
  double wedge_len = 0.11;
  double angle = -1.0;
  if (task == TaskKind::Period) {
    if (klass < 0 || klass > 3) throw_usage("period synth: class must be in [0, 4)");
    const auto& st = kPeriodStyles[klass];
    shape.b = st.width * (0.94 + 0.12 * rng.uniform());
    shape.c = st.thickness * (0.94 + 0.12 * rng.uniform());
    count = uniform_int(rng, std::max(opts.min_wedges, st.min_wedges), std::min(opts.max_wedges, st.max_wedges));
    wedge_len = st.wedge_len;
    angle = st.angle;
  } else {
    if (klass < 0 || klass > 1) throw_usage("binary synth: class must be 0 or 1");
    shape.b = 0.6 + 0.3 * rng.uniform();
    shape.c = 0.25 + 0.15 * rng.uniform();
  }
  shape.round = 0.6 * shape.c;
  const double depth_lo = opts.min_depth * thickness_scale * shape.c;
  const double depth_hi = opts.max_depth * thickness_scale * shape.c;
  const double half_u = shape.a - shape.round, half_v = shape.b - shape.round;

  const auto front = place_wedges(rng, count, half_u, half_v, wedge_len, angle, depth_lo, depth_hi);
  const auto back = place_wedges(rng, count / 2, half_u, half_v, wedge_len, angle, depth_lo, depth_hi);
  std::vector<Wedge> left;
  if (task == TaskKind::LeftSign && klass == 1) {
    left = place_wedges(rng, std::max(8, count / 6), shape.b - shape.round, shape.c * 0.5, wedge_len, -1.0,
                        depth_lo * 2.0, depth_hi * 2.0);
  }
  double seal_r = 0.0, seal_u = 0.0, seal_v = 0.0;
  if (task == TaskKind::Seal && klass == 1) {
    seal_r = (0.2 + 0.1 * rng.uniform()) * shape.a;
    seal_u = (rng.uniform() - 0.5) * 0.5 * half_u;
    seal_v = (rng.uniform() - 0.5) * 0.5 * half_v;
  }

  Mesh mesh = build_rounded_box(shape, opts.grid);
  shape_surface(mesh, shape, front, back, left, seal_r, seal_u, seal_v);
  clean_mesh(mesh);
  return mesh;
}

TaskDataset synth_generate(TaskKind task, int n_per_class, Rng& rng, const SynthOptions& opts) {
  if (n_per_class < 1) throw_usage("synth_generate: n_per_class must be >= 1");
  const uint64_t base = rng.next_u64();
  TaskDataset ds;
  ds.task = task;
  switch (task) {
    case TaskKind::Period: ds.class_names = {"0", "1", "2", "3"}; break;
    case TaskKind::Seal:
    case TaskKind::LeftSign: ds.class_names = {"absent", "present"}; break;
    case TaskKind::Front: ds.class_names = {"back", "front"}; break;
  }
  ds.num_classes = static_cast<int>(ds.class_names.size());
  const int style_classes = task == TaskKind::Front ? 1 : ds.num_classes;
  const auto n_test = static_cast<int>(std::lround(opts.test_fraction * n_per_class));
  for (int klass = 0; klass < style_classes; ++klass) {
    for (int i = 0; i < n_per_class; ++i) {
      Rng trng = Rng(base).derive({static_cast<uint64_t>(klass), static_cast<uint64_t>(i)});
      auto mesh = std::make_shared<const Mesh>(synth_tablet(task, klass, trng, opts));
      const std::string id = "synth-" + std::string(to_string(task)) + "-" + std::to_string(klass) + "-" + std::to_string(i);
      const bool is_test = i < n_test;
      for (bool flipped : task == TaskKind::Front ? std::vector<bool>{false, true} : std::vector<bool>{false}) {
        Instance inst;
        inst.tablet_id = id;
        inst.mesh = mesh;
        inst.flipped = flipped;
        inst.label = task == TaskKind::Front ? (flipped ? 0 : 1) : klass;
        ds.instances.push_back(inst);
        (is_test ? ds.test : ds.train).push_back(ds.instances.size() - 1);
      }
    }
  }
  ds.recount();
  ds.validate();
  return ds;
}

void write_synth_corpus(const TaskDataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "meshes");
  Manifest m;
  std::vector<bool> in_test(data.instances.size(), false);
  for (size_t i : data.test) in_test[i] = true;
  std::set<std::string> written;
  for (size_t i = 0; i < data.instances.size(); ++i) {
    const auto& inst = data.instances[i];
    if (!written.insert(inst.tablet_id).second) continue;
    if (!inst.mesh) throw_usage("write_synth_corpus: instance without an in-memory mesh");
    const std::string rel = "meshes/" + inst.tablet_id + ".ply";
    save_ply(*inst.mesh, dir / rel);
    ManifestRow r;
    r.mesh_path = rel;
    r.tablet_id = inst.tablet_id;
    switch (data.task) {
      case TaskKind::Period: r.period = std::to_string(inst.label); break;
      case TaskKind::Seal: r.seal = inst.label == 1; break;
      case TaskKind::LeftSign: r.left_sign = inst.label == 1; break;
      case TaskKind::Front: r.front_eligible = true; break;
    }
    r.split = in_test[i] ? "test" : "train";
    m.rows.push_back(r);
  }
  m.write(dir / "manifest.csv");
}

}  // namespace ppc
