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

// Primitive solids with clearly different normal distributions, used as a
// linearly separable classification set for overfit checks.

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

#include "ppc/mesh.hpp"
#include "ppc/network.hpp"
#include "ppc/rng.hpp"
#include "ppc/tasks.hpp"

namespace ppc::test {

/// Closed surface of revolution-style grid: f(u, v) on [0,1]^2 with the
/// u = 0 and u = 1 rows collapsed to poles.
template <class F>
Mesh grid_surface(int nu, int nv, F&& f) {
  Mesh m;
  for (int i = 0; i <= nu; ++i) {
    for (int j = 0; j < nv; ++j) m.vertices.push_back(f(static_cast<double>(i) / nu, static_cast<double>(j) / nv));
  }
  auto id = [&](int i, int j) { return static_cast<uint32_t>(i * nv + (j % nv)); };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  clean_mesh(m);
  return m;
}

inline Mesh box_mesh(double a, double b, double c) {
  Mesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back((i & 1 ? a : -a), (i & 2 ? b : -b), (i & 4 ? c : -c));
  const uint32_t f[12][3] = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  for (const auto& t : f) m.faces.push_back({t[0], t[1], t[2]});
  return m;
}

inline Mesh ellipsoid_mesh(double a, double b, double c) {
  return grid_surface(24, 32, [&](double u, double v) {
    const double th = std::numbers::pi * u, ph = 2.0 * std::numbers::pi * v;
    return Vec3(a * std::sin(th) * std::cos(ph), b * std::sin(th) * std::sin(ph), c * std::cos(th));
  });
}

inline Mesh cylinder_mesh(double r, double h) {
  // Profile: bottom center, bottom rim, top rim, top center.
  return grid_surface(3, 48, [&](double u, double v) {
    const double ph = 2.0 * std::numbers::pi * v;
    const int step = static_cast<int>(std::lround(u * 3));
    const double rr = (step == 0 || step == 3) ? 0.0 : r;
    const double z = step < 2 ? -h : h;
    return Vec3(rr * std::cos(ph), rr * std::sin(ph), z);
  });
}

inline Mesh octahedron_mesh(double a, double b, double c) {
  Mesh m;
  m.vertices = {Vec3(a, 0, 0), Vec3(-a, 0, 0), Vec3(0, b, 0), Vec3(0, -b, 0), Vec3(0, 0, c), Vec3(0, 0, -c)};
  m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  return m;
}

/// Class k in [0, 4): box, ellipsoid, cylinder, octahedron, each with random
/// proportions in [0.8, 1.2].
inline Mesh primitive(int klass, Rng& rng) {
  auto s = [&] { return 0.8 + 0.4 * rng.uniform(); };
  switch (klass) {
    case 0: return box_mesh(s(), s(), s());
    case 1: return ellipsoid_mesh(s(), s(), s());
    case 2: return cylinder_mesh(s(), s());
    default: return octahedron_mesh(s(), s(), s());
  }
}

/// `per_class` shapes for each of `classes` classes, all in the training
/// split (the checks that use it measure fitting, not generalization).
inline TaskDataset separable_dataset(int classes, int per_class, uint64_t seed) {
  TaskDataset d;
  d.task = TaskKind::Period;
  d.num_classes = classes;
  Rng rng(seed);
  for (int k = 0; k < classes; ++k) {
    d.class_names.push_back("shape" + std::to_string(k));
    for (int i = 0; i < per_class; ++i) {
      Instance inst;
      inst.tablet_id = "shape-" + std::to_string(k) + "-" + std::to_string(i);
      inst.label = k;
      inst.mesh = std::make_shared<const Mesh>(primitive(k, rng));
      d.train.push_back(d.instances.size());
      d.instances.push_back(std::move(inst));
    }
  }
  d.recount();
  d.validate();
  return d;
}

/// The small pyramid used for fitting checks: 128 input points, two
/// levels, every block enabled.
inline NetworkSpec overfit_spec(int classes) {
  NetworkSpec s;
  s.input_points = 128;
  s.layers = {{ConvVariant::LocalEdge, 128, 64, 16, 1, 8}, {ConvVariant::EdgeVertex, 64, 32, 16, 2, 8}};
  s.top_edgeconv = {true, 8, 32};
  s.fusion = {true, 64};
  s.head_hidden = {64, 32};
  s.num_classes = classes;
  s.validate();
  return s;
}

}  // namespace ppc::test
