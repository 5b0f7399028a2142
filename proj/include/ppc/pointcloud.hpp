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

#include <filesystem>
#include <json.hpp>
#include <string>

#include "ppc/mesh.hpp"
#include "ppc/rng.hpp"
#include "ppc/types.hpp"

namespace ppc {

/// Positions and unit normals for one instance. Both are N x 3.
struct PointCloud {
  Mat positions;
  Mat normals;

  size_t size() const { return static_cast<size_t>(positions.rows()); }

  /// Throws a data error on shape mismatch, N == 0 or a non-unit normal.
  void validate() const;

  bool operator==(const PointCloud& o) const {
    return positions == o.positions && normals == o.normals;
  }
};

/// Area-uniform surface sample. Each point carries its source face normal.
PointCloud sample_surface(const Mesh& mesh, size_t n, Rng& rng);

struct NormalizeOptions {
  bool center = true;
  bool scale = true;  // scale so the farthest point lies on the unit sphere
};

PointCloud normalize(const PointCloud& pc, const NormalizeOptions& opts = {});

/// Adds N(0, (fraction * var_c)^2) noise to every position channel c, where
/// var_c is the variance of that channel over the cloud.
PointCloud jitter(const PointCloud& pc, double fraction, Rng& rng);

/// (x, y, z) -> (x, -y, -z) for positions and normals.
PointCloud rotate_x_180(const PointCloud& pc);

/// Rows in a uniformly random order. A prefix of length m is then a uniform
/// random subset of size m.
PointCloud shuffle_truncate(const PointCloud& pc, Rng& rng);

/// First m rows. Throws a usage error if m > N or m == 0.
PointCloud prefix(const PointCloud& pc, size_t m);

/// Rows reordered lexicographically by (position, normal).
PointCloud canonical_order(const PointCloud& pc);

/// Rounds every coordinate to the nearest float32, the precision of the
/// on-disk format, so cached and freshly sampled clouds are identical.
PointCloud round_to_float(const PointCloud& pc);

// "PPC1" binary: magic, u32 N, u32 channels (=6), then N rows of float32
// x y z nx ny nz, all little endian.
void write_cloud(const PointCloud& pc, const std::filesystem::path& path);
PointCloud read_cloud(const std::filesystem::path& path);

/// Provenance sidecar written next to a binary cloud.
struct CloudProvenance {
  std::string source;
  uint64_t seed = 0;
  size_t n_points = 0;
  bool centered = true;
  bool scaled = true;
  uintmax_t source_size = 0;
  int64_t source_mtime = 0;
};

nlohmann::json to_json(const CloudProvenance& p);
CloudProvenance provenance_from_json(const nlohmann::json& j);

}  // namespace ppc
