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

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ppc {

using Vec3 = Eigen::Vector3d;

/// Triangle mesh in model units.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<uint32_t, 3>> faces;
  std::string name;

  /// Faces removed by ingestion cleanup (zero area or repeated index).
  size_t dropped_faces = 0;

  double face_area(size_t f) const;
  Vec3 face_normal(size_t f) const;  // unit, follows winding
  double total_area() const;
};

/// Drops degenerate faces and checks index bounds. Throws a data error when
/// an index is out of range or nothing survives.
void clean_mesh(Mesh& mesh);

/// Reads an ASCII/binary PLY or OBJ triangle mesh (polygons are fan
/// triangulated) and cleans it.
Mesh load_mesh(const std::filesystem::path& path);

/// Writes binary little-endian PLY.
void save_ply(const Mesh& mesh, const std::filesystem::path& path);

}  // namespace ppc
