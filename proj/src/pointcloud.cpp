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

#include "ppc/pointcloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ppc/error.hpp"

namespace ppc {

void PointCloud::validate() const {
  if (positions.rows() == 0) throw_data("point cloud is empty");
  if (positions.cols() != 3 || normals.cols() != 3) throw_data("point cloud must have 3 columns");
  if (positions.rows() != normals.rows()) throw_data("positions/normals row count mismatch");
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    if (!(std::abs(normals.row(i).norm() - 1.0) <= 1e-4)) {  // also catches NaN
      throw_data("normal " + std::to_string(i) + " is not unit length");
    }
  }
  if (!positions.allFinite()) throw_data("point cloud has non-finite positions");
}

PointCloud sample_surface(const Mesh& mesh, size_t n, Rng& rng) {
  if (n == 0) throw_usage("sample_surface: n must be >= 1");
  std::vector<double> cdf(mesh.faces.size());
  double total = 0.0;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    total += mesh.face_area(f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw_data("mesh '" + mesh.name + "' has zero total area");

  PointCloud pc;
  pc.positions.resize(static_cast<Eigen::Index>(n), 3);
  pc.normals.resize(static_cast<Eigen::Index>(n), 3);
  for (size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * total;
    size_t f = static_cast<size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    f = std::min(f, cdf.size() - 1);
    const auto& t = mesh.faces[f];
    const double s = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3 p = (1.0 - s) * mesh.vertices[t[0]] + s * (1.0 - r2) * mesh.vertices[t[1]] +
                   s * r2 * mesh.vertices[t[2]];
    const auto row = static_cast<Eigen::Index>(i);
    pc.positions.row(row) = p.transpose();
    pc.normals.row(row) = mesh.face_normal(f).transpose();
  }
  return pc;
}

PointCloud normalize(const PointCloud& pc, const NormalizeOptions& opts) {
  PointCloud out = pc;
  if (opts.center) {
    const RowVec centroid = pc.positions.colwise().mean();
    out.positions.rowwise() -= centroid;
  }
  if (opts.scale) {
    const double radius = out.positions.rowwise().norm().maxCoeff();
    if (radius > 0.0) out.positions /= radius;
  }
  return out;
}

PointCloud jitter(const PointCloud& pc, double fraction, Rng& rng) {
  if (fraction < 0.0) throw_usage("jitter fraction must be >= 0");
  PointCloud out = pc;
  if (fraction == 0.0) return out;
  const auto n = pc.positions.rows();
  const RowVec mean = pc.positions.colwise().mean();
  double sigma[3];
  for (int c = 0; c < 3; ++c) {
    const double var = (pc.positions.col(c).array() - mean(c)).square().sum() / static_cast<double>(n);
    sigma[c] = fraction * var;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double z = rng.normal();
      if (sigma[c] > 0.0) out.positions(i, c) += sigma[c] * z;
    }
  }
  return out;
}

PointCloud rotate_x_180(const PointCloud& pc) {
  PointCloud out = pc;
  out.positions.col(1) = -pc.positions.col(1);
  out.positions.col(2) = -pc.positions.col(2);
  out.normals.col(1) = -pc.normals.col(1);
  out.normals.col(2) = -pc.normals.col(2);
  return out;
}

namespace {
PointCloud take_rows(const PointCloud& pc, const std::vector<uint32_t>& rows) {
  PointCloud out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.positions.resize(m, 3);
  out.normals.resize(m, 3);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.positions.row(i) = pc.positions.row(rows[static_cast<size_t>(i)]);
    out.normals.row(i) = pc.normals.row(rows[static_cast<size_t>(i)]);
  }
  return out;
}
}  // namespace

PointCloud shuffle_truncate(const PointCloud& pc, Rng& rng) {
  return take_rows(pc, rng.permutation(pc.size()));
}

PointCloud prefix(const PointCloud& pc, size_t m) {
  if (m == 0 || m > pc.size()) {
    throw_usage("prefix length " + std::to_string(m) + " invalid for " + std::to_string(pc.size()) + " points");
  }
  PointCloud out;
  out.positions = pc.positions.topRows(static_cast<Eigen::Index>(m));
  out.normals = pc.normals.topRows(static_cast<Eigen::Index>(m));
  return out;
}

PointCloud canonical_order(const PointCloud& pc) {
  std::vector<uint32_t> rows(pc.size());
  std::iota(rows.begin(), rows.end(), 0u);
  std::sort(rows.begin(), rows.end(), [&](uint32_t a, uint32_t b) {
    for (int c = 0; c < 3; ++c) {
      if (pc.positions(a, c) != pc.positions(b, c)) return pc.positions(a, c) < pc.positions(b, c);
    }
    for (int c = 0; c < 3; ++c) {
      if (pc.normals(a, c) != pc.normals(b, c)) return pc.normals(a, c) < pc.normals(b, c);
    }
    return a < b;
  });
  return take_rows(pc, rows);
}

PointCloud round_to_float(const PointCloud& pc) {
  PointCloud out;
  out.positions = pc.positions.cast<float>().cast<double>();
  out.normals = pc.normals.cast<float>().cast<double>();
  return out;
}

static_assert(std::endian::native == std::endian::little, "cloud I/O assumes a little-endian host");

void write_cloud(const PointCloud& pc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write '" + path.string() + "'");
  const uint32_t n = static_cast<uint32_t>(pc.size());
  const uint32_t channels = 6;
  out.write("PPC1", 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&channels), 4);
  std::vector<float> row(6);
  for (uint32_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      row[c] = static_cast<float>(pc.positions(i, c));
      row[3 + c] = static_cast<float>(pc.normals(i, c));
    }
    out.write(reinterpret_cast<const char*>(row.data()), 6 * sizeof(float));
  }
  if (!out) throw_data("failed writing '" + path.string() + "'");
}

PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open '" + path.string() + "'");
  char magic[4];
  uint32_t n = 0, channels = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&channels), 4);
  if (!in || std::memcmp(magic, "PPC1", 4) != 0) throw_data("'" + path.string() + "' is not a PPC1 cloud");
  if (channels != 6) throw_data("'" + path.string() + "': expected 6 channels, got " + std::to_string(channels));
  PointCloud pc;
  pc.positions.resize(n, 3);
  pc.normals.resize(n, 3);
  std::vector<float> row(6);
  for (uint32_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), 6 * sizeof(float))) {
      throw_data("'" + path.string() + "' is truncated");
    }
    for (int c = 0; c < 3; ++c) {
      pc.positions(i, c) = row[c];
      pc.normals(i, c) = row[3 + c];
    }
  }
  return pc;
}

nlohmann::json to_json(const CloudProvenance& p) {
  return {{"format", "PPC1"},         {"source", p.source},
          {"seed", p.seed},           {"n_points", p.n_points},
          {"centered", p.centered},   {"scaled", p.scaled},
          {"source_size", p.source_size}, {"source_mtime", p.source_mtime}};
}

CloudProvenance provenance_from_json(const nlohmann::json& j) {
  CloudProvenance p;
  p.source = j.at("source").get<std::string>();
  p.seed = j.at("seed").get<uint64_t>();
  p.n_points = j.at("n_points").get<size_t>();
  p.centered = j.at("centered").get<bool>();
  p.scaled = j.at("scaled").get<bool>();
  p.source_size = j.value("source_size", uintmax_t{0});
  p.source_mtime = j.value("source_mtime", int64_t{0});
  return p;
}

}  // namespace ppc
