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

#include "ppc/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "ppc/error.hpp"
#include "ppc/parallel.hpp"

namespace ppc {
namespace {

using Candidate = std::pair<double, int32_t>;  // (squared distance, index)

void check_counts(Eigen::Index n, int k, int dilation, const char* what) {
  if (k < 1) throw_usage(std::string(what) + ": k must be >= 1");
  if (dilation < 1) throw_usage(std::string(what) + ": dilation must be >= 1");
  if (n <= static_cast<Eigen::Index>(k) * dilation) {
    throw_usage(std::string(what) + ": need more than k*dilation = " + std::to_string(k * dilation) +
                " points, got " + std::to_string(n));
  }
}

/// Picks ranks d, 2d, ..., kd from an ascending candidate list.
void select_dilated(const std::vector<Candidate>& sorted, int k, int dilation, int32_t* row) {
  for (int r = 0; r < k; ++r) row[r] = sorted[static_cast<size_t>((r + 1) * dilation - 1)].second;
}

class Grid {
 public:
  /// Cells start at about two points each, as for a filled volume. Scanned
  /// surfaces fill far fewer cells than that assumes, so the size is then
  /// corrected once from the measured occupancy, aiming at want / 2 points
  /// per occupied cell. Any cell size gives exact results; this only
  /// changes how many candidates a query examines.
  Grid(const Mat& pts, size_t want) : pts_(pts) {
    const auto n = pts.rows();
    lo_ = pts.colwise().minCoeff();
    const RowVec hi = pts.colwise().maxCoeff();
    const double extent = (hi - lo_).maxCoeff();
    const int r = std::max(1, static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n) / 2.0))));
    cell_ = extent > 0.0 ? extent / r : 1.0;
    build(hi);
    size_t occupied = 0;
    for (size_t c = 0; c + 1 < start_.size(); ++c) occupied += start_[c + 1] > start_[c];
    const double occupancy = static_cast<double>(n) / static_cast<double>(std::max<size_t>(occupied, 1));
    const double target = std::max(2.0, static_cast<double>(want) / 2.0);
    const double factor = std::clamp(std::sqrt(target / occupancy), 0.25, 4.0);
    if (extent > 0.0 && (factor < 0.8 || factor > 1.25)) {
      cell_ *= factor;
      // Bound the cell count by the point count.
      const double cells = ((hi - lo_).array() / cell_ + 1.0).prod();
      if (cells > 4.0 * static_cast<double>(n) + 64.0) cell_ *= std::cbrt(cells / (4.0 * static_cast<double>(n) + 64.0));
      build(hi);
    }
  }

  /// The `want` nearest non-self points of `query`, ascending by
  /// (distance, index). Candidates are gathered shell by shell and trimmed
  /// to the best `want` after each shell.
  void nearest(Eigen::Index query, size_t want, std::vector<Candidate>& best) const {
    best.clear();
    const double* q = pts_.row(query).data();
    const int qc[3] = {coord(q[0], 0), coord(q[1], 1), coord(q[2], 2)};
    const int max_shell = std::max({dims_[0], dims_[1], dims_[2]});
    double kth = std::numeric_limits<double>::infinity();
    for (int s = 0; s <= max_shell; ++s) {
      const int x0 = qc[0] - s, x1 = qc[0] + s;
      const int y0 = qc[1] - s, y1 = qc[1] + s;
      const int z0 = qc[2] - s, z1 = qc[2] + s;
      for (int x = std::max(0, x0); x <= std::min(dims_[0] - 1, x1); ++x) {
        for (int y = std::max(0, y0); y <= std::min(dims_[1] - 1, y1); ++y) {
          const bool xy_edge = x == x0 || x == x1 || y == y0 || y == y1;
          for (int z = std::max(0, z0); z <= std::min(dims_[2] - 1, z1); ++z) {
            if (!xy_edge && z != z0 && z != z1) {
              z = z1 - 1;  // interior of the shell was visited earlier
              continue;
            }
            const size_t c = flat(x, y, z);
            for (size_t t = start_[c]; t < start_[c + 1]; ++t) {
              const int32_t j = items_[t];
              const double d = squared_distance(q, &packed_[3 * t], 3);
              if (d <= kth && j != query) best.emplace_back(d, j);
            }
          }
        }
      }
      if (best.size() > want) {
        std::nth_element(best.begin(), best.begin() + static_cast<std::ptrdiff_t>(want - 1), best.end());
        best.resize(want);
      }
      if (best.size() == want) kth = std::max_element(best.begin(), best.end())->first;
      // Distance from the query to the nearest cell outside the visited cube.
      double bound = std::numeric_limits<double>::infinity();
      const int lo_c[3] = {x0, y0, z0};
      const int hi_c[3] = {x1, y1, z1};
      for (int a = 0; a < 3; ++a) {
        if (lo_c[a] > 0) bound = std::min(bound, q[a] - (lo_(a) + lo_c[a] * cell_));
        if (hi_c[a] < dims_[a] - 1) bound = std::min(bound, (lo_(a) + (hi_c[a] + 1) * cell_) - q[a]);
      }
      if (std::isinf(bound)) break;  // whole grid visited
      if (best.size() == want) {
        bound = std::max(0.0, bound - 1e-9 * cell_);
        if (kth < bound * bound) break;
      }
    }
    std::sort(best.begin(), best.end());
  }

 private:
  void build(const RowVec& hi) {
    const auto n = pts_.rows();
    for (int c = 0; c < 3; ++c) {
      dims_[c] = std::max(1, static_cast<int>(std::floor((hi(c) - lo_(c)) / cell_)) + 1);
    }
    const size_t ncells = static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2];
    start_.assign(ncells + 1, 0);
    std::vector<size_t> cell_of(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const size_t c = flat(coord(pts_(i, 0), 0), coord(pts_(i, 1), 1), coord(pts_(i, 2), 2));
      cell_of[static_cast<size_t>(i)] = c;
      ++start_[c + 1];
    }
    for (size_t c = 0; c < ncells; ++c) start_[c + 1] += start_[c];
    items_.resize(static_cast<size_t>(n));
    std::vector<size_t> fill(start_.begin(), start_.end() - 1);
    for (Eigen::Index i = 0; i < n; ++i) items_[fill[cell_of[static_cast<size_t>(i)]]++] = static_cast<int32_t>(i);
    packed_.resize(3 * static_cast<size_t>(n));
    for (size_t t = 0; t < items_.size(); ++t) {
      for (int a = 0; a < 3; ++a) packed_[3 * t + static_cast<size_t>(a)] = pts_(items_[t], a);
    }
  }

  int coord(double v, int axis) const {
    const int c = static_cast<int>(std::floor((v - lo_(axis)) / cell_));
    return std::clamp(c, 0, dims_[axis] - 1);
  }
  size_t flat(int x, int y, int z) const {
    return (static_cast<size_t>(x) * dims_[1] + y) * dims_[2] + z;
  }

  const Mat& pts_;
  RowVec lo_;
  double cell_ = 1.0;
  int dims_[3] = {1, 1, 1};
  std::vector<size_t> start_;
  std::vector<int32_t> items_;
  std::vector<double> packed_;  // coordinates in items_ order
};

}  // namespace

NeighborIndex knn_spatial(const Mat& positions, int k, int dilation, size_t queries) {
  if (positions.cols() != 3) throw_usage("knn_spatial: positions must be N x 3");
  const auto n = positions.rows();
  check_counts(n, k, dilation, "knn_spatial");
  const auto q = queries == 0 ? n : static_cast<Eigen::Index>(queries);
  if (q > n) throw_usage("knn_spatial: more queries than points");

  NeighborIndex out;
  out.k = k;
  out.dilation = dilation;
  out.space = NeighborSpace::Spatial;
  out.indices.resize(q, k);
  const size_t want = static_cast<size_t>(k) * dilation;
  const Grid grid(positions, want);
  parallel_for(0, static_cast<size_t>(q), [&](size_t lo, size_t hi) {
    std::vector<Candidate> best;
    best.reserve(want + 1);
    for (size_t i = lo; i < hi; ++i) {
      grid.nearest(static_cast<Eigen::Index>(i), want, best);
      select_dilated(best, k, dilation, out.indices.row(static_cast<Eigen::Index>(i)).data());
    }
  });
  return out;
}

NeighborIndex knn_feature(const Mat& features, int k, size_t memory_budget_bytes) {
  const auto n = features.rows();
  if (features.cols() < 1) throw_usage("knn_feature: feature width must be >= 1");
  check_counts(n, k, 1, "knn_feature");
  const double need = static_cast<double>(n) * static_cast<double>(n) * sizeof(double);
  if (need > static_cast<double>(memory_budget_bytes)) {
    throw_usage("knn_feature: " + std::to_string(n) + "x" + std::to_string(n) +
                " distance matrix exceeds the memory budget");
  }
  NeighborIndex out;
  out.k = k;
  out.dilation = 1;
  out.space = NeighborSpace::Feature;
  out.indices.resize(n, k);
  const auto dim = features.cols();
  parallel_for(0, static_cast<size_t>(n), [&](size_t lo, size_t hi) {
    std::vector<Candidate> row;
    row.reserve(static_cast<size_t>(n));
    for (size_t i = lo; i < hi; ++i) {
      row.clear();
      const double* a = features.row(static_cast<Eigen::Index>(i)).data();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == static_cast<Eigen::Index>(i)) continue;
        row.emplace_back(squared_distance(a, features.row(j).data(), dim), static_cast<int32_t>(j));
      }
      std::partial_sort(row.begin(), row.begin() + k, row.end());
      select_dilated(row, k, 1, out.indices.row(static_cast<Eigen::Index>(i)).data());
    }
  }, 8);
  return out;
}

NeighborIndex knn_bruteforce(const Mat& points, int k, int dilation) {
  const auto n = points.rows();
  check_counts(n, k, dilation, "knn_bruteforce");
  NeighborIndex out;
  out.k = k;
  out.dilation = dilation;
  out.space = points.cols() == 3 ? NeighborSpace::Spatial : NeighborSpace::Feature;
  out.indices.resize(n, k);
  std::vector<Candidate> all;
  for (Eigen::Index i = 0; i < n; ++i) {
    all.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      all.emplace_back(squared_distance(points.row(i).data(), points.row(j).data(), points.cols()),
                       static_cast<int32_t>(j));
    }
    std::sort(all.begin(), all.end());
    select_dilated(all, k, dilation, out.indices.row(i).data());
  }
  return out;
}

void write_neighbors_csv(std::ostream& out, const NeighborIndex& index, const Mat& points) {
  out << "point_index,rank,neighbor_index,distance\n";
  out.precision(9);
  for (Eigen::Index i = 0; i < index.indices.rows(); ++i) {
    for (int r = 0; r < index.k; ++r) {
      const int32_t j = index.indices(i, r);
      const double d = std::sqrt(squared_distance(points.row(i).data(), points.row(j).data(), points.cols()));
      out << i << ',' << (r + 1) * index.dilation << ',' << j << ',' << d << '\n';
    }
  }
}

}  // namespace ppc
