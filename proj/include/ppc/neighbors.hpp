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

#include <cstddef>
#include <ostream>

#include "ppc/types.hpp"

namespace ppc {

enum class NeighborSpace { Spatial, Feature };

/// Row i lists the selected neighbors of query point i. With dilation d the
/// row holds distance ranks d, 2d, ..., kd (1-based, self excluded, ties
/// broken by lower point index).
struct NeighborIndex {
  IndexMat indices;
  int k = 0;
  int dilation = 1;
  NeighborSpace space = NeighborSpace::Spatial;

  size_t rows() const { return static_cast<size_t>(indices.rows()); }
};

/// Default cap on the N x N distance matrix implied by feature-space search.
inline constexpr size_t kDefaultFeatureKnnBudget = size_t{1} << 30;

/// Exact Euclidean k-NN over 3D positions using a uniform grid. Only the
/// first `queries` points get a row (0 = all); candidates are all N points.
NeighborIndex knn_spatial(const Mat& positions, int k, int dilation, size_t queries = 0);

/// Exact k-NN in feature space (dilation 1). Throws when N*N doubles would
/// exceed `memory_budget_bytes`.
NeighborIndex knn_feature(const Mat& features, int k,
                          size_t memory_budget_bytes = kDefaultFeatureKnnBudget);

/// Reference implementation: all pairwise distances, full sort.
NeighborIndex knn_bruteforce(const Mat& points, int k, int dilation);

/// CSV rows: point_index,rank,neighbor_index,distance.
void write_neighbors_csv(std::ostream& out, const NeighborIndex& index, const Mat& points);

/// Squared Euclidean distance, accumulated in index order. Every search path
/// uses this so distances compare bit-exactly.
inline double squared_distance(const double* a, const double* b, Eigen::Index dim) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < dim; ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

}  // namespace ppc
