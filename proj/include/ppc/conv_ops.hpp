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

#include <string>
#include <string_view>
#include <vector>

#include "ppc/neighbors.hpp"
#include "ppc/rng.hpp"
#include "ppc/types.hpp"

namespace ppc {

/// Pair-feature layout fed to the shared kernel for point i and neighbor j:
///   Edge       [x_i, x_j - x_i]
///   LocalEdge  [x_j - x_i]
///   Vertex     [x_i, x_j]
///   EdgeVertex [p_i, p_j - p_i, x_i, x_j]
enum class ConvVariant { Edge, LocalEdge, Vertex, EdgeVertex };

std::string_view to_string(ConvVariant v);
ConvVariant parse_variant(std::string_view name);

/// Width of the concatenated pair feature for inputs of width `features`.
int pair_width(ConvVariant v, int features);

inline constexpr double kLeakySlope = 0.2;

struct Parameter {
  Mat value;
  Mat grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Per-feature affine normalization. Train mode uses batch statistics over
/// all rows (all point/neighbor pairs for neighbor convolutions); Eval mode
/// and single-row batches use the running estimates.
struct BatchNorm {
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  Parameter gamma;  // 1 x F
  Parameter beta;   // 1 x F
  Mat running_mean;
  Mat running_var;
};

/// Batch statistics observed during a Train-mode forward pass.
struct NormStats {
  RowVec mean;
  RowVec var;  // biased
  size_t count = 0;
};

void update_running_stats(BatchNorm& norm, const NormStats& stats);

/// Shared affine kernel followed by normalization and a leaky ReLU. The
/// bias exists only when normalization is off, since a per-feature shift
/// ahead of normalization has no effect.
struct ConvWeights {
  Parameter kernel;  // in x out
  Parameter bias;    // 1 x out, or empty
  BatchNorm norm;
  bool use_norm = true;
  bool use_activation = true;

  int in_width() const { return static_cast<int>(kernel.value.rows()); }
  int out_width() const { return static_cast<int>(kernel.value.cols()); }

  /// Learnable tensors, in a fixed order, with stable suffixes.
  std::vector<std::pair<std::string, Parameter*>> parameters(const std::string& prefix);
  std::vector<std::pair<std::string, Mat*>> buffers(const std::string& prefix);
  void zero_grad();
};

/// Uniform fan-in initialization: U(-1/sqrt(in), 1/sqrt(in)).
ConvWeights make_conv_weights(int in, int out, Rng& rng, bool use_norm = true,
                              bool use_activation = true);

/// Query points and their neighbor rows in a (possibly batched) source
/// matrix. `self_rows[q]` is the source row of query q itself.
struct PairGraph {
  std::vector<int32_t> self_rows;
  IndexMat neighbors;  // Q x k

  size_t queries() const { return self_rows.size(); }
  int k() const { return static_cast<int>(neighbors.cols()); }

  static PairGraph from_index(const NeighborIndex& index);
};

struct NeighborConvCache {
  ConvVariant variant = ConvVariant::Edge;
  PairGraph graph;
  Mat self_in;   // Q x self width
  Mat nbr_in;    // R x neighbor width
  Mat u;         // Q x F_out: self_in * self kernel
  Mat v;         // R x F_out: nbr_in * neighbor kernel
  RowVec shift;  // pre-activation of pair (q, j) is (u[q] + v[j] - shift) * invstd
  IndexMat argmax;
  RowVec invstd;
  bool batch_stats = false;
  NormStats stats;
  int feature_width = 0;
};

/// Neighbor convolution: per pair transform, then max over the k neighbors.
/// `positions` (same rows as `features`) is required for EdgeVertex only.
Mat neighbor_conv_forward(ConvVariant variant, const Mat& features, const Mat* positions,
                          const PairGraph& graph, const ConvWeights& weights, Mode mode,
                          NeighborConvCache* cache = nullptr);

/// Accumulates parameter gradients into `weights` and, when requested, the
/// gradient w.r.t. `features` into *grad_features (resized and zeroed here).
void neighbor_conv_backward(const NeighborConvCache& cache, const Mat& grad_out,
                            ConvWeights& weights, Mat* grad_features);

/// Single-cloud convenience form.
Mat neighbor_conv(ConvVariant variant, const Mat& features, const Mat* positions,
                  const NeighborIndex& nbrs, const ConvWeights& weights, Mode mode = Mode::Eval);

struct DenseCache {
  Mat input;
  Mat pre;   // normalized pre-activation (or raw with no norm)
  Mat mask;  // dropout mask (scaled), empty when unused
  RowVec invstd;
  bool batch_stats = false;
  NormStats stats;
};

/// Row-wise affine + normalization + activation, optionally followed by
/// inverted dropout with drop probability `dropout` (Train mode only).
Mat dense_forward(const Mat& input, const ConvWeights& weights, Mode mode,
                  DenseCache* cache = nullptr, double dropout = 0.0, Rng* rng = nullptr);
void dense_backward(const DenseCache& cache, const Mat& grad_out, ConvWeights& weights,
                    Mat* grad_input);

/// Kernel-size-1 convolution applied independently to every point.
inline Mat pointwise_conv(const Mat& features, const ConvWeights& weights, Mode mode = Mode::Eval) {
  return dense_forward(features, weights, mode);
}

/// Per-feature max over each of `segments` equal consecutive row blocks.
Mat global_maxpool(const Mat& features, int segments = 1, IndexMat* argmax = nullptr);
Mat global_maxpool_backward(const Mat& grad_out, const IndexMat& argmax, Eigen::Index rows);

struct HeadWeights {
  ConvWeights hidden1;
  ConvWeights hidden2;
  ConvWeights output;

  std::vector<std::pair<std::string, Parameter*>> parameters(const std::string& prefix);
  std::vector<std::pair<std::string, Mat*>> buffers(const std::string& prefix);
};

HeadWeights make_head_weights(int in, int hidden1, int hidden2, int classes, Rng& rng);

struct HeadCache {
  DenseCache stage1;
  DenseCache stage2;
  DenseCache output;
};

/// Two hidden stages with dropout after each, then an affine map to logits.
Mat classifier_head(const Mat& global_features, const HeadWeights& head, Mode mode,
                    double dropout, Rng& rng, HeadCache* cache = nullptr);
void classifier_head_backward(const HeadCache& cache, const Mat& grad_logits, HeadWeights& head,
                              Mat* grad_input);

}  // namespace ppc
