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

#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "ppc/conv_ops.hpp"
#include "ppc/pointcloud.hpp"

namespace ppc {

/// One level of the spatial pyramid: a neighbor convolution over
/// `input_size` points whose output is kept for the first `output_size`.
struct LayerSpec {
  ConvVariant variant = ConvVariant::Vertex;
  int input_size = 0;
  int output_size = 0;
  int features = 0;
  int dilation = 1;
  int neighbors = 16;

  bool operator==(const LayerSpec&) const = default;
};

struct TopEdgeConvSpec {
  bool enabled = true;
  int neighbors = 16;
  int features = 128;

  bool operator==(const TopEdgeConvSpec&) const = default;
};

struct FusionSpec {
  bool enabled = true;
  int width = 512;

  bool operator==(const FusionSpec&) const = default;
};

struct NetworkSpec {
  int input_points = 32768;
  std::vector<LayerSpec> layers;
  TopEdgeConvSpec top_edgeconv;
  FusionSpec fusion;
  std::vector<int> head_hidden{512, 256};
  int num_classes = 4;
  bool use_normals = true;
  bool use_dilation = true;

  /// The five-level 32768 -> 1024 pyramid:
  ///   LocalEdge, EdgeVertex, Vertex, Vertex, Vertex
  ///   features 32, 32, 64, 64, 64; dilation 1, 1, 2, 2, 1; 16 neighbors.
  static NetworkSpec standard(int num_classes = 4);

  /// Throws a usage error describing the first broken invariant.
  void validate() const;

  int dilation(size_t layer) const { return use_dilation ? layers[layer].dilation : 1; }
  int final_points() const { return layers.empty() ? input_points : layers.back().output_size; }
  int concat_width() const;
  int head_input_width() const { return fusion.enabled ? fusion.width : concat_width(); }

  /// Same pyramid with every point count scaled so the input is `input_points`.
  NetworkSpec scaled_to(int input_points) const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Components that an ablation run can remove.
enum class Omission { None, Dilation, Normals, VertexConv, FusionConv, TopEdgeConv };

std::string_view to_string(Omission o);
Omission parse_omission(std::string_view name);
inline constexpr Omission kAllOmissions[] = {Omission::Dilation,   Omission::Normals,
                                             Omission::VertexConv, Omission::FusionConv,
                                             Omission::TopEdgeConv, Omission::None};

/// Dilation: all dilations 1. Normals: positions become the input feature.
/// VertexConv: Vertex levels become EdgeVertex. FusionConv: concatenated
/// features go straight to the max-pool. TopEdgeConv: no feature-space layer.
NetworkSpec apply_omission(NetworkSpec spec, Omission omit);

nlohmann::ordered_json to_json(const NetworkSpec& spec);
/// Strict: unknown keys are rejected.
NetworkSpec network_spec_from_json(const nlohmann::json& j);

struct Model {
  NetworkSpec spec;
  std::vector<ConvWeights> layers;
  ConvWeights top;
  ConvWeights fusion;
  HeadWeights head;

  /// Every learnable tensor, in a fixed order, with stable names.
  std::vector<std::pair<std::string, Parameter*>> parameters();
  std::vector<std::pair<std::string, Mat*>> buffers();
  void zero_grad();
  size_t parameter_count();
};

Model build_network(const NetworkSpec& spec, Rng& rng);

struct ForwardOptions {
  Mode mode = Mode::Eval;
  double dropout = 0.6;
  /// Sort input rows before shuffling, making the retained subset depend
  /// only on the point set and the generator.
  bool canonical_order = false;
};

/// Everything backward() needs, plus per-level positions for inspection.
struct ForwardTrace {
  size_t batch = 0;
  std::vector<Mat> level_positions;  // level 0 = shuffled input, level l = after layer l
  std::vector<NeighborConvCache> layers;
  std::vector<Mat> layer_outputs;
  NeighborConvCache top;
  Mat concat;
  DenseCache fusion;
  IndexMat pool_argmax;
  Eigen::Index pool_rows = 0;
  HeadCache head;
};

/// Batch forward pass. Returns B x C logits. The generator is consumed for
/// each cloud's shuffle (in batch order) and then for dropout.
Mat forward(const Model& model, std::span<const PointCloud> batch, const ForwardOptions& opts,
            Rng& rng, ForwardTrace* trace = nullptr);

/// Accumulates gradients of sum(grad_logits .* logits) into model parameters.
void backward(Model& model, const ForwardTrace& trace, const Mat& grad_logits);

/// Every normalization layer that used batch statistics in `trace`, paired
/// with those statistics.
std::vector<std::pair<BatchNorm*, const NormStats*>> traced_norms(Model& model, const ForwardTrace& trace);

/// Folds the trace's batch statistics into the running estimates.
void apply_running_stats(Model& model, const ForwardTrace& trace);

/// First m rows; m must be in [1, N].
Mat gather_prefix(const Mat& features, Eigen::Index m);

}  // namespace ppc
