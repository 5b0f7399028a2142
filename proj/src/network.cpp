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

#include "ppc/network.hpp"

#include <algorithm>
#include <bit>
#include <set>

#include "ppc/error.hpp"
#include "ppc/json_util.hpp"

namespace ppc {

NetworkSpec NetworkSpec::standard(int num_classes) {
  NetworkSpec s;
  s.input_points = 32768;
  const ConvVariant variants[] = {ConvVariant::LocalEdge, ConvVariant::EdgeVertex, ConvVariant::Vertex,
                                  ConvVariant::Vertex, ConvVariant::Vertex};
  const int features[] = {32, 32, 64, 64, 64};
  const int dilation[] = {1, 1, 2, 2, 1};
  int size = s.input_points;
  for (int l = 0; l < 5; ++l) {
    s.layers.push_back({variants[l], size, size / 2, features[l], dilation[l], 16});
    size /= 2;
  }
  s.num_classes = num_classes;
  return s;
}

void NetworkSpec::validate() const {
  auto fail = [](const std::string& what) { throw_usage("network spec: " + what); };
  if (layers.empty()) fail("at least one pyramid layer is required");
  if (input_points < 2) fail("input_points must be >= 2");
  if (layers.front().input_size != input_points) fail("layer 1 input_size must equal input_points");
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const std::string tag = "layer " + std::to_string(l + 1) + ": ";
    if (L.output_size * 2 != L.input_size) fail(tag + "output_size must be input_size / 2");
    if (L.features < 1) fail(tag + "features must be positive");
    if (L.neighbors < 1) fail(tag + "neighbors must be >= 1");
    if (L.dilation < 1) fail(tag + "dilation must be >= 1");
    if (L.neighbors * dilation(l) >= L.output_size) fail(tag + "neighbors * dilation must be < output_size");
    if (l > 0 && L.input_size != layers[l - 1].output_size) fail(tag + "input_size must chain from the previous output");
  }
  if (top_edgeconv.enabled) {
    if (top_edgeconv.features < 1) fail("top_edgeconv.features must be positive");
    if (top_edgeconv.neighbors < 1 || top_edgeconv.neighbors >= final_points()) {
      fail("top_edgeconv.neighbors must be in [1, final point count)");
    }
  }
  if (fusion.enabled && fusion.width < 1) fail("fusion.width must be positive");
  if (head_hidden.size() != 2 || head_hidden[0] < 1 || head_hidden[1] < 1) {
    fail("head_hidden must list two positive widths");
  }
  if (num_classes < 2) fail("num_classes must be >= 2");
}

int NetworkSpec::concat_width() const {
  int w = 0;
  for (const auto& L : layers) w += L.features;
  if (top_edgeconv.enabled) w += top_edgeconv.features;
  return w;
}

NetworkSpec NetworkSpec::scaled_to(int new_input) const {
  // Only power-of-two ratios keep every level on the halving chain.
  const int lo = std::min(new_input, input_points), hi = std::max(new_input, input_points);
  if (new_input < 1 || hi % lo != 0 || !std::has_single_bit(static_cast<unsigned>(hi / lo))) {
    throw_usage("point count " + std::to_string(new_input) + " is not a power-of-two multiple of " +
                std::to_string(input_points));
  }
  NetworkSpec s = *this;
  auto scale = [&](int v) {
    const long long num = static_cast<long long>(v) * new_input;
    if (new_input < 1 || num % input_points != 0) {
      throw_usage("point count " + std::to_string(new_input) + " is incompatible with the halving chain");
    }
    return static_cast<int>(num / input_points);
  };
  s.input_points = new_input;
  for (auto& L : s.layers) {
    L.input_size = scale(L.input_size);
    L.output_size = scale(L.output_size);
  }
  s.validate();
  return s;
}

std::string_view to_string(Omission o) {
  switch (o) {
    case Omission::None: return "None";
    case Omission::Dilation: return "Dilation";
    case Omission::Normals: return "Normals";
    case Omission::VertexConv: return "VertexConv";
    case Omission::FusionConv: return "FusionConv";
    case Omission::TopEdgeConv: return "TopEdgeConv";
  }
  return "?";
}

Omission parse_omission(std::string_view name) {
  for (Omission o : kAllOmissions) {
    if (to_string(o) == name) return o;
  }
  throw_usage("unknown omission '" + std::string(name) + "'");
}

NetworkSpec apply_omission(NetworkSpec spec, Omission omit) {
  switch (omit) {
    case Omission::None: break;
    case Omission::Dilation:
      spec.use_dilation = false;
      for (auto& L : spec.layers) L.dilation = 1;
      break;
    case Omission::Normals: spec.use_normals = false; break;
    case Omission::VertexConv:
      for (auto& L : spec.layers) {
        if (L.variant == ConvVariant::Vertex) L.variant = ConvVariant::EdgeVertex;
      }
      break;
    case Omission::FusionConv: spec.fusion.enabled = false; break;
    case Omission::TopEdgeConv: spec.top_edgeconv.enabled = false; break;
  }
  return spec;
}

nlohmann::ordered_json to_json(const NetworkSpec& spec) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& L : spec.layers) {
    layers.push_back({{"variant", std::string(to_string(L.variant))},
                      {"input_size", L.input_size},
                      {"output_size", L.output_size},
                      {"features", L.features},
                      {"dilation", L.dilation},
                      {"neighbors", L.neighbors}});
  }
  nlohmann::ordered_json j;
  j["input_points"] = spec.input_points;
  j["layers"] = layers;
  j["top_edgeconv"] = {{"enabled", spec.top_edgeconv.enabled},
                       {"neighbors", spec.top_edgeconv.neighbors},
                       {"features", spec.top_edgeconv.features}};
  j["fusion"] = {{"enabled", spec.fusion.enabled}, {"width", spec.fusion.width}};
  j["head_hidden"] = spec.head_hidden;
  j["num_classes"] = spec.num_classes;
  j["use_normals"] = spec.use_normals;
  j["use_dilation"] = spec.use_dilation;
  return j;
}

NetworkSpec network_spec_from_json(const nlohmann::json& j) {
  check_keys(j, {"input_points", "layers", "top_edgeconv", "fusion", "head_hidden", "num_classes",
                 "use_normals", "use_dilation"},
             "network");
  NetworkSpec s = NetworkSpec::standard();
  get_if(j, "input_points", s.input_points, "network");
  if (j.contains("layers")) {
    s.layers.clear();
    for (const auto& lj : j.at("layers")) {
      check_keys(lj, {"variant", "input_size", "output_size", "features", "dilation", "neighbors"},
                 "network.layers[]");
      LayerSpec L;
      std::string variant;
      require(lj, "variant", variant, "network.layers[]");
      L.variant = parse_variant(variant);
      require(lj, "input_size", L.input_size, "network.layers[]");
      require(lj, "output_size", L.output_size, "network.layers[]");
      require(lj, "features", L.features, "network.layers[]");
      get_if(lj, "dilation", L.dilation, "network.layers[]");
      get_if(lj, "neighbors", L.neighbors, "network.layers[]");
      s.layers.push_back(L);
    }
  }
  if (j.contains("top_edgeconv")) {
    const auto& t = j.at("top_edgeconv");
    check_keys(t, {"enabled", "neighbors", "features"}, "network.top_edgeconv");
    get_if(t, "enabled", s.top_edgeconv.enabled, "network.top_edgeconv");
    get_if(t, "neighbors", s.top_edgeconv.neighbors, "network.top_edgeconv");
    get_if(t, "features", s.top_edgeconv.features, "network.top_edgeconv");
  }
  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    check_keys(f, {"enabled", "width"}, "network.fusion");
    get_if(f, "enabled", s.fusion.enabled, "network.fusion");
    get_if(f, "width", s.fusion.width, "network.fusion");
  }
  get_if(j, "head_hidden", s.head_hidden, "network");
  get_if(j, "num_classes", s.num_classes, "network");
  get_if(j, "use_normals", s.use_normals, "network");
  get_if(j, "use_dilation", s.use_dilation, "network");
  s.validate();
  return s;
}

std::vector<std::pair<std::string, Parameter*>> Model::parameters() {
  std::vector<std::pair<std::string, Parameter*>> out;
  for (size_t l = 0; l < layers.size(); ++l) {
    for (auto& p : layers[l].parameters("layer" + std::to_string(l + 1))) out.push_back(p);
  }
  if (spec.top_edgeconv.enabled) {
    for (auto& p : top.parameters("top")) out.push_back(p);
  }
  if (spec.fusion.enabled) {
    for (auto& p : fusion.parameters("fusion")) out.push_back(p);
  }
  for (auto& p : head.parameters("head")) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, Mat*>> Model::buffers() {
  std::vector<std::pair<std::string, Mat*>> out;
  for (size_t l = 0; l < layers.size(); ++l) {
    for (auto& b : layers[l].buffers("layer" + std::to_string(l + 1))) out.push_back(b);
  }
  if (spec.top_edgeconv.enabled) {
    for (auto& b : top.buffers("top")) out.push_back(b);
  }
  if (spec.fusion.enabled) {
    for (auto& b : fusion.buffers("fusion")) out.push_back(b);
  }
  for (auto& b : head.buffers("head")) out.push_back(b);
  return out;
}

void Model::zero_grad() {
  for (auto& [name, p] : parameters()) p->zero_grad();
}

size_t Model::parameter_count() {
  size_t n = 0;
  for (auto& [name, p] : parameters()) n += static_cast<size_t>(p->value.size());
  return n;
}

Model build_network(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  Model m;
  m.spec = spec;
  int width = 3;
  for (const auto& L : spec.layers) {
    m.layers.push_back(make_conv_weights(pair_width(L.variant, width), L.features, rng));
    width = L.features;
  }
  if (spec.top_edgeconv.enabled) {
    m.top = make_conv_weights(pair_width(ConvVariant::Edge, width), spec.top_edgeconv.features, rng);
  }
  if (spec.fusion.enabled) m.fusion = make_conv_weights(spec.concat_width(), spec.fusion.width, rng);
  m.head = make_head_weights(spec.head_input_width(), spec.head_hidden[0], spec.head_hidden[1],
                             spec.num_classes, rng);
  return m;
}

Mat gather_prefix(const Mat& features, Eigen::Index m) {
  if (m < 1 || m > features.rows()) {
    throw_usage("gather_prefix: m = " + std::to_string(m) + " outside [1, " + std::to_string(features.rows()) + "]");
  }
  return features.topRows(m);
}

namespace {

/// Rows b*stride + i for i < keep, for every sample b.
Mat gather_batched_prefix(const Mat& x, size_t batch, Eigen::Index stride, Eigen::Index keep) {
  Mat out(static_cast<Eigen::Index>(batch) * keep, x.cols());
  for (size_t b = 0; b < batch; ++b) {
    out.middleRows(static_cast<Eigen::Index>(b) * keep, keep) =
        x.middleRows(static_cast<Eigen::Index>(b) * stride, keep);
  }
  return out;
}

void check_finite(const Mat& x, const std::string& where) {
  if (!x.allFinite()) throw_numeric("non-finite values at " + where);
}

}  // namespace

Mat forward(const Model& model, std::span<const PointCloud> batch, const ForwardOptions& opts,
            Rng& rng, ForwardTrace* trace) {
  const auto& spec = model.spec;
  const size_t nb = batch.size();
  if (nb == 0) throw_usage("forward: empty batch");
  const Eigen::Index n0 = spec.input_points;

  Mat positions(static_cast<Eigen::Index>(nb) * n0, 3);
  Mat features(static_cast<Eigen::Index>(nb) * n0, 3);
  for (size_t b = 0; b < nb; ++b) {
    if (batch[b].size() < static_cast<size_t>(n0)) {
      throw_data("forward: cloud " + std::to_string(b) + " has " + std::to_string(batch[b].size()) +
                 " points, the network needs " + std::to_string(n0));
    }
    const PointCloud shuffled =
        shuffle_truncate(opts.canonical_order ? canonical_order(batch[b]) : batch[b], rng);
    const auto row = static_cast<Eigen::Index>(b) * n0;
    positions.middleRows(row, n0) = shuffled.positions.topRows(n0);
    features.middleRows(row, n0) = spec.use_normals ? shuffled.normals.topRows(n0) : shuffled.positions.topRows(n0);
  }
  check_finite(positions, "network input");

  if (trace != nullptr) {
    *trace = ForwardTrace{};
    trace->batch = nb;
    trace->level_positions.push_back(positions);
    trace->layers.resize(spec.layers.size());
  }

  std::vector<Mat> outputs;
  outputs.reserve(spec.layers.size());
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& L = spec.layers[l];
    const Eigen::Index n = L.input_size, m = L.output_size;
    PairGraph graph;
    graph.self_rows.resize(nb * static_cast<size_t>(m));
    graph.neighbors.resize(static_cast<Eigen::Index>(nb) * m, L.neighbors);
    for (size_t b = 0; b < nb; ++b) {
      const Eigen::Index base = static_cast<Eigen::Index>(b) * n;
      const Mat local = positions.middleRows(base, n);
      const NeighborIndex idx = knn_spatial(local, L.neighbors, spec.dilation(l), static_cast<size_t>(m));
      const Eigen::Index q0 = static_cast<Eigen::Index>(b) * m;
      graph.neighbors.middleRows(q0, m) = idx.indices.array() + static_cast<int32_t>(base);
      for (Eigen::Index i = 0; i < m; ++i) graph.self_rows[static_cast<size_t>(q0 + i)] = static_cast<int32_t>(base + i);
    }
    Mat out = neighbor_conv_forward(L.variant, features, &positions, graph, model.layers[l], opts.mode,
                                    trace ? &trace->layers[l] : nullptr);
    check_finite(out, "pyramid layer " + std::to_string(l + 1));
    positions = gather_batched_prefix(positions, nb, n, m);
    features = out;
    outputs.push_back(std::move(out));
    if (trace != nullptr) trace->level_positions.push_back(positions);
  }

  const Eigen::Index m_final = spec.final_points();
  Mat top_out;
  if (spec.top_edgeconv.enabled) {
    const int k = spec.top_edgeconv.neighbors;
    PairGraph graph;
    graph.self_rows.resize(nb * static_cast<size_t>(m_final));
    graph.neighbors.resize(static_cast<Eigen::Index>(nb) * m_final, k);
    for (size_t b = 0; b < nb; ++b) {
      const Eigen::Index base = static_cast<Eigen::Index>(b) * m_final;
      const NeighborIndex idx = knn_feature(features.middleRows(base, m_final), k);
      graph.neighbors.middleRows(base, m_final) = idx.indices.array() + static_cast<int32_t>(base);
      for (Eigen::Index i = 0; i < m_final; ++i) graph.self_rows[static_cast<size_t>(base + i)] = static_cast<int32_t>(base + i);
    }
    top_out = neighbor_conv_forward(ConvVariant::Edge, features, nullptr, graph, model.top, opts.mode,
                                    trace ? &trace->top : nullptr);
    check_finite(top_out, "top EdgeConv");
  }

  Mat concat(static_cast<Eigen::Index>(nb) * m_final, spec.concat_width());
  Eigen::Index col = 0;
  for (size_t l = 0; l < outputs.size(); ++l) {
    const auto w = outputs[l].cols();
    concat.middleCols(col, w) = gather_batched_prefix(outputs[l], nb, spec.layers[l].output_size, m_final);
    col += w;
  }
  if (spec.top_edgeconv.enabled) concat.middleCols(col, top_out.cols()) = top_out;

  Mat fused = spec.fusion.enabled
                  ? dense_forward(concat, model.fusion, opts.mode, trace ? &trace->fusion : nullptr)
                  : concat;
  check_finite(fused, "fusion conv");
  IndexMat pool_arg;
  const Mat pooled = global_maxpool(fused, static_cast<int>(nb), &pool_arg);
  const Mat logits = classifier_head(pooled, model.head, opts.mode, opts.dropout, rng,
                                     trace ? &trace->head : nullptr);
  check_finite(logits, "classifier head");

  if (trace != nullptr) {
    trace->layer_outputs = std::move(outputs);
    trace->concat = std::move(concat);
    trace->pool_argmax = std::move(pool_arg);
    trace->pool_rows = fused.rows();
  }
  return logits;
}

void backward(Model& model, const ForwardTrace& trace, const Mat& grad_logits) {
  const auto& spec = model.spec;
  const size_t nb = trace.batch;
  const Eigen::Index m_final = spec.final_points();

  Mat d_pooled;
  classifier_head_backward(trace.head, grad_logits, model.head, &d_pooled);
  const Mat d_fused = global_maxpool_backward(d_pooled, trace.pool_argmax, trace.pool_rows);
  Mat d_concat;
  if (spec.fusion.enabled) {
    dense_backward(trace.fusion, d_fused, model.fusion, &d_concat);
  } else {
    d_concat = d_fused;
  }

  std::vector<Mat> d_out(spec.layers.size());
  Eigen::Index col = 0;
  for (size_t l = 0; l < spec.layers.size(); ++l) {
    const Eigen::Index m = spec.layers[l].output_size;
    const auto w = spec.layers[l].features;
    d_out[l] = Mat::Zero(static_cast<Eigen::Index>(nb) * m, w);
    for (size_t b = 0; b < nb; ++b) {
      d_out[l].middleRows(static_cast<Eigen::Index>(b) * m, m_final) =
          d_concat.block(static_cast<Eigen::Index>(b) * m_final, col, m_final, w);
    }
    col += w;
  }
  if (spec.top_edgeconv.enabled) {
    Mat d_feat;
    neighbor_conv_backward(trace.top, d_concat.middleCols(col, spec.top_edgeconv.features), model.top, &d_feat);
    d_out.back() += d_feat;
  }
  for (size_t l = spec.layers.size(); l-- > 0;) {
    Mat d_in;
    neighbor_conv_backward(trace.layers[l], d_out[l], model.layers[l], l > 0 ? &d_in : nullptr);
    if (l > 0) d_out[l - 1] += d_in;
  }
}

std::vector<std::pair<BatchNorm*, const NormStats*>> traced_norms(Model& model, const ForwardTrace& trace) {
  std::vector<std::pair<BatchNorm*, const NormStats*>> out;
  auto add = [&](ConvWeights& w, bool batch_stats, const NormStats& st) {
    if (w.use_norm && batch_stats) out.emplace_back(&w.norm, &st);
  };
  for (size_t l = 0; l < model.layers.size() && l < trace.layers.size(); ++l) {
    add(model.layers[l], trace.layers[l].batch_stats, trace.layers[l].stats);
  }
  if (model.spec.top_edgeconv.enabled) add(model.top, trace.top.batch_stats, trace.top.stats);
  if (model.spec.fusion.enabled) add(model.fusion, trace.fusion.batch_stats, trace.fusion.stats);
  add(model.head.hidden1, trace.head.stage1.batch_stats, trace.head.stage1.stats);
  add(model.head.hidden2, trace.head.stage2.batch_stats, trace.head.stage2.stats);
  return out;
}

void apply_running_stats(Model& model, const ForwardTrace& trace) {
  for (auto& [norm, stats] : traced_norms(model, trace)) update_running_stats(*norm, *stats);
}

}  // namespace ppc
