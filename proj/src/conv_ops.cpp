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

#include "ppc/conv_ops.hpp"

#include <cmath>

#include "ppc/error.hpp"
#include "ppc/parallel.hpp"

namespace ppc {

std::string_view to_string(ConvVariant v) {
  switch (v) {
    case ConvVariant::Edge: return "Edge";
    case ConvVariant::LocalEdge: return "LocalEdge";
    case ConvVariant::Vertex: return "Vertex";
    case ConvVariant::EdgeVertex: return "EdgeVertex";
  }
  return "?";
}

ConvVariant parse_variant(std::string_view name) {
  if (name == "Edge") return ConvVariant::Edge;
  if (name == "LocalEdge") return ConvVariant::LocalEdge;
  if (name == "Vertex") return ConvVariant::Vertex;
  if (name == "EdgeVertex") return ConvVariant::EdgeVertex;
  throw_usage("unknown convolution variant '" + std::string(name) + "'");
}

int pair_width(ConvVariant v, int features) {
  switch (v) {
    case ConvVariant::Edge: return 2 * features;
    case ConvVariant::LocalEdge: return features;
    case ConvVariant::Vertex: return 2 * features;
    case ConvVariant::EdgeVertex: return 6 + 2 * features;
  }
  return 0;
}

void update_running_stats(BatchNorm& norm, const NormStats& stats) {
  if (stats.count < 2) return;
  const double m = BatchNorm::kMomentum;
  const double unbias = static_cast<double>(stats.count) / static_cast<double>(stats.count - 1);
  norm.running_mean = (1.0 - m) * norm.running_mean + m * stats.mean;
  norm.running_var = (1.0 - m) * norm.running_var + (m * unbias) * stats.var;
}

std::vector<std::pair<std::string, Parameter*>> ConvWeights::parameters(const std::string& prefix) {
  std::vector<std::pair<std::string, Parameter*>> out{{prefix + ".kernel", &kernel}};
  if (use_norm) {
    out.emplace_back(prefix + ".gamma", &norm.gamma);
    out.emplace_back(prefix + ".beta", &norm.beta);
  } else {
    out.emplace_back(prefix + ".bias", &bias);
  }
  return out;
}

std::vector<std::pair<std::string, Mat*>> ConvWeights::buffers(const std::string& prefix) {
  if (!use_norm) return {};
  return {{prefix + ".running_mean", &norm.running_mean}, {prefix + ".running_var", &norm.running_var}};
}

void ConvWeights::zero_grad() {
  for (auto& [name, p] : parameters("")) p->zero_grad();
}

ConvWeights make_conv_weights(int in, int out, Rng& rng, bool use_norm, bool use_activation) {
  if (in < 1 || out < 1) throw_usage("convolution widths must be positive");
  ConvWeights w;
  w.use_norm = use_norm;
  w.use_activation = use_activation;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w.kernel.value.resize(in, out);
  for (Eigen::Index i = 0; i < w.kernel.value.size(); ++i) {
    w.kernel.value.data()[i] = (2.0 * rng.uniform() - 1.0) * bound;
  }
  if (use_norm) {
    w.norm.gamma.value = Mat::Ones(1, out);
    w.norm.beta.value = Mat::Zero(1, out);
    w.norm.running_mean = Mat::Zero(1, out);
    w.norm.running_var = Mat::Ones(1, out);
  } else {
    w.bias.value.resize(1, out);
    for (Eigen::Index i = 0; i < out; ++i) w.bias.value(0, i) = (2.0 * rng.uniform() - 1.0) * bound;
  }
  w.zero_grad();
  return w;
}

PairGraph PairGraph::from_index(const NeighborIndex& index) {
  PairGraph g;
  g.self_rows.resize(index.rows());
  for (size_t i = 0; i < g.self_rows.size(); ++i) g.self_rows[i] = static_cast<int32_t>(i);
  g.neighbors = index.indices;
  return g;
}

namespace {

inline double leaky(double y) { return y < 0.0 ? kLeakySlope * y : y; }

bool has_positions(ConvVariant v) { return v == ConvVariant::EdgeVertex; }

/// Splits the pair kernel into the part applied to the query point's own
/// inputs and the part applied to the neighbor's inputs, so that
/// pair(i, j) * W == self(i) * Ks + nbr(j) * Kn.
void split_kernel(ConvVariant v, const Mat& w, int f, Mat& ks, Mat& kn) {
  switch (v) {
    case ConvVariant::Edge:
      ks = w.topRows(f) - w.bottomRows(f);
      kn = w.bottomRows(f);
      break;
    case ConvVariant::LocalEdge:
      ks = -w;
      kn = w;
      break;
    case ConvVariant::Vertex:
      ks = w.topRows(f);
      kn = w.bottomRows(f);
      break;
    case ConvVariant::EdgeVertex:
      ks.resize(3 + f, w.cols());
      kn.resize(3 + f, w.cols());
      ks.topRows(3) = w.topRows(3) - w.middleRows(3, 3);
      ks.bottomRows(f) = w.middleRows(6, f);
      kn.topRows(3) = w.middleRows(3, 3);
      kn.bottomRows(f) = w.bottomRows(f);
      break;
  }
}

/// Adjoint of split_kernel.
void merge_kernel_grad(ConvVariant v, const Mat& dks, const Mat& dkn, int f, Mat& dw) {
  switch (v) {
    case ConvVariant::Edge:
      dw.topRows(f) += dks;
      dw.bottomRows(f) += dkn - dks;
      break;
    case ConvVariant::LocalEdge:
      dw += dkn - dks;
      break;
    case ConvVariant::Vertex:
      dw.topRows(f) += dks;
      dw.bottomRows(f) += dkn;
      break;
    case ConvVariant::EdgeVertex:
      dw.topRows(3) += dks.topRows(3);
      dw.middleRows(3, 3) += dkn.topRows(3) - dks.topRows(3);
      dw.middleRows(6, f) += dks.bottomRows(f);
      dw.bottomRows(f) += dkn.bottomRows(f);
      break;
  }
}

Mat with_positions(const Mat& positions, const Mat& features) {
  Mat out(features.rows(), 3 + features.cols());
  out.leftCols(3) = positions;
  out.rightCols(features.cols()) = features;
  return out;
}

/// Normalizes `pre` in place (batch or running statistics) and returns 1/std.
RowVec normalize_rows(Mat& pre, const BatchNorm& norm, bool batch, NormStats* stats) {
  const auto rows = pre.rows();
  const auto cols = pre.cols();
  RowVec mean(cols), var(cols);
  if (batch) {
    mean.setZero();
    for (Eigen::Index r = 0; r < rows; ++r) mean += pre.row(r);
    mean /= static_cast<double>(rows);
    var.setZero();
    for (Eigen::Index r = 0; r < rows; ++r) var += (pre.row(r) - mean).array().square().matrix();
    var /= static_cast<double>(rows);
  } else {
    mean = norm.running_mean;
    var = norm.running_var;
  }
  const RowVec invstd = (var.array() + BatchNorm::kEps).rsqrt().matrix();
  parallel_for(0, static_cast<size_t>(rows), [&](size_t lo, size_t hi) {
    for (size_t r = lo; r < hi; ++r) {
      auto row = pre.row(static_cast<Eigen::Index>(r));
      row = ((row - mean).array() * invstd.array()).matrix();
    }
  }, 256);
  if (stats != nullptr && batch) {
    stats->mean = mean;
    stats->var = var;
    stats->count = static_cast<size_t>(rows);
  }
  return invstd;
}

}  // namespace

Mat neighbor_conv_forward(ConvVariant variant, const Mat& features, const Mat* positions,
                          const PairGraph& graph, const ConvWeights& weights, Mode mode,
                          NeighborConvCache* cache) {
  const int f = static_cast<int>(features.cols());
  const auto q_count = static_cast<Eigen::Index>(graph.queries());
  const int k = graph.k();
  if (weights.in_width() != pair_width(variant, f)) {
    throw_usage("neighbor_conv: kernel expects pair width " + std::to_string(weights.in_width()) +
                ", variant " + std::string(to_string(variant)) + " over " + std::to_string(f) +
                " features gives " + std::to_string(pair_width(variant, f)));
  }
  if (has_positions(variant)) {
    if (positions == nullptr || positions->rows() != features.rows() || positions->cols() != 3) {
      throw_usage("neighbor_conv: EdgeVertex needs N x 3 positions matching the features");
    }
  }
  if (k < 1 || graph.neighbors.rows() != q_count) throw_usage("neighbor_conv: malformed neighbor graph");
  if (!features.allFinite()) throw_numeric("neighbor_conv: non-finite input features");
  for (Eigen::Index i = 0; i < graph.neighbors.size(); ++i) {
    const int32_t j = graph.neighbors.data()[i];
    if (j < 0 || j >= features.rows()) throw_usage("neighbor_conv: neighbor index out of range");
  }

  Mat self_in(q_count, has_positions(variant) ? 3 + f : f);
  for (Eigen::Index q = 0; q < q_count; ++q) {
    const int32_t r = graph.self_rows[static_cast<size_t>(q)];
    if (has_positions(variant)) {
      self_in.row(q).head(3) = positions->row(r);
      self_in.row(q).tail(f) = features.row(r);
    } else {
      self_in.row(q) = features.row(r);
    }
  }
  Mat nbr_in = has_positions(variant) ? with_positions(*positions, features) : features;

  Mat ks, kn;
  split_kernel(variant, weights.kernel.value, f, ks, kn);
  Mat u = self_in * ks;
  Mat v = nbr_in * kn;
  const auto out_w = weights.out_width();
  const auto pairs = q_count * k;

  // Pair rows u[q] + v[j] are never materialized; every pass regenerates
  // them. x = (pair - shift) * scale is the normalized pre-activation, or
  // pair + bias without normalization.
  RowVec shift, scale;
  const bool batch = weights.use_norm && mode == Mode::Train && pairs > 1;
  if (weights.use_norm) {
    RowVec mean(out_w), var(out_w);
    if (batch) {
      mean.setZero();
      for (Eigen::Index q = 0; q < q_count; ++q) {
        for (int t = 0; t < k; ++t) mean += u.row(q) + v.row(graph.neighbors(q, t));
      }
      mean /= static_cast<double>(pairs);
      var.setZero();
      for (Eigen::Index q = 0; q < q_count; ++q) {
        for (int t = 0; t < k; ++t) {
          var += ((u.row(q) + v.row(graph.neighbors(q, t))) - mean).array().square().matrix();
        }
      }
      var /= static_cast<double>(pairs);
      if (cache != nullptr) {
        cache->stats.mean = mean;
        cache->stats.var = var;
        cache->stats.count = static_cast<size_t>(pairs);
      }
    } else {
      mean = weights.norm.running_mean;
      var = weights.norm.running_var;
    }
    shift = mean;
    scale = (var.array() + BatchNorm::kEps).rsqrt().matrix();
  } else {
    shift = -RowVec(weights.bias.value);
    scale = RowVec::Ones(out_w);
  }

  // Branch-free inner loop: y = max(a, slope * a) with a = g * x + b equals
  // the leaky ReLU for slope < 1; no norm means g = 1, b = 0, and no
  // activation means slope = 1.
  Mat out(q_count, out_w);
  IndexMat argmax(q_count, out_w);
  const RowVec gain = weights.use_norm ? RowVec(weights.norm.gamma.value) : RowVec::Ones(out_w);
  const RowVec offset = weights.use_norm ? RowVec(weights.norm.beta.value) : RowVec::Zero(out_w);
  const double slope = weights.use_activation ? kLeakySlope : 1.0;
  parallel_for(0, static_cast<size_t>(q_count), [&](size_t lo, size_t hi) {
    // Locals keep the compiler from assuming the outputs alias the loop
    // bounds, which would block vectorization.
    const Eigen::Index w = out_w;
    const int kk = k;
    const double sl = slope;
    const double* __restrict sh = shift.data();
    const double* __restrict sc = scale.data();
    const double* __restrict ga = gain.data();
    const double* __restrict of = offset.data();
    for (size_t qi = lo; qi < hi; ++qi) {
      const auto q = static_cast<Eigen::Index>(qi);
      const double* __restrict uq = u.row(q).data();
      double* __restrict best = out.row(q).data();
      int32_t* __restrict best_t = argmax.row(q).data();
      for (int t = 0; t < kk; ++t) {
        const double* __restrict vj = v.row(graph.neighbors(q, t)).data();
        for (Eigen::Index c = 0; c < w; ++c) {
          const double a = ga[c] * (((uq[c] + vj[c]) - sh[c]) * sc[c]) + of[c];
          const double y = std::max(a, sl * a);
          const bool take = t == 0 || y > best[c];
          best[c] = take ? y : best[c];
          best_t[c] = take ? t : best_t[c];
        }
      }
    }
  }, 64);

  if (cache != nullptr) {
    cache->variant = variant;
    cache->graph = graph;
    cache->self_in = std::move(self_in);
    cache->nbr_in = std::move(nbr_in);
    cache->u = std::move(u);
    cache->v = std::move(v);
    cache->shift = shift;
    cache->argmax = std::move(argmax);
    cache->invstd = scale;
    cache->batch_stats = batch;
    cache->feature_width = f;
  }
  return out;
}

void neighbor_conv_backward(const NeighborConvCache& cache, const Mat& grad_out,
                            ConvWeights& weights, Mat* grad_features) {
  const auto& g = cache.graph;
  const auto q_count = static_cast<Eigen::Index>(g.queries());
  const int k = g.k();
  const auto out_w = weights.out_width();
  const auto m = static_cast<double>(q_count * k);
  const bool norm = weights.use_norm;
  const RowVec& shift = cache.shift;
  const RowVec& scale = cache.invstd;
  auto pre = [&](Eigen::Index q, int t, Eigen::Index c) {
    return ((cache.u(q, c) + cache.v(g.neighbors(q, t), c)) - shift(c)) * scale(c);
  };

  // Gradient w.r.t. the (normalized) pre-activation is nonzero only at the
  // max-selected neighbor of each (query, channel).
  Mat sparse(q_count, out_w);
  RowVec sum_d = RowVec::Zero(out_w), sum_dx = RowVec::Zero(out_w);
  for (Eigen::Index q = 0; q < q_count; ++q) {
    for (Eigen::Index c = 0; c < out_w; ++c) {
      const double x = pre(q, cache.argmax(q, c), c);
      double dy = grad_out(q, c);
      double y = x;
      if (norm) y = weights.norm.gamma.value(0, c) * x + weights.norm.beta.value(0, c);
      if (weights.use_activation && y < 0.0) dy *= kLeakySlope;
      if (norm) {
        weights.norm.gamma.grad(0, c) += dy * x;
        weights.norm.beta.grad(0, c) += dy;
        dy *= weights.norm.gamma.value(0, c);
        sum_d(c) += dy;
        sum_dx(c) += dy * x;
      } else {
        weights.bias.grad(0, c) += dy;
      }
      sparse(q, c) = dy;
    }
  }
  const RowVec mean_d = sum_d / m;
  const RowVec mean_dx = sum_dx / m;

  // dU[q] = sum_t dZ[q, t]; dV[j] accumulates over every pair with neighbor j.
  Mat du = Mat::Zero(q_count, out_w);
  Mat dv = Mat::Zero(cache.nbr_in.rows(), out_w);
  const bool through_stats = norm && cache.batch_stats;
  {
    const Eigen::Index w = out_w;
    const int kk = k;
    const double* __restrict sh = shift.data();
    const double* __restrict sc = scale.data();
    const double* __restrict md = mean_d.data();
    const double* __restrict mdx = mean_dx.data();
    const RowVec hit_scale = norm ? scale : RowVec::Ones(w);
    const double* __restrict hs = hit_scale.data();
    std::vector<double> dz_buf(static_cast<size_t>(w));
    double* __restrict dz = dz_buf.data();
    for (Eigen::Index q = 0; q < q_count; ++q) {
      const double* __restrict uq = cache.u.row(q).data();
      const double* __restrict sp = sparse.row(q).data();
      const int32_t* __restrict am = cache.argmax.row(q).data();
      double* __restrict duq = du.row(q).data();
      for (int t = 0; t < kk; ++t) {
        const int32_t j = g.neighbors(q, t);
        const double* __restrict vj = cache.v.row(j).data();
        double* __restrict dvj = dv.row(j).data();
        if (through_stats) {
          for (Eigen::Index c = 0; c < w; ++c) {
            const double x = ((uq[c] + vj[c]) - sh[c]) * sc[c];
            const double d = -(md[c] + x * mdx[c]) * sc[c];
            dz[c] = d + static_cast<double>(am[c] == t) * (sp[c] * hs[c]);
          }
        } else {
          for (Eigen::Index c = 0; c < w; ++c) dz[c] = static_cast<double>(am[c] == t) * (sp[c] * hs[c]);
        }
        for (Eigen::Index c = 0; c < w; ++c) {
          duq[c] += dz[c];
          dvj[c] += dz[c];
        }
      }
    }
  }

  const int f = cache.feature_width;
  const Mat dks = cache.self_in.transpose() * du;
  const Mat dkn = cache.nbr_in.transpose() * dv;
  merge_kernel_grad(cache.variant, dks, dkn, f, weights.kernel.grad);

  if (grad_features != nullptr) {
    Mat ks, kn;
    split_kernel(cache.variant, weights.kernel.value, f, ks, kn);
    const Mat d_self = du * ks.transpose();
    const Mat d_nbr = dv * kn.transpose();
    const auto off = cache.variant == ConvVariant::EdgeVertex ? 3 : 0;
    *grad_features = d_nbr.rightCols(f);
    for (Eigen::Index q = 0; q < q_count; ++q) {
      grad_features->row(g.self_rows[static_cast<size_t>(q)]) += d_self.row(q).segment(off, f);
    }
  }
}

Mat neighbor_conv(ConvVariant variant, const Mat& features, const Mat* positions,
                  const NeighborIndex& nbrs, const ConvWeights& weights, Mode mode) {
  if (static_cast<Eigen::Index>(nbrs.rows()) > features.rows()) {
    throw_usage("neighbor_conv: neighbor table has more rows than points");
  }
  return neighbor_conv_forward(variant, features, positions, PairGraph::from_index(nbrs), weights, mode);
}

Mat dense_forward(const Mat& input, const ConvWeights& weights, Mode mode, DenseCache* cache,
                  double dropout, Rng* rng) {
  if (input.cols() != weights.in_width()) {
    throw_usage("dense layer: input width " + std::to_string(input.cols()) + " != kernel width " +
                std::to_string(weights.in_width()));
  }
  if (!input.allFinite()) throw_numeric("dense layer: non-finite input");
  Mat pre = input * weights.kernel.value;
  const bool batch = weights.use_norm && mode == Mode::Train && pre.rows() > 1;
  RowVec invstd;
  if (weights.use_norm) {
    invstd = normalize_rows(pre, weights.norm, batch, cache != nullptr ? &cache->stats : nullptr);
  } else {
    pre.rowwise() += RowVec(weights.bias.value);
  }
  Mat out = pre;
  if (weights.use_norm) {
    out.array().rowwise() *= RowVec(weights.norm.gamma.value).array();
    out.rowwise() += RowVec(weights.norm.beta.value);
  }
  if (weights.use_activation) out = out.unaryExpr([](double y) { return leaky(y); });

  Mat mask;
  if (mode == Mode::Train && dropout > 0.0) {
    if (dropout >= 1.0) throw_usage("dropout probability must be < 1");
    if (rng == nullptr) throw_usage("dropout requires a generator");
    const double keep = 1.0 - dropout;
    mask.resize(out.rows(), out.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < dropout ? 0.0 : 1.0 / keep;
    out.array() *= mask.array();
  }
  if (cache != nullptr) {
    cache->input = input;
    cache->pre = std::move(pre);
    cache->mask = std::move(mask);
    cache->invstd = invstd;
    cache->batch_stats = batch;
  }
  return out;
}

void dense_backward(const DenseCache& cache, const Mat& grad_out, ConvWeights& weights,
                    Mat* grad_input) {
  Mat dy = grad_out;
  if (cache.mask.size() > 0) dy.array() *= cache.mask.array();
  const bool norm = weights.use_norm;
  if (weights.use_activation) {
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      for (Eigen::Index c = 0; c < dy.cols(); ++c) {
        double y = cache.pre(r, c);
        if (norm) y = weights.norm.gamma.value(0, c) * y + weights.norm.beta.value(0, c);
        if (y < 0.0) dy(r, c) *= kLeakySlope;
      }
    }
  }
  Mat dz;
  if (norm) {
    weights.norm.gamma.grad += (dy.array() * cache.pre.array()).colwise().sum().matrix();
    weights.norm.beta.grad += dy.colwise().sum();
    Mat dxhat = dy;
    dxhat.array().rowwise() *= RowVec(weights.norm.gamma.value).array();
    if (cache.batch_stats) {
      const double m = static_cast<double>(dy.rows());
      const RowVec mean_d = dxhat.colwise().sum() / m;
      const RowVec mean_dx = (dxhat.array() * cache.pre.array()).colwise().sum().matrix() / m;
      dz = dxhat;
      dz.rowwise() -= mean_d;
      dz -= (cache.pre.array().rowwise() * mean_dx.array()).matrix();
    } else {
      dz = dxhat;
    }
    dz.array().rowwise() *= cache.invstd.array();
  } else {
    weights.bias.grad += dy.colwise().sum();
    dz = std::move(dy);
  }
  weights.kernel.grad += cache.input.transpose() * dz;
  if (grad_input != nullptr) *grad_input = dz * weights.kernel.value.transpose();
}

Mat global_maxpool(const Mat& features, int segments, IndexMat* argmax) {
  if (features.rows() == 0) throw_usage("global_maxpool: empty input");
  if (segments < 1 || features.rows() % segments != 0) {
    throw_usage("global_maxpool: rows not divisible into segments");
  }
  const auto per = features.rows() / segments;
  Mat out(segments, features.cols());
  if (argmax != nullptr) argmax->resize(segments, features.cols());
  for (int s = 0; s < segments; ++s) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      Eigen::Index best = s * per;
      for (Eigen::Index r = s * per + 1; r < (s + 1) * per; ++r) {
        if (features(r, c) > features(best, c)) best = r;
      }
      out(s, c) = features(best, c);
      if (argmax != nullptr) (*argmax)(s, c) = static_cast<int32_t>(best);
    }
  }
  return out;
}

Mat global_maxpool_backward(const Mat& grad_out, const IndexMat& argmax, Eigen::Index rows) {
  Mat grad = Mat::Zero(rows, grad_out.cols());
  for (Eigen::Index s = 0; s < grad_out.rows(); ++s) {
    for (Eigen::Index c = 0; c < grad_out.cols(); ++c) grad(argmax(s, c), c) += grad_out(s, c);
  }
  return grad;
}

std::vector<std::pair<std::string, Parameter*>> HeadWeights::parameters(const std::string& prefix) {
  auto out = hidden1.parameters(prefix + ".hidden1");
  for (auto& p : hidden2.parameters(prefix + ".hidden2")) out.push_back(p);
  for (auto& p : output.parameters(prefix + ".output")) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, Mat*>> HeadWeights::buffers(const std::string& prefix) {
  auto out = hidden1.buffers(prefix + ".hidden1");
  for (auto& b : hidden2.buffers(prefix + ".hidden2")) out.push_back(b);
  return out;
}

HeadWeights make_head_weights(int in, int hidden1, int hidden2, int classes, Rng& rng) {
  if (classes < 2) throw_usage("classifier head needs at least 2 classes");
  HeadWeights h;
  h.hidden1 = make_conv_weights(in, hidden1, rng);
  h.hidden2 = make_conv_weights(hidden1, hidden2, rng);
  h.output = make_conv_weights(hidden2, classes, rng, false, false);
  return h;
}

Mat classifier_head(const Mat& global_features, const HeadWeights& head, Mode mode, double dropout,
                    Rng& rng, HeadCache* cache) {
  const Mat h1 = dense_forward(global_features, head.hidden1, mode, cache ? &cache->stage1 : nullptr, dropout, &rng);
  const Mat h2 = dense_forward(h1, head.hidden2, mode, cache ? &cache->stage2 : nullptr, dropout, &rng);
  return dense_forward(h2, head.output, mode, cache ? &cache->output : nullptr);
}

void classifier_head_backward(const HeadCache& cache, const Mat& grad_logits, HeadWeights& head,
                              Mat* grad_input) {
  Mat d2, d1;
  dense_backward(cache.output, grad_logits, head.output, &d2);
  dense_backward(cache.stage2, d2, head.hidden2, &d1);
  dense_backward(cache.stage1, d1, head.hidden1, grad_input);
}

}  // namespace ppc
