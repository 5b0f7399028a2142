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

#include "ppc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "ppc/error.hpp"

namespace ppc {
namespace {

void check_labels(std::span<const int> preds, std::span<const int> truth, int classes) {
  if (preds.size() != truth.size()) throw_usage("metrics: prediction and truth lengths differ");
  if (preds.empty()) throw_usage("metrics: empty input");
  if (classes < 1) throw_usage("metrics: class count must be >= 1");
  for (size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] < 0 || preds[i] >= classes || truth[i] < 0 || truth[i] >= classes) {
      throw_usage("metrics: label outside [0, " + std::to_string(classes) + ")");
    }
  }
}

RowVec softmax(const RowVec& z) {
  const double m = z.maxCoeff();
  RowVec e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

int argmax(const RowVec& z) {
  Eigen::Index i;
  z.maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

std::vector<std::vector<int>> confusion_matrix(std::span<const int> preds, std::span<const int> truth,
                                               int classes) {
  check_labels(preds, truth, classes);
  std::vector<std::vector<int>> m(static_cast<size_t>(classes), std::vector<int>(static_cast<size_t>(classes), 0));
  for (size_t i = 0; i < preds.size(); ++i) ++m[static_cast<size_t>(truth[i])][static_cast<size_t>(preds[i])];
  return m;
}

std::vector<ClassMetrics> per_class_metrics(std::span<const int> preds, std::span<const int> truth,
                                            int classes) {
  const auto cm = confusion_matrix(preds, truth, classes);
  std::vector<ClassMetrics> out(static_cast<size_t>(classes));
  for (size_t c = 0; c < out.size(); ++c) {
    int tp = cm[c][c], predicted = 0, actual = 0;
    for (size_t o = 0; o < out.size(); ++o) {
      predicted += cm[o][c];
      actual += cm[c][o];
    }
    auto& m = out[c];
    m.support = actual;
    m.precision = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
    m.recall = actual > 0 ? static_cast<double>(tp) / actual : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  return out;
}

double f1_macro(std::span<const int> preds, std::span<const int> truth, int classes) {
  const auto pc = per_class_metrics(preds, truth, classes);
  double sum = 0.0;
  for (const auto& m : pc) sum += m.f1;
  return sum / static_cast<double>(classes);
}

double accuracy(std::span<const int> preds, std::span<const int> truth) {
  if (preds.size() != truth.size()) throw_usage("accuracy: prediction and truth lengths differ");
  if (preds.empty()) throw_usage("accuracy: empty input");
  size_t hit = 0;
  for (size_t i = 0; i < preds.size(); ++i) hit += preds[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

double average_precision(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size()) throw_usage("average_precision: score and truth lengths differ");
  size_t positives = 0;
  for (int t : truth) {
    if (t != 0 && t != 1) throw_usage("average_precision: truth must be binary");
    positives += static_cast<size_t>(t);
  }
  if (positives == 0) throw_usage("average_precision: no positive instances");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0, prev_recall = 0.0;
  size_t tp = 0, seen = 0;
  for (size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      tp += static_cast<size_t>(truth[order[i]]);
      ++seen;
      ++i;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

std::optional<int> agreement_predict(const RowVec& logits_a, const RowVec& logits_b) {
  if (logits_a.size() != 2 || logits_b.size() != 2) throw_usage("agreement_predict: expects 1x2 logits");
  const int a = argmax(logits_a), b = argmax(logits_b);
  if (b == 1 - a) return a;
  return std::nullopt;
}

Mat predict_instance(const Model& model, const Instance& inst, CloudSource& clouds, uint64_t seed) {
  const PointCloud pc = clouds.get(inst);
  Rng rng(splitmix64(seed ^ fnv1a(inst.tablet_id)));
  ForwardOptions opts;
  opts.mode = Mode::Eval;
  return forward(model, std::span<const PointCloud>(&pc, 1), opts, rng);
}

EvalReport evaluate(const Model& model, const TaskDataset& data, std::span<const size_t> split,
                    CloudSource& clouds, uint64_t seed) {
  if (split.empty()) throw_data("evaluate: split is empty");
  if (model.spec.num_classes != data.num_classes) {
    throw_usage("evaluate: model has " + std::to_string(model.spec.num_classes) + " classes, dataset has " +
                std::to_string(data.num_classes));
  }
  EvalReport r;
  r.task = std::string(to_string(data.task));
  r.seed = seed;
  r.class_names = data.class_names;
  r.network = to_json(model.spec);
  std::vector<int> preds, truth;
  std::vector<double> pos_scores;
  std::map<std::string, std::pair<std::optional<RowVec>, std::optional<RowVec>>> views;
  for (size_t idx : split) {
    const auto& inst = data.instances.at(idx);
    const Mat logits = predict_instance(model, inst, clouds, seed);
    const RowVec z = logits.row(0);
    const RowVec p = softmax(z);
    InstancePrediction ip;
    ip.tablet_id = inst.tablet_id;
    ip.flipped = inst.flipped;
    ip.truth = inst.label;
    ip.pred = argmax(z);
    ip.probabilities.assign(p.data(), p.data() + p.size());
    preds.push_back(ip.pred);
    truth.push_back(ip.truth);
    if (data.num_classes == 2) pos_scores.push_back(p(1));
    r.predictions.push_back(std::move(ip));
    if (data.task == TaskKind::Front) (inst.flipped ? views[inst.tablet_id].second : views[inst.tablet_id].first) = z;
  }
  r.confusion = confusion_matrix(preds, truth, data.num_classes);
  r.per_class = per_class_metrics(preds, truth, data.num_classes);
  r.macro_f1 = f1_macro(preds, truth, data.num_classes);
  r.accuracy = accuracy(preds, truth);
  if (data.num_classes == 2 && std::count(truth.begin(), truth.end(), 1) > 0) {
    r.average_precision = average_precision(pos_scores, truth);
  }
  if (data.task == TaskKind::Front) {
    AgreementStats st;
    for (const auto& [id, v] : views) {
      if (!v.first || !v.second) continue;
      ++st.tablets;
      if (auto e = agreement_predict(*v.first, *v.second)) {
        ++st.emitted;
        st.correct += *e == kFront;
      }
    }
    if (st.tablets > 0) st.coverage = static_cast<double>(st.emitted) / static_cast<double>(st.tablets);
    if (st.emitted > 0) st.precision = static_cast<double>(st.correct) / static_cast<double>(st.emitted);
    r.agreement = st;
  }
  return r;
}

EvalReport ablation_run(const NetworkSpec& base, Omission omit, const TaskDataset& data,
                        CloudSource& clouds, const TrainParams& params) {
  const NetworkSpec spec = apply_omission(base, omit);
  Model model = initial_model(spec, params.seed);
  const auto hist = train(model, data, clouds, params);
  EvalReport r = evaluate(model, data, data.test, clouds, params.seed);
  r.variant = std::string(to_string(omit));
  if (!hist.epochs.empty()) r.final_train_acc = hist.epochs.back().train_acc;
  return r;
}

std::vector<EvalReport> point_sweep(const NetworkSpec& base, std::span<const int> sizes,
                                    const TaskDataset& data, CloudSource& clouds,
                                    const TrainParams& params) {
  std::vector<NetworkSpec> specs;
  for (int n : sizes) specs.push_back(base.scaled_to(n));  // reject bad sizes before training
  std::vector<EvalReport> out;
  for (size_t i = 0; i < specs.size(); ++i) {
    Model model = initial_model(specs[i], params.seed);
    const auto hist = train(model, data, clouds, params);
    EvalReport r = evaluate(model, data, data.test, clouds, params.seed);
    r.variant = "points=" + std::to_string(sizes[i]);
    if (!hist.epochs.empty()) r.final_train_acc = hist.epochs.back().train_acc;
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["task"] = r.task;
  j["variant"] = r.variant;
  j["seed"] = r.seed;
  j["macro_f1"] = r.macro_f1;
  j["accuracy"] = r.accuracy;
  j["average_precision"] = r.average_precision ? nlohmann::ordered_json(*r.average_precision) : nullptr;
  if (r.agreement) {
    j["agreement"] = {{"tablets", r.agreement->tablets},   {"emitted", r.agreement->emitted},
                      {"correct", r.agreement->correct},   {"coverage", r.agreement->coverage},
                      {"precision", r.agreement->precision}};
  }
  if (r.final_train_acc >= 0.0) j["final_train_acc"] = r.final_train_acc;
  auto& pc = j["per_class"] = nlohmann::ordered_json::array();
  for (size_t c = 0; c < r.per_class.size(); ++c) {
    pc.push_back({{"class", c < r.class_names.size() ? r.class_names[c] : std::to_string(c)},
                  {"precision", r.per_class[c].precision},
                  {"recall", r.per_class[c].recall},
                  {"f1", r.per_class[c].f1},
                  {"support", r.per_class[c].support}});
  }
  j["confusion"] = r.confusion;
  auto& preds = j["predictions"] = nlohmann::ordered_json::array();
  for (const auto& p : r.predictions) {
    preds.push_back({{"tablet_id", p.tablet_id},
                     {"flipped", p.flipped},
                     {"truth", p.truth},
                     {"pred", p.pred},
                     {"probabilities", p.probabilities}});
  }
  j["network"] = r.network;
  return j;
}

void write_report_csv(std::span<const EvalReport> reports, std::ostream& out) {
  out << "task,variant,seed,macro_f1,ap,accuracy,coverage,precision\n" << std::setprecision(17);
  for (const auto& r : reports) {
    out << r.task << ',' << r.variant << ',' << r.seed << ',' << r.macro_f1 << ',';
    if (r.average_precision) out << *r.average_precision;
    out << ',' << r.accuracy << ',';
    if (r.agreement) out << r.agreement->coverage << ',' << r.agreement->precision;
    else out << ',';
    out << '\n';
  }
}

void write_predictions_csv(const EvalReport& r, std::ostream& out) {
  out << "tablet_id,flipped,truth,pred";
  for (size_t c = 0; c < r.class_names.size(); ++c) out << ",p_" << c;
  out << '\n' << std::setprecision(17);
  for (const auto& p : r.predictions) {
    out << p.tablet_id << ',' << (p.flipped ? 1 : 0) << ',' << p.truth << ',' << p.pred;
    for (double v : p.probabilities) out << ',' << v;
    out << '\n';
  }
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr double kW = 480, kH = 360, kM = 50;

void axes(std::ostringstream& s, const std::string& title, const std::string& xl, const std::string& yl) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\">" << xml_escape(title) << "</text>\n";
  s << "<line x1=\"" << kM << "\" y1=\"" << kH - kM << "\" x2=\"" << kW - kM << "\" y2=\"" << kH - kM
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << kM << "\" y1=\"" << kM << "\" x2=\"" << kM << "\" y2=\"" << kH - kM << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">" << xl << "</text>\n";
  s << "<text x=\"15\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 15 " << kH / 2
    << ")\" text-anchor=\"middle\">" << yl << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double y = kH - kM - t * (kH - 2 * kM) / 4;
    s << "<text x=\"" << kM - 5 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << t * 0.25 << "</text>\n";
  }
}

}  // namespace

std::string pr_curve_svg(std::span<const double> scores, std::span<const int> truth, const std::string& title) {
  const double ap = average_precision(scores, truth);
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  const auto positives = static_cast<double>(std::count(truth.begin(), truth.end(), 1));
  std::ostringstream s;
  s << std::setprecision(6);
  axes(s, title + " (AP " + std::to_string(ap).substr(0, 5) + ")", "recall", "precision");
  auto px = [](double r) { return kM + r * (kW - 2 * kM); };
  auto py = [](double p) { return kH - kM - p * (kH - 2 * kM); };
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  double tp = 0, seen = 0, prev_r = 0;
  double prev_p = 1.0;
  s << px(0) << ',' << py(prev_p);
  for (size_t i = 0; i < order.size();) {
    const double sc = scores[order[i]];
    while (i < order.size() && scores[order[i]] == sc) {
      tp += truth[order[i]];
      ++seen;
      ++i;
    }
    const double r = tp / positives, p = tp / seen;
    s << ' ' << px(prev_r) << ',' << py(p) << ' ' << px(r) << ',' << py(p);
    prev_r = r;
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

std::string bar_chart_svg(std::span<const EvalReport> reports, const std::string& title) {
  std::ostringstream s;
  s << std::setprecision(6);
  axes(s, title, "variant", "macro-F1");
  const double slot = reports.empty() ? 0 : (kW - 2 * kM) / static_cast<double>(reports.size());
  for (size_t i = 0; i < reports.size(); ++i) {
    const double h = reports[i].macro_f1 * (kH - 2 * kM);
    const double x = kM + i * slot + 0.15 * slot;
    s << "<rect x=\"" << x << "\" y=\"" << kH - kM - h << "\" width=\"" << 0.7 * slot << "\" height=\"" << h
      << "\" fill=\"steelblue\"/>\n";
    s << "<text x=\"" << x + 0.35 * slot << "\" y=\"" << kH - kM + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
      << xml_escape(reports[i].variant) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace ppc
