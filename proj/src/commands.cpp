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

#include "ppc/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ppc/checkpoint.hpp"
#include "ppc/error.hpp"
#include "ppc/neighbors.hpp"
#include "ppc/parallel.hpp"

namespace ppc {
namespace fs = std::filesystem;

namespace {

/// Prefixes errors raised inside `fn` with the module that raised them.
template <class F>
auto in_module(const char* module, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string(module) + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << text;
  if (!out) throw_data("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void prepare_output(const RunConfig& c) {
  set_num_threads(c.threads);
  std::error_code ec;
  fs::create_directories(c.output_dir, ec);
  if (ec) throw_data("cannot create output directory " + c.output_dir + ": " + ec.message());
}

std::string history_csv(const TrainHistory& h) {
  std::ostringstream ss;
  h.write_csv(ss);
  return ss.str();
}

std::string checkpoint_name(int epoch) {
  std::ostringstream ss;
  ss << "checkpoint_e" << std::setw(4) << std::setfill('0') << epoch << ".ppck";
  return ss.str();
}

/// Earlier epochs of an interrupted run, read back from its history CSV.
TrainHistory previous_history(const fs::path& csv, int before_epoch) {
  TrainHistory h;
  if (!fs::exists(csv)) return h;
  std::istringstream in(read_text(csv));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochRecord r;
    char comma;
    std::istringstream ls(line);
    if (!(ls >> r.epoch >> comma >> r.loss >> comma >> r.train_acc >> comma >> r.lr)) {
      throw_data("resume: malformed history line '" + line + "'");
    }
    if (r.epoch < before_epoch) h.epochs.push_back(r);
  }
  if (static_cast<int>(h.epochs.size()) != before_epoch) {
    throw_data("resume: history.csv does not cover the checkpoint's " + std::to_string(before_epoch) + " epochs");
  }
  return h;
}

std::string report_summary(const EvalReport& r) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << r.task << ' ' << (r.variant.empty() ? "-" : r.variant)
     << ": macro_f1 " << r.macro_f1 << ", accuracy " << r.accuracy;
  if (r.average_precision) ss << ", ap " << *r.average_precision;
  if (r.agreement) ss << ", coverage " << r.agreement->coverage << ", precision " << r.agreement->precision;
  return ss.str();
}

void write_reports(const fs::path& dir, const std::string& stem, const std::vector<EvalReport>& reports) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  write_text(dir / (stem + ".json"), arr.dump(2) + "\n");
  std::ostringstream csv;
  write_report_csv(reports, csv);
  write_text(dir / (stem + ".csv"), csv.str());
}

int64_t mtime_of(const fs::path& p) {
  return static_cast<int64_t>(fs::last_write_time(p).time_since_epoch().count());
}

bool is_mesh_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  return ext == ".ply" || ext == ".obj";
}

}  // namespace

SampleSummary cmd_sample(const SampleArgs& args, std::ostream& log) {
  if (args.n_points == 0) throw_usage("sample: n_points must be positive");
  if (!fs::is_directory(args.mesh_dir)) throw_data("sample: not a directory: " + args.mesh_dir.string());
  std::vector<fs::path> meshes;
  for (const auto& e : fs::directory_iterator(args.mesh_dir)) {
    if (e.is_regular_file() && is_mesh_file(e.path())) meshes.push_back(e.path());
  }
  std::sort(meshes.begin(), meshes.end());
  SampleSummary s;
  if (meshes.empty()) {
    log << "warning: no .ply or .obj meshes in " << args.mesh_dir.string() << "\n";
    return s;
  }
  fs::create_directories(args.out_dir);
  SourceOptions so;
  so.n_points = args.n_points;
  so.seed = args.seed;
  so.normalize.scale = args.normalize_scale;
  const CloudSource naming(so);
  for (const auto& mesh_path : meshes) {
    const std::string id = mesh_path.stem().string();
    const fs::path cloud_path = args.out_dir / (id + ".ppc");
    const fs::path side_path = args.out_dir / (id + ".json");
    try {
      CloudProvenance prov;
      prov.source = fs::absolute(mesh_path).lexically_normal().string();
      prov.seed = naming.sample_seed(id);
      prov.n_points = args.n_points;
      prov.centered = true;
      prov.scaled = args.normalize_scale;
      prov.source_size = fs::file_size(mesh_path);
      prov.source_mtime = mtime_of(mesh_path);
      if (fs::exists(cloud_path) && fs::exists(side_path)) {
        try {
          const auto old = provenance_from_json(nlohmann::json::parse(read_text(side_path)));
          if (to_json(old) == to_json(prov)) {
            ++s.skipped;
            continue;
          }
        } catch (const std::exception&) {
          // unreadable sidecar: resample
        }
      }
      const Mesh mesh = load_mesh(mesh_path);
      Rng rng(prov.seed);
      NormalizeOptions no;
      no.scale = args.normalize_scale;
      const PointCloud pc = round_to_float(normalize(sample_surface(mesh, args.n_points, rng), no));
      write_cloud(pc, cloud_path);
      write_text(side_path, to_json(prov).dump(2) + "\n");
      ++s.written;
    } catch (const std::exception& e) {
      s.errors.push_back(mesh_path.filename().string() + ": " + e.what());
    }
  }
  log << "sampled " << s.written << ", up to date " << s.skipped << ", failed " << s.errors.size() << "\n";
  if (!s.errors.empty()) {
    std::string msg = "sample: " + std::to_string(s.errors.size()) + " mesh(es) failed:";
    for (const auto& e : s.errors) msg += "\n  " + e;
    throw_data(msg);
  }
  return s;
}

TrainHistory cmd_train(const RunConfig& c, std::ostream& log, const fs::path& resume) {
  c.validate();
  prepare_output(c);
  const fs::path out = c.output_dir;
  write_text(out / "config.json", cmd_spec_echo(c));
  TaskDataset data = in_module("tasks-data", [&] { return build_dataset(c); });
  {
    nlohmann::ordered_json split;
    split["task"] = std::string(to_string(data.task));
    split["class_names"] = data.class_names;
    split["class_counts"] = data.class_counts;
    split["train"] = data.tablet_ids(data.train);
    split["test"] = data.tablet_ids(data.test);
    write_text(out / "split.json", split.dump(2) + "\n");
  }
  log << "task " << to_string(data.task) << ": " << data.train.size() << " train / " << data.test.size()
      << " test instances\n";
  CloudSource clouds(source_options(c));

  Model model;
  TrainState state;
  TrainHistory history;
  if (!resume.empty()) {
    Checkpoint ck = in_module("checkpoint", [&] { return load_checkpoint(resume); });
    if (!(ck.model.spec == c.network)) throw_usage("resume: checkpoint network differs from the config");
    if (ck.seed != c.seed) throw_usage("resume: checkpoint seed differs from the config");
    model = std::move(ck.model);
    state.optimizer = std::move(ck.optimizer);
    state.next_epoch = ck.next_epoch;
    history = previous_history(out / "history.csv", state.next_epoch);
    log << "resuming at epoch " << state.next_epoch << "\n";
  } else {
    model = in_module("pyramid-net", [&] { return initial_model(c.network, c.seed); });
  }
  log << "parameters: " << model.parameter_count() << "\n";

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r, Model& m, const TrainState& st) {
    history.epochs.push_back(r);
    log << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.loss << " acc " << r.train_acc << " lr "
        << r.lr << " (" << std::setprecision(3) << r.seconds << " s)\n";
    write_text(out / "history.csv", history_csv(history));
    const int done = r.epoch + 1;
    if (c.training.checkpoint_every > 0 && done % c.training.checkpoint_every == 0 && done < c.training.epochs) {
      save_checkpoint(out / checkpoint_name(done), m, &st, c.seed);
    }
  };
  in_module("training", [&] {
    train(model, data, clouds, c.training, state, hooks);
    return 0;
  });
  write_text(out / "history.csv", history_csv(history));
  save_checkpoint(out / "checkpoint.ppck", model, &state, c.seed);
  log << "wrote " << (out / "checkpoint.ppck").string() << "\n";
  return history;
}

EvalReport cmd_eval(const RunConfig& c, const fs::path& checkpoint, const std::string& split, std::ostream& log) {
  c.validate();
  if (split != "test" && split != "train") throw_usage("eval: split must be 'test' or 'train'");
  Checkpoint ck = in_module("checkpoint", [&] { return load_checkpoint(checkpoint); });
  if (ck.model.spec.num_classes != c.network.num_classes) {
    throw_usage("eval: checkpoint has " + std::to_string(ck.model.spec.num_classes) + " classes, config has " +
                std::to_string(c.network.num_classes));
  }
  if (!(ck.model.spec == c.network)) throw_usage("eval: checkpoint network differs from the config");
  prepare_output(c);
  const TaskDataset data = in_module("tasks-data", [&] { return build_dataset(c); });
  CloudSource clouds(source_options(c));
  EvalReport r = in_module("eval-harness", [&] {
    return evaluate(ck.model, data, split == "test" ? data.test : data.train, clouds, c.seed);
  });
  r.variant = split;
  const fs::path out = c.output_dir;
  write_text(out / "eval.json", to_json(r).dump(2) + "\n");
  std::ostringstream csv, preds;
  write_report_csv(std::span<const EvalReport>(&r, 1), csv);
  write_text(out / "eval.csv", csv.str());
  write_predictions_csv(r, preds);
  write_text(out / "predictions.csv", preds.str());
  log << report_summary(r) << "\n";
  return r;
}

std::vector<EvalReport> cmd_ablate(const RunConfig& c, std::ostream& log) {
  c.validate();
  prepare_output(c);
  const fs::path out = c.output_dir;
  fs::create_directories(out / "ablation");
  const TaskDataset data = in_module("tasks-data", [&] { return build_dataset(c); });
  CloudSource clouds(source_options(c));
  std::vector<EvalReport> reports;
  for (Omission o : kAllOmissions) {
    RunConfig variant = c;
    variant.network = apply_omission(c.network, o);
    write_text(out / "ablation" / ("config_" + std::string(to_string(o)) + ".json"), cmd_spec_echo(variant));
    reports.push_back(in_module("eval-harness", [&] { return ablation_run(c.network, o, data, clouds, c.training); }));
    log << report_summary(reports.back()) << "\n";
    write_reports(out, "ablation", reports);
  }
  return reports;
}

std::vector<EvalReport> cmd_sweep(const RunConfig& c, std::ostream& log) {
  c.validate();
  if (c.sweep_sizes.empty()) throw_usage("sweep: sweep_sizes is empty");
  const int largest = *std::max_element(c.sweep_sizes.begin(), c.sweep_sizes.end());
  if (c.task.sample_points < largest) {
    throw_usage("sweep: task.sample_points must be >= the largest sweep size (" + std::to_string(largest) + ")");
  }
  prepare_output(c);
  const fs::path out = c.output_dir;
  fs::create_directories(out / "sweep");
  for (int n : c.sweep_sizes) {
    RunConfig variant = c;
    variant.network = c.network.scaled_to(n);
    write_text(out / "sweep" / ("config_" + std::to_string(n) + ".json"), cmd_spec_echo(variant));
  }
  const TaskDataset data = in_module("tasks-data", [&] { return build_dataset(c); });
  CloudSource clouds(source_options(c));
  auto reports = in_module("eval-harness", [&] {
    return point_sweep(c.network, c.sweep_sizes, data, clouds, c.training);
  });
  for (const auto& r : reports) log << report_summary(r) << "\n";
  write_reports(out, "sweep", reports);
  return reports;
}

OrientResult cmd_orient(const fs::path& checkpoint, const fs::path& mesh_path, uint64_t seed,
                        const fs::path& dump_neighbors, std::ostream& log) {
  Checkpoint ck = in_module("checkpoint", [&] { return load_checkpoint(checkpoint); });
  if (ck.model.spec.num_classes != 2) throw_usage("orient: checkpoint is not a two-class (front/back) model");
  auto mesh = std::make_shared<const Mesh>(in_module("pointcloud-core", [&] { return load_mesh(mesh_path); }));
  SourceOptions so;
  so.n_points = static_cast<size_t>(ck.model.spec.input_points);
  so.seed = seed;
  CloudSource clouds(so);
  Instance a;
  a.tablet_id = mesh_path.stem().string();
  a.mesh = mesh;
  Instance b = a;
  b.flipped = true;
  OrientResult r;
  r.logits_a = predict_instance(ck.model, a, clouds, seed).row(0);
  r.logits_b = predict_instance(ck.model, b, clouds, seed).row(0);
  const auto e = agreement_predict(r.logits_a, r.logits_b);
  r.verdict = !e ? "abstain" : (*e == kFront ? "front" : "back");
  if (!dump_neighbors.empty()) {
    const PointCloud pc = clouds.get(a);
    const auto& L = ck.model.spec.layers.front();
    const NeighborIndex idx = knn_spatial(pc.positions, L.neighbors, ck.model.spec.dilation(0));
    std::ofstream out(dump_neighbors);
    if (!out) throw_data("orient: cannot write " + dump_neighbors.string());
    write_neighbors_csv(out, idx, pc.positions);
  }
  log << std::setprecision(6) << "view A logits [" << r.logits_a(0) << ", " << r.logits_a(1) << "], view B logits ["
      << r.logits_b(0) << ", " << r.logits_b(1) << "]\n";
  return r;
}

void cmd_synth(const RunConfig& c, const fs::path& out_dir, std::ostream& log) {
  RunConfig sc = c;
  sc.task.source = "synth";
  const TaskDataset data = in_module("tasks-data", [&] { return build_dataset(sc); });
  write_synth_corpus(data, out_dir);
  log << "wrote " << data.instances.size() << " instances (" << data.train.size() << " train, " << data.test.size()
      << " test) to " << out_dir.string() << "\n";
}

std::string cmd_spec_echo(const RunConfig& c) { return to_json(c).dump(2) + "\n"; }

std::vector<fs::path> cmd_plot(const fs::path& report, const fs::path& out_dir, std::ostream& log) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(report));
  } catch (const nlohmann::json::parse_error& e) {
    throw_data("plot: " + report.string() + " is not JSON: " + e.what());
  }
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  const std::string stem = report.stem().string();
  try {
    std::vector<nlohmann::json> items;
    if (j.is_array()) items.assign(j.begin(), j.end());
    else items.push_back(j);
    if (items.size() > 1) {
      std::vector<EvalReport> rows;
      for (const auto& it : items) {
        EvalReport r;
        r.variant = it.at("variant").get<std::string>();
        r.macro_f1 = it.at("macro_f1").get<double>();
        rows.push_back(r);
      }
      const auto path = out_dir / (stem + "_macro_f1.svg");
      write_text(path, bar_chart_svg(rows, stem + ": macro-F1"));
      written.push_back(path);
    }
    for (size_t i = 0; i < items.size(); ++i) {
      const auto& it = items[i];
      const auto& preds = it.at("predictions");
      if (preds.empty() || preds.front().at("probabilities").size() != 2) continue;
      std::vector<double> scores;
      std::vector<int> truth;
      for (const auto& p : preds) {
        scores.push_back(p.at("probabilities").at(1).get<double>());
        truth.push_back(p.at("truth").get<int>());
      }
      if (std::count(truth.begin(), truth.end(), 1) == 0) continue;
      const std::string tag = items.size() > 1 ? "_" + it.at("variant").get<std::string>() : "";
      const auto path = out_dir / (stem + tag + "_pr.svg");
      write_text(path, pr_curve_svg(scores, truth, it.at("task").get<std::string>() + tag));
      written.push_back(path);
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data("plot: " + report.string() + " is not an evaluation report: " + e.what());
  }
  for (const auto& p : written) log << "wrote " << p.string() << "\n";
  if (written.empty()) log << "warning: nothing to plot in " << report.string() << "\n";
  return written;
}

}  // namespace ppc
