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

#include "ppc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ppc/error.hpp"
#include "ppc/json_util.hpp"

namespace ppc {

int task_classes(TaskKind t) { return t == TaskKind::Period ? 4 : 2; }

void RunConfig::validate() const {
  network.validate();
  training.validate();
  auto fail = [](const std::string& what) { throw_usage("config: " + what); };
  if (training.seed != seed) fail("training seed differs from the run seed");
  if (network.num_classes != task_classes(task.kind)) {
    fail("network.num_classes = " + std::to_string(network.num_classes) + " but task '" +
         std::string(to_string(task.kind)) + "' has " + std::to_string(task_classes(task.kind)) + " classes");
  }
  if (task.source != "synth" && task.source != "manifest") fail("task.source must be 'synth' or 'manifest'");
  if (task.source == "manifest" && task.manifest.empty()) fail("task.manifest is required for source 'manifest'");
  if (task.sample_points < network.input_points) {
    fail("task.sample_points (" + std::to_string(task.sample_points) + ") is below network.input_points (" +
         std::to_string(network.input_points) + ")");
  }
  if (task.synth_per_class < 1) fail("task.synth_per_class must be >= 1");
  if (task.test_fraction < 0.0 || task.test_fraction >= 1.0) fail("task.test_fraction must be in [0, 1)");
  const auto& s = task.synth;
  if (s.grid < 4) fail("task.synth.grid must be >= 4");
  if (s.min_wedges < 0 || s.max_wedges < s.min_wedges) fail("task.synth wedge range is invalid");
  if (s.min_depth < 0.0 || s.max_depth < s.min_depth) fail("task.synth depth range is invalid");
  if (s.test_fraction < 0.0 || s.test_fraction >= 1.0) fail("task.synth.test_fraction must be in [0, 1)");
  if (threads < 0) fail("threads must be >= 0");
  for (int n : sweep_sizes) network.scaled_to(n);
}

namespace {

nlohmann::ordered_json synth_json(const SynthOptions& s) {
  nlohmann::ordered_json j;
  j["grid"] = s.grid;
  j["min_wedges"] = s.min_wedges;
  j["max_wedges"] = s.max_wedges;
  j["min_depth"] = s.min_depth;
  j["max_depth"] = s.max_depth;
  j["test_fraction"] = s.test_fraction;
  return j;
}

SynthOptions synth_from_json(const nlohmann::json& j) {
  const std::string ctx = "task.synth";
  check_keys(j, {"grid", "min_wedges", "max_wedges", "min_depth", "max_depth", "test_fraction"}, ctx);
  SynthOptions s;
  get_if(j, "grid", s.grid, ctx);
  get_if(j, "min_wedges", s.min_wedges, ctx);
  get_if(j, "max_wedges", s.max_wedges, ctx);
  get_if(j, "min_depth", s.min_depth, ctx);
  get_if(j, "max_depth", s.max_depth, ctx);
  get_if(j, "test_fraction", s.test_fraction, ctx);
  return s;
}

}  // namespace

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["network"] = to_json(c.network);
  auto tr = to_json(c.training);
  tr.erase("seed");
  j["training"] = tr;
  nlohmann::ordered_json t;
  t["kind"] = std::string(to_string(c.task.kind));
  t["source"] = c.task.source;
  t["manifest"] = c.task.manifest;
  t["size_variant"] = std::string(to_string(c.task.size_variant));
  t["test_fraction"] = c.task.test_fraction;
  t["synth_per_class"] = c.task.synth_per_class;
  t["synth"] = synth_json(c.task.synth);
  t["sample_points"] = c.task.sample_points;
  t["normalize_scale"] = c.task.normalize_scale;
  t["cache_dir"] = c.task.cache_dir;
  j["task"] = t;
  j["sweep_sizes"] = c.sweep_sizes;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  check_keys(j, {"seed", "threads", "output_dir", "network", "training", "task", "sweep_sizes"}, "config");
  RunConfig c;
  get_if(j, "seed", c.seed, "config");
  get_if(j, "threads", c.threads, "config");
  get_if(j, "output_dir", c.output_dir, "config");
  get_if(j, "sweep_sizes", c.sweep_sizes, "config");
  if (j.contains("network")) c.network = network_spec_from_json(j.at("network"));
  if (j.contains("training")) {
    const auto& tj = j.at("training");
    if (tj.is_object() && tj.contains("seed")) throw_usage("training: set the seed at the top level");
    c.training = train_params_from_json(tj);
  }
  if (j.contains("task")) {
    const auto& tj = j.at("task");
    const std::string ctx = "task";
    check_keys(tj, {"kind", "source", "manifest", "size_variant", "test_fraction", "synth_per_class", "synth",
                    "sample_points", "normalize_scale", "cache_dir"},
               ctx);
    std::string kind = std::string(to_string(c.task.kind));
    get_if(tj, "kind", kind, ctx);
    c.task.kind = parse_task(kind);
    std::string variant = std::string(to_string(c.task.size_variant));
    get_if(tj, "size_variant", variant, ctx);
    c.task.size_variant = parse_size_variant(variant);
    get_if(tj, "source", c.task.source, ctx);
    get_if(tj, "manifest", c.task.manifest, ctx);
    get_if(tj, "test_fraction", c.task.test_fraction, ctx);
    get_if(tj, "synth_per_class", c.task.synth_per_class, ctx);
    if (tj.contains("synth")) c.task.synth = synth_from_json(tj.at("synth"));
    get_if(tj, "sample_points", c.task.sample_points, ctx);
    get_if(tj, "normalize_scale", c.task.normalize_scale, ctx);
    get_if(tj, "cache_dir", c.task.cache_dir, ctx);
  }
  c.training.seed = c.seed;
  c.validate();
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw_usage("config: invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return run_config_from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_usage("config: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

TaskDataset build_dataset(const RunConfig& c) {
  if (c.task.source == "synth") {
    Rng rng = Rng(c.seed).derive({0x5e17});
    return synth_generate(c.task.kind, c.task.synth_per_class, rng, c.task.synth);
  }
  const Manifest m = Manifest::load(c.task.manifest);
  DatasetOptions opts;
  opts.seed = c.seed;
  opts.test_fraction = c.task.test_fraction;
  switch (c.task.kind) {
    case TaskKind::Period: return build_period_dataset(m, c.task.size_variant, opts);
    case TaskKind::Seal:
    case TaskKind::LeftSign: return build_binary_dataset(m, c.task.kind, opts);
    case TaskKind::Front: {
      Rng rng = Rng(c.seed).derive({0xf407});
      return build_front_dataset(m, rng, c.task.test_fraction);
    }
  }
  throw_usage("unknown task");
}

SourceOptions source_options(const RunConfig& c) {
  SourceOptions s;
  s.n_points = static_cast<size_t>(c.task.sample_points);
  s.normalize.scale = c.task.normalize_scale;
  s.seed = c.seed;
  s.cache_dir = c.task.cache_dir;
  if (const char* env = std::getenv("PPC_CACHE_DIR"); env && *env) s.cache_dir = env;
  return s;
}

}  // namespace ppc
