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

// Command-line front end. Talks to the library only through the C API.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "ppc/ppc.h"

namespace {

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the configured seed");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = strict single-threaded)")->check(CLI::NonNegativeNumber);
  if (with_out) cmd->add_option("--out", c.out, "Output directory");
}

int report(ppc_status s) {
  if (s != PPC_OK) std::cerr << "error: " << ppc_last_error() << "\n";
  return s == PPC_ERR_INTERNAL ? 4 : static_cast<int>(s);
}

/// Loads the config (or defaults) and applies the command-line overrides.
ppc_status make_config(const Common& c, ppc_config** cfg) {
  ppc_status s = c.config.empty() ? ppc_config_default(cfg) : ppc_config_load(c.config.c_str(), cfg);
  if (s != PPC_OK) return s;
  if (c.seed && (s = ppc_config_set_seed(*cfg, *c.seed)) != PPC_OK) return s;
  if (c.threads) {
    if ((s = ppc_config_set_threads(*cfg, *c.threads)) != PPC_OK) return s;
  }
  if (!c.out.empty() && (s = ppc_config_set_output_dir(*cfg, c.out.c_str())) != PPC_OK) return s;
  return PPC_OK;
}

/// Runs fn(cfg) with a configured handle and frees it afterwards.
template <class F>
int with_config(const Common& c, F&& fn) {
  ppc_config* cfg = nullptr;
  ppc_status s = make_config(c, &cfg);
  if (s == PPC_OK) s = fn(cfg);
  ppc_config_free(cfg);
  return report(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud pyramid classifier for tablet scans"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ppc_version()));

  // sample
  std::string mesh_dir, sample_out;
  uint64_t n_points = 32768, sample_seed = 0;
  bool no_scale = false;
  int sample_threads = 0;
  auto* sample = app.add_subcommand("sample", "Sample meshes into cached point clouds");
  sample->add_option("--mesh-dir", mesh_dir, "Directory of .ply/.obj meshes")->required();
  sample->add_option("--out", sample_out, "Output directory")->required();
  sample->add_option("--points", n_points, "Points per cloud")->check(CLI::PositiveNumber);
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--threads", sample_threads, "Worker threads")->check(CLI::NonNegativeNumber);
  sample->add_flag("--no-scale", no_scale, "Center only, keep the original scale");

  Common train_c, eval_c, ablate_c, sweep_c, synth_c, echo_c;
  std::string resume;
  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, train_c);
  train->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);

  std::string eval_ckpt, eval_split = "test";
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, eval_c);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", eval_split, "Split to evaluate")->check(CLI::IsMember({"test", "train"}));

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate every omission variant");
  add_common(ablate, ablate_c);
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate at each configured point count");
  add_common(sweep, sweep_c);

  std::string orient_ckpt, orient_mesh, dump_neighbors;
  uint64_t orient_seed = 0;
  int orient_threads = 0;
  auto* orient = app.add_subcommand("orient", "Decide front/back for one mesh with the agreement rule");
  orient->add_option("--checkpoint", orient_ckpt, "Front-task checkpoint")->required()->check(CLI::ExistingFile);
  orient->add_option("--mesh", orient_mesh, "Mesh file")->required()->check(CLI::ExistingFile);
  orient->add_option("--seed", orient_seed, "Sampling seed");
  orient->add_option("--threads", orient_threads, "Worker threads")->check(CLI::NonNegativeNumber);
  orient->add_option("--dump-neighbors", dump_neighbors, "Write the first level's neighbor table as CSV");

  auto* synth = app.add_subcommand("synth", "Write a synthetic tablet corpus");
  add_common(synth, synth_c);

  auto* echo = app.add_subcommand("spec-echo", "Print the fully defaulted configuration");
  add_common(echo, echo_c);

  std::string plot_report, plot_out;
  auto* plot = app.add_subcommand("plot", "Render a saved report to SVG");
  plot->add_option("--report", plot_report, "eval.json, ablation.json or sweep.json")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (*sample) {
    ppc_set_threads(sample_threads);
    return report(ppc_sample(mesh_dir.c_str(), sample_out.c_str(), n_points, sample_seed, no_scale ? 0 : 1));
  }
  if (*train) {
    return with_config(train_c, [&](ppc_config* cfg) { return ppc_train(cfg, resume.empty() ? nullptr : resume.c_str()); });
  }
  if (*eval) {
    return with_config(eval_c, [&](ppc_config* cfg) {
      return ppc_eval(cfg, eval_ckpt.c_str(), eval_split.c_str(), nullptr);
    });
  }
  if (*ablate) return with_config(ablate_c, [](ppc_config* cfg) { return ppc_ablate(cfg); });
  if (*sweep) return with_config(sweep_c, [](ppc_config* cfg) { return ppc_sweep(cfg); });
  if (*orient) {
    ppc_set_threads(orient_threads);
    char* verdict = nullptr;
    const ppc_status s = ppc_orient(orient_ckpt.c_str(), orient_mesh.c_str(), orient_seed,
                                    dump_neighbors.empty() ? nullptr : dump_neighbors.c_str(), &verdict);
    if (s == PPC_OK) std::cout << verdict << "\n";
    ppc_string_free(verdict);
    return report(s);
  }
  if (*synth) {
    const std::string dir = synth_c.out.empty() ? "synth" : synth_c.out;
    return with_config(synth_c, [&](ppc_config* cfg) { return ppc_synth(cfg, dir.c_str()); });
  }
  if (*echo) {
    return with_config(echo_c, [](ppc_config* cfg) {
      char* text = nullptr;
      const ppc_status s = ppc_config_to_json(cfg, &text);
      if (s == PPC_OK) std::cout << text;
      ppc_string_free(text);
      return s;
    });
  }
  if (*plot) return report(ppc_plot(plot_report.c_str(), plot_out.c_str()));
  return 1;
}
