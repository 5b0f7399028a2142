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

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ppc/config.hpp"
#include "ppc/eval.hpp"

namespace ppc {

struct SampleArgs {
  std::filesystem::path mesh_dir;
  std::filesystem::path out_dir;
  size_t n_points = 32768;
  uint64_t seed = 0;
  bool normalize_scale = true;
};

struct SampleSummary {
  size_t written = 0;
  size_t skipped = 0;  // cache entries already up to date
  std::vector<std::string> errors;
};

/// One binary cloud plus a provenance sidecar per mesh. Entries whose
/// sidecar matches the source file and parameters are left alone. Per-file
/// failures are collected; a data error listing them is thrown at the end.
SampleSummary cmd_sample(const SampleArgs& args, std::ostream& log);

/// Writes config.json, split.json, history.csv, periodic
/// checkpoint_eNNNN.ppck files and checkpoint.ppck to the output dir.
/// A non-empty `resume` continues from that checkpoint.
TrainHistory cmd_train(const RunConfig& c, std::ostream& log, const std::filesystem::path& resume = {});

/// Eval-mode inference over the chosen split ("test" or "train"); writes
/// eval.json, eval.csv and predictions.csv.
EvalReport cmd_eval(const RunConfig& c, const std::filesystem::path& checkpoint, const std::string& split,
                    std::ostream& log);

/// Six rows, one per omission; writes ablation.json, ablation.csv and one
/// config echo per row under ablation/.
std::vector<EvalReport> cmd_ablate(const RunConfig& c, std::ostream& log);
std::vector<EvalReport> cmd_sweep(const RunConfig& c, std::ostream& log);

struct OrientResult {
  std::string verdict;  // "front", "back" or "abstain"
  RowVec logits_a;      // as captured
  RowVec logits_b;      // rotated 180 degrees about x
};

/// Agreement rule applied to one mesh and its rotation. When
/// `dump_neighbors` is set, the first level's spatial neighbor table for
/// the captured view goes there as CSV.
OrientResult cmd_orient(const std::filesystem::path& checkpoint, const std::filesystem::path& mesh,
                        uint64_t seed, const std::filesystem::path& dump_neighbors, std::ostream& log);

/// Writes the configured synthetic corpus (PLY meshes + manifest.csv).
void cmd_synth(const RunConfig& c, const std::filesystem::path& out_dir, std::ostream& log);

/// Canonical JSON of the fully defaulted config.
std::string cmd_spec_echo(const RunConfig& c);

/// Renders a saved report: PR curve for a two-class eval.json, macro-F1
/// bars for an ablation or sweep array. Returns the files written.
std::vector<std::filesystem::path> cmd_plot(const std::filesystem::path& report,
                                            const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace ppc
