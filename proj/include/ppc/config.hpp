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
#include <json.hpp>
#include <string>
#include <vector>

#include "ppc/network.hpp"
#include "ppc/tasks.hpp"
#include "ppc/training.hpp"

namespace ppc {

struct TaskConfig {
  TaskKind kind = TaskKind::Period;
  std::string source = "synth";  // "synth" or "manifest"
  std::string manifest;          // manifest CSV, for source = manifest
  SizeVariant size_variant = SizeVariant::Full747;
  double test_fraction = 0.1;    // manifest without a split column
  int synth_per_class = 25;
  SynthOptions synth;
  int sample_points = 32768;     // points sampled per instance
  bool normalize_scale = true;
  std::string cache_dir;         // empty: no disk cache (PPC_CACHE_DIR overrides)

  bool operator==(const TaskConfig&) const = default;
};

struct RunConfig {
  NetworkSpec network = NetworkSpec::standard(4);
  TrainParams training;  // training.seed mirrors `seed`
  TaskConfig task;
  std::string output_dir = "run";
  uint64_t seed = 0;
  int threads = 0;  // 0 = strict single-threaded
  std::vector<int> sweep_sizes{8192, 16384, 32768};

  /// Cross-field checks: class count matches the task, enough sampled
  /// points for the input layer, valid sweep sizes.
  void validate() const;
  void set_seed(uint64_t s) {
    seed = s;
    training.seed = s;
  }
  bool operator==(const RunConfig&) const = default;
};

/// Canonical form: every field, fixed key order. The seed lives at the top
/// level only.
nlohmann::ordered_json to_json(const RunConfig& c);
/// Strict: unknown keys are rejected, missing keys take defaults.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Parse errors report the byte offset of the problem.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

/// Builds the configured dataset (manifest or synthetic).
TaskDataset build_dataset(const RunConfig& c);
/// Cloud source with the configured sampling; PPC_CACHE_DIR, when set,
/// replaces the cache directory.
SourceOptions source_options(const RunConfig& c);

int task_classes(TaskKind t);

}  // namespace ppc
