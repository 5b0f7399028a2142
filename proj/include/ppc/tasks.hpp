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
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ppc/mesh.hpp"
#include "ppc/pointcloud.hpp"

namespace ppc {

enum class TaskKind { Period, Seal, LeftSign, Front };

std::string_view to_string(TaskKind t);
TaskKind parse_task(std::string_view name);

/// Training-set size presets for the period task. `All` keeps every
/// non-test tablet and exists for corpora other than the reference one.
enum class SizeVariant { Small337, Medium631, Full747, All };

std::string_view to_string(SizeVariant v);
SizeVariant parse_size_variant(std::string_view name);
size_t nominal_size(SizeVariant v);

/// One manifest line. Empty CSV cells become std::nullopt.
struct ManifestRow {
  std::string mesh_path;
  std::string tablet_id;
  std::optional<std::string> period;
  std::optional<bool> seal;
  std::optional<bool> left_sign;
  std::optional<bool> front_eligible;
  std::optional<std::string> split;  // "train" / "test"
};

/// CSV with header mesh_path,tablet_id,period,seal,left_sign,front_eligible
/// and an optional trailing split column. Relative mesh paths resolve
/// against the manifest's directory.
struct Manifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  static Manifest load(const std::filesystem::path& path);
  static Manifest parse(std::istream& in, const std::filesystem::path& base_dir = {});
  void write(const std::filesystem::path& path) const;
  bool has_split() const;
};

/// A labeled view of one tablet. Meshes are sampled lazily.
struct Instance {
  std::string tablet_id;
  int label = 0;
  std::string mesh_path;               // resolved path, or empty
  std::shared_ptr<const Mesh> mesh;    // in-memory mesh (synthetic data)
  bool flipped = false;                // rotated 180 degrees about x
};

struct TaskDataset {
  TaskKind task = TaskKind::Period;
  int num_classes = 0;
  std::vector<std::string> class_names;
  std::vector<Instance> instances;
  std::vector<size_t> train;
  std::vector<size_t> test;
  std::vector<int> class_counts;  // over the training split

  /// Disjoint splits, labels in range, counts consistent, no tablet id in
  /// both splits. Throws a data error otherwise.
  void validate() const;
  void recount();
  std::vector<std::string> tablet_ids(const std::vector<size_t>& split) const;
};

struct DatasetOptions {
  uint64_t seed = 0;
  double test_fraction = 0.1;  // used only when the manifest has no split column
};

TaskDataset build_period_dataset(const Manifest& manifest, SizeVariant variant,
                                 const DatasetOptions& opts = {});
TaskDataset build_binary_dataset(const Manifest& manifest, TaskKind task,
                                 const DatasetOptions& opts = {});
/// Every eligible tablet yields a front view (label 1) and its x-axis
/// rotation (label 0); both land in the same split.
TaskDataset build_front_dataset(const Manifest& manifest, Rng& rng, double test_fraction = 0.1);

struct SourceOptions {
  size_t n_points = 32768;
  NormalizeOptions normalize;
  uint64_t seed = 0;
  std::filesystem::path cache_dir;   // empty disables the on-disk cache
  size_t memory_limit_bytes = size_t{2} << 30;
};

/// Materializes instance clouds: sample (fixed per-tablet seed), normalize,
/// round to float32, cache, then flip if the instance asks for it.
class CloudSource {
 public:
  explicit CloudSource(SourceOptions opts) : opts_(std::move(opts)) {}

  PointCloud get(const Instance& inst);
  const SourceOptions& options() const { return opts_; }
  uint64_t sample_seed(const std::string& tablet_id) const;
  std::filesystem::path cache_path(const std::string& tablet_id) const;

 private:
  PointCloud base_cloud(const Instance& inst);

  SourceOptions opts_;
  std::map<std::string, PointCloud> memo_;
  size_t memo_bytes_ = 0;
};

/// 64-bit FNV-1a, used for platform-stable string keyed seeds.
uint64_t fnv1a(std::string_view s);

// Synthetic tablets.

struct SynthOptions {
  int grid = 48;                 // grid cells per box face side
  int min_wedges = 20;
  int max_wedges = 200;
  double min_depth = 0.01;       // fraction of tablet thickness
  double max_depth = 0.03;
  double test_fraction = 0.2;

  bool operator==(const SynthOptions&) const = default;
};

/// Tablet-like mesh: a rounded box with a flat front (+z) and a bulging
/// back, carrying wedge impressions. `klass` selects the class-specific
/// style for the given task.
Mesh synth_tablet(TaskKind task, int klass, Rng& rng, const SynthOptions& opts = {});

/// n_per_class tablets per class (for Front: n_per_class tablets, each
/// contributing both views).
TaskDataset synth_generate(TaskKind task, int n_per_class, Rng& rng, const SynthOptions& opts = {});

/// Writes meshes as PLY plus manifest.csv (with a split column) to `dir`.
void write_synth_corpus(const TaskDataset& data, const std::filesystem::path& dir);

}  // namespace ppc
