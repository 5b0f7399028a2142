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

#include "ppc/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ppc/error.hpp"

namespace ppc {

std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::Period: return "period";
    case TaskKind::Seal: return "seal";
    case TaskKind::LeftSign: return "left_sign";
    case TaskKind::Front: return "front";
  }
  return "?";
}

TaskKind parse_task(std::string_view name) {
  for (TaskKind t : {TaskKind::Period, TaskKind::Seal, TaskKind::LeftSign, TaskKind::Front}) {
    if (to_string(t) == name) return t;
  }
  throw_usage("unknown task '" + std::string(name) + "' (period, seal, left_sign, front)");
}

std::string_view to_string(SizeVariant v) {
  switch (v) {
    case SizeVariant::Small337: return "Small337";
    case SizeVariant::Medium631: return "Medium631";
    case SizeVariant::Full747: return "Full747";
    case SizeVariant::All: return "All";
  }
  return "?";
}

SizeVariant parse_size_variant(std::string_view name) {
  for (SizeVariant v : {SizeVariant::Small337, SizeVariant::Medium631, SizeVariant::Full747, SizeVariant::All}) {
    if (to_string(v) == name) return v;
  }
  throw_usage("unknown size variant '" + std::string(name) + "'");
}

size_t nominal_size(SizeVariant v) {
  switch (v) {
    case SizeVariant::Small337: return 337;
    case SizeVariant::Medium631: return 631;
    case SizeVariant::Full747: return 747;
    case SizeVariant::All: return 0;
  }
  return 0;
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::optional<bool> parse_flag(const std::string& cell, size_t line, const char* column) {
  std::string v = trim(cell);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v.empty()) return std::nullopt;
  if (v == "1" || v == "true" || v == "yes" || v == "y") return true;
  if (v == "0" || v == "false" || v == "no" || v == "n") return false;
  throw_data("manifest line " + std::to_string(line) + ": bad " + column + " value '" + cell + "'");
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string flag_cell(const std::optional<bool>& f) { return f ? (*f ? "1" : "0") : ""; }

}  // namespace

Manifest Manifest::parse(std::istream& in, const std::filesystem::path& base_dir) {
  static const std::vector<std::string> kColumns = {"mesh_path", "tablet_id", "period",
                                                    "seal", "left_sign", "front_eligible"};
  Manifest m;
  m.base_dir = base_dir;
  std::string line;
  if (!std::getline(in, line)) throw_data("manifest is empty");
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);
  const bool with_split = header.size() == kColumns.size() + 1 && header.back() == "split";
  if (!with_split && header != kColumns) {
    throw_data("manifest header must be 'mesh_path,tablet_id,period,seal,left_sign,front_eligible[,split]'");
  }
  if (with_split && !std::equal(kColumns.begin(), kColumns.end(), header.begin())) {
    throw_data("manifest header must be 'mesh_path,tablet_id,period,seal,left_sign,front_eligible[,split]'");
  }
  std::set<std::string> ids;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw_data("manifest line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                 " cells, got " + std::to_string(cells.size()));
    }
    ManifestRow r;
    r.mesh_path = trim(cells[0]);
    r.tablet_id = trim(cells[1]);
    if (r.tablet_id.empty()) throw_data("manifest line " + std::to_string(lineno) + ": empty tablet_id");
    if (!ids.insert(r.tablet_id).second) {
      throw_data("manifest line " + std::to_string(lineno) + ": duplicate tablet_id '" + r.tablet_id + "'");
    }
    if (!trim(cells[2]).empty()) r.period = trim(cells[2]);
    r.seal = parse_flag(cells[3], lineno, "seal");
    r.left_sign = parse_flag(cells[4], lineno, "left_sign");
    r.front_eligible = parse_flag(cells[5], lineno, "front_eligible");
    if (with_split) {
      const std::string s = trim(cells[6]);
      if (!s.empty()) {
        if (s != "train" && s != "test") {
          throw_data("manifest line " + std::to_string(lineno) + ": split must be 'train' or 'test'");
        }
        r.split = s;
      }
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open manifest '" + path.string() + "'");
  return parse(in, path.parent_path());
}

void Manifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw_data("cannot write manifest '" + path.string() + "'");
  const bool split = has_split();
  out << "mesh_path,tablet_id,period,seal,left_sign,front_eligible" << (split ? ",split" : "") << '\n';
  for (const auto& r : rows) {
    out << csv_cell(r.mesh_path) << ',' << csv_cell(r.tablet_id) << ',' << csv_cell(r.period.value_or("")) << ','
        << flag_cell(r.seal) << ',' << flag_cell(r.left_sign) << ',' << flag_cell(r.front_eligible);
    if (split) out << ',' << r.split.value_or("");
    out << '\n';
  }
}

bool Manifest::has_split() const {
  return std::any_of(rows.begin(), rows.end(), [](const ManifestRow& r) { return r.split.has_value(); });
}

void TaskDataset::recount() {
  class_counts.assign(static_cast<size_t>(num_classes), 0);
  for (size_t i : train) ++class_counts[static_cast<size_t>(instances[i].label)];
}

std::vector<std::string> TaskDataset::tablet_ids(const std::vector<size_t>& split) const {
  std::set<std::string> ids;
  for (size_t i : split) ids.insert(instances[i].tablet_id);
  return {ids.begin(), ids.end()};
}

void TaskDataset::validate() const {
  if (num_classes < 2) throw_data("dataset needs at least two classes");
  std::vector<char> seen(instances.size(), 0);
  for (const auto* split : {&train, &test}) {
    for (size_t i : *split) {
      if (i >= instances.size()) throw_data("dataset split index out of range");
      if (seen[i]) throw_data("instance " + std::to_string(i) + " appears twice across splits");
      seen[i] = 1;
    }
  }
  for (const auto& inst : instances) {
    if (inst.label < 0 || inst.label >= num_classes) throw_data("label out of range for '" + inst.tablet_id + "'");
  }
  std::vector<int> counts(static_cast<size_t>(num_classes), 0);
  for (size_t i : train) ++counts[static_cast<size_t>(instances[i].label)];
  if (counts != class_counts) throw_data("class_counts do not match the training split");
  const auto tr = tablet_ids(train);
  const auto te = tablet_ids(test);
  std::vector<std::string> both;
  std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
  if (!both.empty()) throw_data("tablet '" + both.front() + "' appears in both train and test");
}

namespace {

std::string resolve(const Manifest& m, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || m.base_dir.empty()) return path.string();
  return (m.base_dir / path).string();
}

/// Indices into `rows` assigned to test: explicit split column when present,
/// otherwise a seeded round(fraction * n) subset.
std::vector<bool> test_mask(const Manifest& m, const std::vector<size_t>& rows, uint64_t seed,
                            uint64_t tag, double fraction) {
  std::vector<bool> is_test(rows.size(), false);
  if (m.has_split()) {
    for (size_t i = 0; i < rows.size(); ++i) is_test[i] = m.rows[rows[i]].split == std::string("test");
    return is_test;
  }
  Rng rng = Rng(seed).derive({tag});
  const auto perm = rng.permutation(rows.size());
  auto n_test = static_cast<size_t>(std::lround(fraction * static_cast<double>(rows.size())));
  if (fraction > 0.0 && n_test == 0 && rows.size() >= 2) n_test = 1;
  for (size_t i = 0; i < n_test; ++i) is_test[perm[i]] = true;
  return is_test;
}

}  // namespace

TaskDataset build_period_dataset(const Manifest& manifest, SizeVariant variant, const DatasetOptions& opts) {
  std::vector<size_t> rows;
  for (size_t i = 0; i < manifest.rows.size(); ++i) {
    if (manifest.rows[i].period) rows.push_back(i);
  }
  if (rows.empty()) throw_data("period task: manifest has no period labels");

  // Integer labels are used as-is; anything else maps in sorted name order.
  std::set<std::string> names;
  bool numeric = true;
  for (size_t r : rows) {
    const auto& p = *manifest.rows[r].period;
    names.insert(p);
    numeric = numeric && !p.empty() && std::all_of(p.begin(), p.end(), ::isdigit);
  }
  TaskDataset ds;
  ds.task = TaskKind::Period;
  std::map<std::string, int> label_of;
  if (numeric) {
    int max_label = 0;
    for (const auto& n : names) max_label = std::max(max_label, std::stoi(n));
    ds.num_classes = std::max(2, max_label + 1);
    for (int c = 0; c < ds.num_classes; ++c) ds.class_names.push_back(std::to_string(c));
    for (const auto& n : names) label_of[n] = std::stoi(n);
  } else {
    for (const auto& n : names) {
      label_of[n] = static_cast<int>(ds.class_names.size());
      ds.class_names.push_back(n);
    }
    ds.num_classes = static_cast<int>(ds.class_names.size());
  }
  if (ds.num_classes < 2) throw_data("period task: only one period present");

  const auto is_test = test_mask(manifest, rows, opts.seed, fnv1a("period-split"), opts.test_fraction);
  std::vector<size_t> pool;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = manifest.rows[rows[i]];
    Instance inst;
    inst.tablet_id = r.tablet_id;
    inst.label = label_of.at(*r.period);
    inst.mesh_path = resolve(manifest, r.mesh_path);
    ds.instances.push_back(inst);
    (is_test[i] ? ds.test : pool).push_back(ds.instances.size() - 1);
  }

  // One seeded order over the training pool; smaller variants are prefixes
  // or capped prefixes of it, so Small c Medium c Full.
  Rng order_rng = Rng(opts.seed).derive({fnv1a("period-order")});
  order_rng.shuffle(pool);
  const size_t want = nominal_size(variant);
  if (variant == SizeVariant::All) {
    ds.train = pool;
  } else if (variant == SizeVariant::Small337) {
    const size_t medium = nominal_size(SizeVariant::Medium631);
    if (pool.size() < medium) {
      throw_data("period task: Small337 is drawn from the 631-tablet set, only " + std::to_string(pool.size()) +
                 " training tablets available");
    }
    std::vector<int> taken(static_cast<size_t>(ds.num_classes), 0);
    for (size_t i = 0; i < medium; ++i) {
      const int label = ds.instances[pool[i]].label;
      if (taken[static_cast<size_t>(label)] < 100) {
        ++taken[static_cast<size_t>(label)];
        ds.train.push_back(pool[i]);
      }
    }
  } else {
    if (pool.size() < want) {
      throw_data("period task: " + std::string(to_string(variant)) + " needs " + std::to_string(want) +
                 " training tablets, only " + std::to_string(pool.size()) + " available");
    }
    ds.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));
  }
  std::sort(ds.train.begin(), ds.train.end());
  ds.recount();
  ds.validate();
  return ds;
}

TaskDataset build_binary_dataset(const Manifest& manifest, TaskKind task, const DatasetOptions& opts) {
  if (task != TaskKind::Seal && task != TaskKind::LeftSign) {
    throw_usage("build_binary_dataset: task must be seal or left_sign");
  }
  const char* column = task == TaskKind::Seal ? "seal" : "left_sign";
  std::vector<size_t> rows;
  std::set<bool> values;
  for (size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& f = task == TaskKind::Seal ? manifest.rows[i].seal : manifest.rows[i].left_sign;
    if (f) {
      rows.push_back(i);
      values.insert(*f);
    }
  }
  if (rows.empty()) throw_data(std::string(column) + " task: manifest has no " + column + " flags");
  if (values.size() < 2) throw_data(std::string(column) + " task: degenerate task (only one class present)");

  TaskDataset ds;
  ds.task = task;
  ds.num_classes = 2;
  ds.class_names = {"absent", "present"};
  const auto is_test = test_mask(manifest, rows, opts.seed, fnv1a(std::string(column) + "-split"), opts.test_fraction);
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = manifest.rows[rows[i]];
    Instance inst;
    inst.tablet_id = r.tablet_id;
    inst.label = (task == TaskKind::Seal ? *r.seal : *r.left_sign) ? 1 : 0;
    inst.mesh_path = resolve(manifest, r.mesh_path);
    ds.instances.push_back(inst);
    (is_test[i] ? ds.test : ds.train).push_back(i);
  }
  ds.recount();
  ds.validate();
  return ds;
}

TaskDataset build_front_dataset(const Manifest& manifest, Rng& rng, double test_fraction) {
  std::vector<size_t> rows;
  for (size_t i = 0; i < manifest.rows.size(); ++i) {
    if (manifest.rows[i].front_eligible.value_or(false)) rows.push_back(i);
  }
  if (rows.empty()) throw_data("front task: no eligible tablets");
  const auto is_test = test_mask(manifest, rows, rng.next_u64(), fnv1a("front-split"), test_fraction);
  TaskDataset ds;
  ds.task = TaskKind::Front;
  ds.num_classes = 2;
  ds.class_names = {"back", "front"};
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& r = manifest.rows[rows[i]];
    for (bool flipped : {false, true}) {
      Instance inst;
      inst.tablet_id = r.tablet_id;
      inst.label = flipped ? 0 : 1;
      inst.flipped = flipped;
      inst.mesh_path = resolve(manifest, r.mesh_path);
      ds.instances.push_back(inst);
      (is_test[i] ? ds.test : ds.train).push_back(ds.instances.size() - 1);
    }
  }
  ds.recount();
  ds.validate();
  return ds;
}

uint64_t CloudSource::sample_seed(const std::string& tablet_id) const {
  return splitmix64(opts_.seed ^ fnv1a(tablet_id));
}

std::filesystem::path CloudSource::cache_path(const std::string& tablet_id) const {
  std::string safe = tablet_id;
  for (char& c : safe) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
  }
  return opts_.cache_dir / (safe + "_" + std::to_string(sample_seed(tablet_id)) + "_" +
                            std::to_string(opts_.n_points) + (opts_.normalize.scale ? "" : "_unscaled") + ".ppc");
}

PointCloud CloudSource::base_cloud(const Instance& inst) {
  const std::filesystem::path cached = opts_.cache_dir.empty() ? std::filesystem::path{} : cache_path(inst.tablet_id);
  if (!cached.empty() && std::filesystem::exists(cached)) {
    PointCloud pc = read_cloud(cached);
    if (pc.size() == opts_.n_points) return pc;
  }
  Mesh loaded;
  const Mesh* mesh = inst.mesh.get();
  if (mesh == nullptr) {
    if (inst.mesh_path.empty()) throw_data("instance '" + inst.tablet_id + "' has no mesh");
    loaded = load_mesh(inst.mesh_path);
    mesh = &loaded;
  }
  Rng rng(sample_seed(inst.tablet_id));
  PointCloud pc = round_to_float(normalize(sample_surface(*mesh, opts_.n_points, rng), opts_.normalize));
  if (!cached.empty()) {
    std::filesystem::create_directories(opts_.cache_dir);
    write_cloud(pc, cached);
  }
  return pc;
}

PointCloud CloudSource::get(const Instance& inst) {
  auto it = memo_.find(inst.tablet_id);
  PointCloud base;
  if (it != memo_.end()) {
    base = it->second;
  } else {
    base = base_cloud(inst);
    const size_t bytes = base.size() * 6 * sizeof(double);
    if (memo_bytes_ + bytes <= opts_.memory_limit_bytes) {
      memo_.emplace(inst.tablet_id, base);
      memo_bytes_ += bytes;
    }
  }
  return inst.flipped ? rotate_x_180(base) : base;
}

}  // namespace ppc
