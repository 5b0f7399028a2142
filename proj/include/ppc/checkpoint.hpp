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
#include <string>

#include "ppc/network.hpp"
#include "ppc/training.hpp"

namespace ppc {

inline constexpr uint32_t kCheckpointVersion = 1;

/// Container layout, all little endian:
///   "PPCK" | u32 version | u64 header bytes | JSON header | zero pad to 8 |
///   float64 blob
/// The header carries the network spec, every tensor's name, shape and
/// blob offset, the optimizer momentum tensors, the epoch counter and the
/// generator state needed to resume, plus the blob length and its FNV-1a
/// checksum.
struct Checkpoint {
  Model model;
  SgdOptimizer optimizer;
  int next_epoch = 0;
  uint64_t seed = 0;
};

std::string serialize_checkpoint(const Model& model, const TrainState* state, uint64_t seed);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainState* state,
                     uint64_t seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ppc
