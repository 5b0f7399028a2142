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

#include <cstddef>
#include <functional>

namespace ppc {

/// Worker count for row-parallel loops. 0 or 1 runs everything on the
/// calling thread. Every parallel loop in the library writes disjoint rows
/// and never reduces across workers, so results are bit-identical for any
/// setting.
void set_num_threads(int n);
int num_threads();

/// Calls fn(lo, hi) over a static partition of [begin, end).
void parallel_for(size_t begin, size_t end,
                  const std::function<void(size_t, size_t)>& fn,
                  size_t min_chunk = 64);

}  // namespace ppc
