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

#include <doctest.h>

#include <cmath>
#include <set>

#include "ppc/rng.hpp"

using ppc::Rng;

TEST_CASE("rng: same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: engine output is the standard mt19937_64 sequence") {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the C++ standard.
  Rng r(5489);
  uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = r.next_u64();
  CHECK(v == 9981545732273789042ull);
}

TEST_CASE("rng: uniform lies in [0, 1) with the right mean") {
  Rng r(1);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("rng: normal has zero mean and unit variance") {
  Rng r(2);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rng: below is unbiased and in range") {
  Rng r(3);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i) ++counts[r.below(3)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 400);
}

TEST_CASE("rng: permutation is a permutation") {
  Rng r(4);
  const auto p = r.permutation(100);
  std::set<uint32_t> s(p.begin(), p.end());
  CHECK(s.size() == 100);
  CHECK(*s.rbegin() == 99);
}

TEST_CASE("rng: derived streams depend only on seed and tags") {
  Rng a(9), b(9);
  a.next_u64();
  Rng da = a.derive({1, 2}), db = b.derive({1, 2});
  CHECK(da.next_u64() == db.next_u64());
  CHECK(a.derive({1, 2}).next_u64() != a.derive({2, 1}).next_u64());
  CHECK(Rng(9).derive({1}).next_u64() != Rng(10).derive({1}).next_u64());
}
