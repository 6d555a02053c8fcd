// Copyright 2026 The gnnprop Authors.
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

#include "gnnprop/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

namespace gnnprop {
namespace {

using Block = std::array<std::uint32_t, 4>;

// Reference vectors of Philox4x32-10 from the Random123 distribution.
TEST(Philox, KnownAnswerZero) {
  const Block out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerOnes) {
  const Block out = Philox4x32::block(
      {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
      {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const Block out = Philox4x32::block(
      {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
      {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, SameSeedSameSequence) {
  Philox4x32 a = make_stream(42, StreamPurpose::kWeights, 3);
  Philox4x32 b = make_stream(42, StreamPurpose::kWeights, 3);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());
}

TEST(Philox, StreamsDiffer) {
  Philox4x32 a = make_stream(42, StreamPurpose::kWeights, 0);
  Philox4x32 b = make_stream(42, StreamPurpose::kWeights, 1);
  Philox4x32 c = make_stream(42, StreamPurpose::kGraph, 0);
  const auto x = a();
  EXPECT_NE(x, b());
  EXPECT_NE(x, c());
}

TEST(Philox, UniformMoments) {
  Philox4x32 rng = make_stream(7, StreamPurpose::kSampling, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    s += u;
    s2 += u * u;
  }
  // Mean 1/2 and variance 1/12 within about 5 SE.
  EXPECT_NEAR(s / n, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 2e-3);
}

TEST(Philox, NormalMoments) {
  Philox4x32 rng = make_stream(8, StreamPurpose::kSampling, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = standard_normal(rng);
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(Philox, UniformIndexCoversRange) {
  Philox4x32 rng = make_stream(9, StreamPurpose::kSampling, 0);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[uniform_index(rng, 7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(DeriveSeed, DistinctChildren) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 4; ++tag) {
    for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(1, tag, i));
  }
  EXPECT_EQ(seen.size(), 400u);
  EXPECT_EQ(derive_seed(5, 6, 7), derive_seed(5, 6, 7));
}

}  // namespace
}  // namespace gnnprop
