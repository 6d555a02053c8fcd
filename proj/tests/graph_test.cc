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

#include "gnnprop/graph.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace gnnprop {
namespace {

// Expected edge count and variance given the realized labels: every pair is
// an independent Bernoulli trial.
struct PairSum {
  double mean = 0.0;
  double var = 0.0;
};

PairSum pair_sum(const Graph& g, const SSBMParams& p) {
  std::vector<double> size(p.k, 0.0);
  for (int c : g.labels) size[c] += 1.0;
  double same = 0.0;
  for (double s : size) same += s * (s - 1.0) / 2.0;
  const double all = p.n * (p.n - 1.0) / 2.0;
  const double cross = all - same;
  const double pi = p.p_in(), po = p.p_out();
  return {same * pi + cross * po, same * pi * (1 - pi) + cross * po * (1 - po)};
}

TEST(Ssbm, EdgeCountMatchesPairSumOverSeeds) {
  double count = 0.0, expect = 0.0, var = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const SSBMParams p{800, 2, 8.0, 1.5, static_cast<std::uint64_t>(1000 + s)};
    const Graph g = generate_ssbm(p);
    const PairSum ps = pair_sum(g, p);
    count += static_cast<double>(g.edges.size());
    expect += ps.mean;
    var += ps.var;
  }
  EXPECT_LE(std::abs(count - expect) / seeds, 3.0 * std::sqrt(var) / seeds);
}

TEST(Ssbm, ExpectedEdgeCountsAgreeWithPublishedTotals) {
  // Label-averaged expectation: half of all pairs are in-class.
  const auto expected = [](double a, double b) {
    const SSBMParams p{800, 2, a, b, 0};
    return 800.0 * 799.0 / 2.0 * 0.5 * (p.p_in() + p.p_out());
  };
  EXPECT_NEAR(expected(8, 1.5), 12685.0, 1.0);
  // Directed totals of 25784 and 19204 halve to 12892 and 9602.
  EXPECT_NEAR(expected(8, 1.5) / 12892.0, 1.0, 0.05);
  EXPECT_NEAR(expected(4, 3) / 9602.0, 1.0, 0.05);
}

TEST(Ssbm, EdgesAreCanonicalAndUnique) {
  const Graph g = generate_ssbm({200, 2, 8.0, 1.5, 3});
  std::set<std::pair<int, int>> seen;
  for (const auto& [u, v] : g.edges) {
    EXPECT_LT(u, v);
    EXPECT_TRUE(seen.insert({u, v}).second);
  }
  EXPECT_NO_THROW(g.validate());
}

TEST(Ssbm, ZeroDensityIsEdgeless) {
  const Graph g = generate_ssbm({10, 2, 0.0, 0.0, 1});
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.num_vertices, 10);
}

TEST(Ssbm, DeterministicGivenSeed) {
  const Graph a = generate_ssbm({300, 2, 8.0, 1.5, 77});
  const Graph b = generate_ssbm({300, 2, 8.0, 1.5, 77});
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Ssbm, RejectsInvalidParameters) {
  EXPECT_THROW(generate_ssbm({10, 2, 8.0, 1.5, 1}), ParameterError);  // p > 1
  EXPECT_THROW(generate_ssbm({800, 2, 1.0, 2.0, 1}), ParameterError);  // a < b
  EXPECT_THROW(generate_ssbm({800, 2, 2.0, -1.0, 1}), ParameterError);
  EXPECT_THROW(generate_ssbm({0, 2, 0.0, 0.0, 1}), ParameterError);
}

TEST(Recovery, PublishedRegimes) {
  EXPECT_EQ(recovery_regime(8, 1.5), RecoveryRegime::kExact);
  EXPECT_EQ(recovery_regime(4, 3), RecoveryRegime::kNone);
  EXPECT_EQ(recovery_regime(2, 2), RecoveryRegime::kNone);
  EXPECT_STREQ(to_string(RecoveryRegime::kExact), "Exact");
}

TEST(Recovery, SymmetricInArguments) {
  for (double a = 0.0; a <= 12.0; a += 0.5) {
    for (double b = 0.0; b <= 12.0; b += 0.5) {
      EXPECT_EQ(recovery_regime(a, b), recovery_regime(b, a));
    }
  }
  EXPECT_THROW(recovery_regime(-1, 1), ParameterError);
}

TEST(Features, RowsHaveUnitNorm) {
  const Graph g = synthesize_features(generate_ssbm({300, 2, 8, 1.5, 1}), 8, 4.0, 2);
  ASSERT_EQ(g.num_features(), 8);
  for (int v = 0; v < g.num_vertices; ++v) {
    EXPECT_NEAR(g.features.row(v).squaredNorm(), 1.0, 1e-12);
  }
}

TEST(Features, ZeroSeparationCarriesNoClassSignal) {
  const Graph g = synthesize_features(generate_ssbm({800, 2, 8, 1.5, 1}), 8, 0.0, 2);
  for (int j = 0; j < 8; ++j) {
    double s[2] = {0, 0}, s2[2] = {0, 0}, n[2] = {0, 0};
    for (int v = 0; v < g.num_vertices; ++v) {
      const int c = g.labels[v];
      s[c] += g.features(v, j);
      s2[c] += g.features(v, j) * g.features(v, j);
      n[c] += 1;
    }
    const double m0 = s[0] / n[0], m1 = s[1] / n[1];
    const double v0 = s2[0] / n[0] - m0 * m0, v1 = s2[1] / n[1] - m1 * m1;
    const double z = (m0 - m1) / std::sqrt(v0 / n[0] + v1 / n[1]);
    EXPECT_LT(std::abs(z), 4.0) << "coordinate " << j;
  }
}

TEST(Features, SeparationMovesClassMeansApart) {
  const Graph g = synthesize_features(generate_ssbm({800, 2, 8, 1.5, 1}), 8, 4.0, 2);
  double m[2] = {0, 0}, n[2] = {0, 0};
  for (int v = 0; v < g.num_vertices; ++v) {
    m[g.labels[v]] += g.features(v, 0);
    n[g.labels[v]] += 1;
  }
  EXPECT_GT(m[0] / n[0] - m[1] / n[1], 0.5);
}

TEST(Features, RejectsBadParameters) {
  const Graph g = generate_ssbm({10, 2, 0, 0, 1});
  EXPECT_THROW(synthesize_features(g, 0, 1.0, 1), ParameterError);
  EXPECT_THROW(synthesize_features(g, 2, -1.0, 1), ParameterError);
}

int count(const std::vector<bool>& m) {
  return static_cast<int>(std::count(m.begin(), m.end(), true));
}

TEST(Split, PublishedFractions) {
  const VertexMasks m = split_vertices(800, {0.5, 0.25, 0.25}, 3);
  EXPECT_EQ(count(m.train), 400);
  EXPECT_EQ(count(m.val), 200);
  EXPECT_EQ(count(m.test), 200);
}

TEST(Split, AllTrain) {
  const VertexMasks m = split_vertices(4, {1.0, 0.0, 0.0}, 3);
  EXPECT_EQ(count(m.train), 4);
  EXPECT_EQ(count(m.val) + count(m.test), 0);
}

TEST(Split, DisjointWithRequestedSizes) {
  for (int n : {1, 2, 3, 7, 10, 33, 101, 800}) {
    const VertexMasks m = split_vertices(n, {0.5, 0.25, 0.25}, n);
    for (int v = 0; v < n; ++v) {
      EXPECT_LE(m.train[v] + m.val[v] + m.test[v], 1);
      EXPECT_EQ(m.train[v] + m.val[v] + m.test[v], 1);  // sums to one: covers all
    }
    EXPECT_EQ(count(m.val), n / 4);
    EXPECT_EQ(count(m.test), n / 4);
    EXPECT_EQ(count(m.train), n - 2 * (n / 4));
  }
  const VertexMasks partial = split_vertices(10, {0.3, 0.2, 0.1}, 1);
  EXPECT_EQ(count(partial.train), 3);
  EXPECT_EQ(count(partial.val), 2);
  EXPECT_EQ(count(partial.test), 1);
}

TEST(Split, Deterministic) {
  const VertexMasks a = split_vertices(100, {}, 5);
  const VertexMasks b = split_vertices(100, {}, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_THROW(split_vertices(10, {0.6, 0.3, 0.3}, 1), ParameterError);
  EXPECT_THROW(split_vertices(10, {-0.1, 0.3, 0.3}, 1), ParameterError);
}

TEST(Graph, MakeGraphDropsLoopsAndDuplicates) {
  const Graph g = make_graph(4, {{1, 0}, {0, 1}, {2, 2}, {2, 3}});
  EXPECT_EQ(g.edges, (std::vector<std::pair<int, int>>{{0, 1}, {2, 3}}));
  EXPECT_THROW(make_graph(3, {{0, 5}}), ParameterError);
}

}  // namespace
}  // namespace gnnprop
