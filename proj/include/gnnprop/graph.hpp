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

// Graphs with vertex features, class labels and train/val/test masks, plus
// the symmetric stochastic block model used for synthetic benchmarks.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gnnprop/errors.hpp"
#include "gnnprop/rng.hpp"

namespace gnnprop {

struct VertexMasks {
  std::vector<bool> train;
  std::vector<bool> val;
  std::vector<bool> test;

  static std::size_t count(const std::vector<bool>& mask) {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  }
};

// Undirected simple graph. Edges are stored once as (u, v) with u < v, sorted
// and deduplicated; self-loops are never stored (operator construction adds
// them). Labels are 0-based class indices.
struct Graph {
  int num_vertices = 0;
  int num_classes = 0;
  std::vector<std::pair<int, int>> edges;
  Eigen::MatrixXd features;  // num_vertices x n0, possibly 0 columns
  std::vector<int> labels;
  VertexMasks masks;

  int num_features() const { return static_cast<int>(features.cols()); }

  // Throws ParameterError naming the first violated invariant.
  void validate() const {
    if (num_vertices <= 0) {
      throw ParameterError("num_vertices must be positive");
    }
    if (num_classes <= 0) {
      throw ParameterError("num_classes must be positive");
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const auto [u, v] = edges[e];
      if (u < 0 || v < 0 || u >= num_vertices || v >= num_vertices) {
        throw ParameterError("edges[" + std::to_string(e) +
                             "]: vertex index out of range");
      }
      if (u == v) {
        throw ParameterError("edges[" + std::to_string(e) + "]: self-loop");
      }
      if (u > v) {
        throw ParameterError("edges[" + std::to_string(e) +
                             "]: expected u < v");
      }
      if (e > 0 && edges[e - 1] >= edges[e]) {
        throw ParameterError("edges[" + std::to_string(e) +
                             "]: not sorted or duplicated");
      }
    }
    if (features.rows() != num_vertices) {
      throw ParameterError("features: expected " +
                           std::to_string(num_vertices) + " rows");
    }
    if (!features.allFinite()) {
      throw ParameterError("features: non-finite entry");
    }
    if (static_cast<int>(labels.size()) != num_vertices) {
      throw ParameterError("labels: expected one label per vertex");
    }
    for (int v = 0; v < num_vertices; ++v) {
      if (labels[v] < 0 || labels[v] >= num_classes) {
        throw ParameterError("labels[" + std::to_string(v) +
                             "]: out of range [0, " +
                             std::to_string(num_classes) + ")");
      }
    }
    const auto check_mask = [&](const std::vector<bool>& m, const char* name) {
      if (!m.empty() && static_cast<int>(m.size()) != num_vertices) {
        throw ParameterError(std::string("masks.") + name +
                             ": expected one entry per vertex");
      }
    };
    check_mask(masks.train, "train");
    check_mask(masks.val, "val");
    check_mask(masks.test, "test");
    if (!masks.train.empty() && !masks.val.empty() && !masks.test.empty()) {
      for (int v = 0; v < num_vertices; ++v) {
        if (masks.train[v] + masks.val[v] + masks.test[v] > 1) {
          throw ParameterError("masks: vertex " + std::to_string(v) +
                               " is in more than one mask");
        }
      }
    }
  }

  std::vector<int> degrees() const {
    std::vector<int> deg(num_vertices, 0);
    for (const auto& [u, v] : edges) {
      ++deg[u];
      ++deg[v];
    }
    return deg;
  }
};

// Symmetric stochastic block model: in-class pairs are joined with
// probability a log(n)/n and cross-class pairs with probability b log(n)/n.
struct SSBMParams {
  int n = 0;
  int k = 2;
  double a = 0.0;
  double b = 0.0;
  std::uint64_t seed = 0;

  double p_in() const { return a * std::log(static_cast<double>(n)) / n; }
  double p_out() const { return b * std::log(static_cast<double>(n)) / n; }

  void validate() const {
    if (n <= 0) throw ParameterError("ssbm: n must be positive");
    if (k < 1) throw ParameterError("ssbm: k must be at least 1");
    if (!(b >= 0.0)) throw ParameterError("ssbm: b must be nonnegative");
    if (!(a >= b)) throw ParameterError("ssbm: requires a >= b");
    if (p_in() > 1.0) {
      throw ParameterError("ssbm: in-class probability a*log(n)/n exceeds 1");
    }
    if (p_out() > 1.0) {
      throw ParameterError(
          "ssbm: cross-class probability b*log(n)/n exceeds 1");
    }
  }
};

// Labels are drawn independently and uniformly over the k classes, then every
// vertex pair is an independent Bernoulli trial. Features are left empty and
// no masks are assigned.
inline Graph generate_ssbm(const SSBMParams& params) {
  params.validate();
  Graph g;
  g.num_vertices = params.n;
  g.num_classes = params.k;
  g.labels.resize(params.n);
  g.features.resize(params.n, 0);

  Philox4x32 rng = make_stream(params.seed, StreamPurpose::kGraph, 0);
  for (int v = 0; v < params.n; ++v) {
    g.labels[v] = static_cast<int>(uniform_index(rng, params.k));
  }
  const double p_in = params.p_in();
  const double p_out = params.p_out();
  for (int u = 0; u < params.n; ++u) {
    for (int v = u + 1; v < params.n; ++v) {
      const double p = g.labels[u] == g.labels[v] ? p_in : p_out;
      if (uniform01(rng) < p) {
        g.edges.emplace_back(u, v);
      }
    }
  }
  return g;
}

enum class RecoveryRegime { kExact, kNone };

// Exact recovery threshold of the two-community SSBM:
// |sqrt(a) - sqrt(b)| > sqrt(2).
inline RecoveryRegime recovery_regime(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) {
    throw ParameterError("recovery_regime: a and b must be nonnegative");
  }
  return std::abs(std::sqrt(a) - std::sqrt(b)) > std::sqrt(2.0)
             ? RecoveryRegime::kExact
             : RecoveryRegime::kNone;
}

inline const char* to_string(RecoveryRegime regime) {
  return regime == RecoveryRegime::kExact ? "Exact" : "None";
}

// Gaussian class-mean features. Class c is centered at a mean m_c with
// |m_c - m_c'| = class_separation for every pair, the means sum to zero, and
// noise has identity covariance. Each row is then scaled to unit L2 norm.
//
// For k = 2 the means are +/- (separation / 2) e_1; for k > 2 they are the
// centered scaled simplex (separation / sqrt 2)(e_c - mean_c e_c), which needs
// n0 >= k.
inline Graph synthesize_features(Graph graph, int n0, double class_separation,
                                 std::uint64_t seed) {
  if (n0 < 1) throw ParameterError("synthesize_features: n0 must be >= 1");
  if (!(class_separation >= 0.0)) {
    throw ParameterError("synthesize_features: separation must be >= 0");
  }
  const int k = graph.num_classes;
  if (k > 2 && n0 < k) {
    throw ParameterError("synthesize_features: n0 must be >= k for k > 2");
  }
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, n0);
  if (k == 2) {
    means(0, 0) = 0.5 * class_separation;
    means(1, 0) = -0.5 * class_separation;
  } else if (k > 2) {
    const double scale = class_separation / std::sqrt(2.0);
    for (int c = 0; c < k; ++c) {
      for (int j = 0; j < k; ++j) {
        means(c, j) = scale * ((c == j ? 1.0 : 0.0) - 1.0 / k);
      }
    }
  }

  Philox4x32 rng = make_stream(seed, StreamPurpose::kFeatures, 0);
  graph.features.resize(graph.num_vertices, n0);
  for (int v = 0; v < graph.num_vertices; ++v) {
    for (int j = 0; j < n0; ++j) {
      graph.features(v, j) = means(graph.labels[v], j) + standard_normal(rng);
    }
    const double norm = graph.features.row(v).norm();
    if (!(norm > 0.0)) {
      throw NumericError("synthesize_features: zero feature row at vertex " +
                         std::to_string(v));
    }
    graph.features.row(v) /= norm;
  }
  return graph;
}

struct SplitFractions {
  double train = 0.5;
  double val = 0.25;
  double test = 0.25;
};

// Uniformly random disjoint masks of sizes floor(n * fraction). When the
// fractions sum to one, the rounding remainder goes to train.
inline VertexMasks split_vertices(int num_vertices, SplitFractions fractions,
                                  std::uint64_t seed) {
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0) {
    throw ParameterError("split_vertices: fractions must be nonnegative");
  }
  const double total = fractions.train + fractions.val + fractions.test;
  if (total > 1.0 + 1e-12) {
    throw ParameterError("split_vertices: fractions sum above 1");
  }
  const int n = num_vertices;
  const int n_val = static_cast<int>(std::floor(n * fractions.val + 1e-9));
  const int n_test = static_cast<int>(std::floor(n * fractions.test + 1e-9));
  int n_train = static_cast<int>(std::floor(n * fractions.train + 1e-9));
  if (std::abs(total - 1.0) <= 1e-12) {
    n_train = n - n_val - n_test;
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Philox4x32 rng = make_stream(seed, StreamPurpose::kSplit, 0);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(uniform_index(rng, i + 1));
    std::swap(order[i], order[j]);
  }

  VertexMasks masks;
  masks.train.assign(n, false);
  masks.val.assign(n, false);
  masks.test.assign(n, false);
  int pos = 0;
  for (int i = 0; i < n_train; ++i) masks.train[order[pos++]] = true;
  for (int i = 0; i < n_val; ++i) masks.val[order[pos++]] = true;
  for (int i = 0; i < n_test; ++i) masks.test[order[pos++]] = true;
  return masks;
}

inline Graph split_vertices(Graph graph, SplitFractions fractions,
                            std::uint64_t seed) {
  graph.masks = split_vertices(graph.num_vertices, fractions, seed);
  return graph;
}

// Builds a validated graph from an arbitrary undirected edge list; self-loops
// are dropped and duplicates merged.
inline Graph make_graph(int num_vertices,
                        std::vector<std::pair<int, int>> edge_list,
                        int num_classes = 1) {
  Graph g;
  g.num_vertices = num_vertices;
  g.num_classes = num_classes;
  for (auto& [u, v] : edge_list) {
    if (u > v) std::swap(u, v);
  }
  std::erase_if(edge_list, [](const auto& e) { return e.first == e.second; });
  std::sort(edge_list.begin(), edge_list.end());
  edge_list.erase(std::unique(edge_list.begin(), edge_list.end()),
                  edge_list.end());
  g.edges = std::move(edge_list);
  g.labels.assign(num_vertices, 0);
  g.features.resize(num_vertices, 0);
  g.validate();
  return g;
}

}  // namespace gnnprop
