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

// Graph file format, version 1. A JSON object whose keys appear in this order:
//
//   "format"        "gnnprop-graph"
//   "version"       1
//   "num_vertices"  |V|
//   "num_features"  n0
//   "num_classes"   k
//   "edges"         [[u, v], ...]    0-based, u != v, each pair once
//   "features"      [[x_00, ...], ...] |V| rows of n0 reals
//   "labels"        [c_0, ...]         |V| integers in [0, k)
//   "masks"         {"train": [0|1 ...], "val": [...], "test": [...]}
//
// Doubles are written in shortest round-trip form, so save -> load is exact
// and repeated saves of one graph are byte-identical.

#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "gnnprop/errors.hpp"
#include "gnnprop/graph.hpp"
#include "json.hpp"

namespace gnnprop {

inline constexpr int kGraphFormatVersion = 1;

inline nlohmann::ordered_json graph_to_json(const Graph& g) {
  nlohmann::ordered_json j;
  j["format"] = "gnnprop-graph";
  j["version"] = kGraphFormatVersion;
  j["num_vertices"] = g.num_vertices;
  j["num_features"] = g.num_features();
  j["num_classes"] = g.num_classes;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [u, v] : g.edges) edges.push_back({u, v});
  j["edges"] = std::move(edges);
  auto features = nlohmann::ordered_json::array();
  for (int v = 0; v < g.num_vertices; ++v) {
    auto row = nlohmann::ordered_json::array();
    for (int c = 0; c < g.num_features(); ++c) row.push_back(g.features(v, c));
    features.push_back(std::move(row));
  }
  j["features"] = std::move(features);
  j["labels"] = g.labels;
  const auto bits = [&](const std::vector<bool>& m) {
    std::vector<int> out(g.num_vertices, 0);
    for (std::size_t v = 0; v < m.size(); ++v) out[v] = m[v] ? 1 : 0;
    return out;
  };
  j["masks"]["train"] = bits(g.masks.train);
  j["masks"]["val"] = bits(g.masks.val);
  j["masks"]["test"] = bits(g.masks.test);
  return j;
}

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& j,
                                     const std::string& key) {
  if (!j.is_object() || !j.contains(key)) {
    throw LoadError("missing field '" + key + "'");
  }
  return j.at(key);
}

inline long long require_int(const nlohmann::json& j, const std::string& key) {
  const auto& v = require(j, key);
  if (!v.is_number_integer()) {
    throw LoadError("field '" + key + "' must be an integer");
  }
  return v.get<long long>();
}

inline std::vector<bool> parse_mask(const nlohmann::json& masks,
                                    const std::string& name, int n) {
  const std::string field = "masks." + name;
  if (!masks.contains(name)) throw LoadError("missing field '" + field + "'");
  const auto& arr = masks.at(name);
  if (!arr.is_array() || static_cast<int>(arr.size()) != n) {
    throw LoadError("field '" + field + "' must hold num_vertices entries");
  }
  std::vector<bool> out(n);
  for (int v = 0; v < n; ++v) {
    if (!arr[v].is_number_integer() ||
        (arr[v].get<int>() != 0 && arr[v].get<int>() != 1)) {
      throw LoadError("field '" + field + "[" + std::to_string(v) +
                      "]' must be 0 or 1");
    }
    out[v] = arr[v].get<int>() == 1;
  }
  return out;
}

}  // namespace detail

inline Graph graph_from_json(const nlohmann::json& j) {
  using detail::require;
  using detail::require_int;
  if (!j.is_object()) throw LoadError("graph file: top level must be object");
  if (require(j, "format") != "gnnprop-graph") {
    throw LoadError("field 'format' must be \"gnnprop-graph\"");
  }
  const long long version = require_int(j, "version");
  if (version != kGraphFormatVersion) {
    throw LoadError("field 'version': unsupported version " +
                    std::to_string(version));
  }
  Graph g;
  const long long n = require_int(j, "num_vertices");
  const long long n0 = require_int(j, "num_features");
  const long long k = require_int(j, "num_classes");
  if (n <= 0) throw LoadError("field 'num_vertices' must be positive");
  if (n0 < 0) throw LoadError("field 'num_features' must be nonnegative");
  if (k <= 0) throw LoadError("field 'num_classes' must be positive");
  g.num_vertices = static_cast<int>(n);
  g.num_classes = static_cast<int>(k);

  const auto& edges = require(j, "edges");
  if (!edges.is_array()) throw LoadError("field 'edges' must be an array");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string field = "edges[" + std::to_string(e) + "]";
    const auto& pair = edges[e];
    if (!pair.is_array() || pair.size() != 2 ||
        !pair[0].is_number_integer() || !pair[1].is_number_integer()) {
      throw LoadError("field '" + field + "' must be a pair of integers");
    }
    const long long u = pair[0].get<long long>();
    const long long v = pair[1].get<long long>();
    if (u < 0 || v < 0 || u >= n || v >= n) {
      throw LoadError("field '" + field + "' references a vertex outside [0, " +
                      std::to_string(n) + ")");
    }
    if (u == v) throw LoadError("field '" + field + "' is a self-loop");
    g.edges.emplace_back(static_cast<int>(std::min(u, v)),
                         static_cast<int>(std::max(u, v)));
  }
  std::sort(g.edges.begin(), g.edges.end());
  if (std::adjacent_find(g.edges.begin(), g.edges.end()) != g.edges.end()) {
    throw LoadError("field 'edges' contains a duplicate pair");
  }

  const auto& features = require(j, "features");
  if (!features.is_array() || static_cast<long long>(features.size()) != n) {
    throw LoadError("field 'features' must hold num_vertices rows");
  }
  g.features.resize(n, n0);
  for (long long v = 0; v < n; ++v) {
    const auto& row = features[v];
    if (!row.is_array() || static_cast<long long>(row.size()) != n0) {
      throw LoadError("field 'features[" + std::to_string(v) +
                      "]' must hold num_features values");
    }
    for (long long c = 0; c < n0; ++c) {
      if (!row[c].is_number()) {
        throw LoadError("field 'features[" + std::to_string(v) + "][" +
                        std::to_string(c) + "]' must be a number");
      }
      g.features(v, c) = row[c].get<double>();
    }
  }
  if (!g.features.allFinite()) {
    throw LoadError("field 'features' contains a non-finite value");
  }

  const auto& labels = require(j, "labels");
  if (!labels.is_array() || static_cast<long long>(labels.size()) != n) {
    throw LoadError("field 'labels' must hold num_vertices entries");
  }
  g.labels.resize(n);
  for (long long v = 0; v < n; ++v) {
    if (!labels[v].is_number_integer()) {
      throw LoadError("field 'labels[" + std::to_string(v) +
                      "]' must be an integer");
    }
    const long long c = labels[v].get<long long>();
    if (c < 0 || c >= k) {
      throw LoadError("field 'labels[" + std::to_string(v) + "]' value " +
                      std::to_string(c) + " outside [0, " + std::to_string(k) +
                      ")");
    }
    g.labels[v] = static_cast<int>(c);
  }

  const auto& masks = require(j, "masks");
  if (!masks.is_object()) throw LoadError("field 'masks' must be an object");
  g.masks.train = detail::parse_mask(masks, "train", g.num_vertices);
  g.masks.val = detail::parse_mask(masks, "val", g.num_vertices);
  g.masks.test = detail::parse_mask(masks, "test", g.num_vertices);
  for (int v = 0; v < g.num_vertices; ++v) {
    if (g.masks.train[v] + g.masks.val[v] + g.masks.test[v] > 1) {
      throw LoadError("field 'masks': vertex " + std::to_string(v) +
                      " appears in more than one mask");
    }
  }
  return g;
}

inline std::string serialize_graph(const Graph& g) {
  return graph_to_json(g).dump() + "\n";
}

inline void save_graph(const Graph& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << serialize_graph(g);
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline Graph parse_graph(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError(std::string("graph file is not valid JSON: ") + e.what());
  }
  return graph_from_json(j);
}

inline Graph load_graph(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open graph file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_graph(buffer.str());
}

}  // namespace gnnprop
