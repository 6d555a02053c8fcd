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

// Experiment files: a JSON description of the dataset, the architecture grid
// and the diagnostics, training and verification settings. Grids are explicit
// lists; the configurations of one architecture block are the cross product
// of its lists, and blocks are concatenated.
//
//   {
//     "format": "gnnprop-experiment", "version": 1, "master_seed": 7,
//     "dataset": {"ssbm": {"n": 800, "k": 2, "a": 8, "b": 1.5},
//                 "features": {"n0": 8, "separation": 4.0},
//                 "split": {"train": 0.5, "val": 0.25, "test": 0.25}},
//     "architectures": [{"name": "vanilla", "mode": "vanilla",
//                        "depths": [2, 8], "width": 64, "t": [1.0],
//                        "beta": [0.0], "init": ["he_gnn", "explicit:1.0"]}],
//     "diagnostics": {"draws": 200, "gradient": false},
//     "training": {"task": "regression", "lrs": [0.01], "max_steps": 800,
//                  "seeds": 15, "protocol": "performance"},
//     "verify": {"lemma_samples": 100000, "samples": 200}
//   }
//
// A dataset may instead name a graph file: {"file": "graph.json"}, resolved
// relative to the experiment file.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gnnprop/errors.hpp"
#include "gnnprop/graph.hpp"
#include "gnnprop/graph_io.hpp"
#include "gnnprop/network.hpp"
#include "gnnprop/spectral.hpp"
#include "gnnprop/trainer.hpp"
#include "json.hpp"

namespace gnnprop {

inline constexpr int kExperimentFormatVersion = 1;

struct DatasetSpec {
  std::string file;  // graph file; when empty the SSBM below is generated
  int n = 800;
  int k = 2;
  double a = 8.0;
  double b = 1.5;
  int n0 = 8;
  double separation = 4.0;
  SplitFractions split;
  bool self_loops = true;
};

struct ArchitectureGrid {
  std::string name = "default";
  std::string mode = "vanilla";  // or "residual"
  std::vector<int> depths = {4};
  int width = 64;
  int output_width = 0;  // 0: number of classes
  std::vector<double> t = {1.0};
  std::vector<double> beta = {0.0};
  std::vector<InitScheme> inits = {InitScheme::he_gnn()};
};

struct DiagnosticsSpec {
  int draws = 200;
  bool condition_number = true;
  bool gradient = false;
  int gradient_coordinates = 256;
};

struct TrainingSpec {
  Task task = Task::kRegression;
  std::vector<double> lrs = {0.01};
  int max_steps = 800;
  std::optional<LrDrop> lr_drop;
  int seeds = 15;
  Protocol protocol = Protocol::kPerformance;
  std::optional<double> threshold;  // absent: linear baseline on the graph
};

struct VerifySpec {
  int lemma_samples = 100000;
  int samples = 200;
  int covariances = 100;
  int graphs = 20;
};

struct ExperimentSpec {
  std::uint64_t master_seed = 1;
  DatasetSpec dataset;
  std::vector<ArchitectureGrid> architectures = {ArchitectureGrid{}};
  DiagnosticsSpec diagnostics;
  TrainingSpec training;
  VerifySpec verify;
  std::string base_dir;  // directory of the spec file, for relative paths
};

// "he_gnn", "uniform_baseline" or "explicit:<c>".
inline InitScheme parse_init(const std::string& s) {
  if (s == "he_gnn") return InitScheme::he_gnn();
  if (s == "uniform_baseline") return InitScheme::uniform_baseline();
  if (s.rfind("explicit:", 0) == 0) {
    const std::string num = s.substr(9);
    std::size_t used = 0;
    double c = 0.0;
    try {
      c = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size() || !(c > 0.0)) {
      throw ParameterError("init '" + s + "': explicit scale must be positive");
    }
    return InitScheme::explicit_scale(c);
  }
  throw ParameterError("unknown init scheme '" + s + "'");
}

inline std::string format_init(const InitScheme& s) {
  switch (s.kind) {
    case InitKind::kHeGnn:
      return "he_gnn";
    case InitKind::kUniformBaseline:
      return "uniform_baseline";
    case InitKind::kExplicit: {
      std::ostringstream os;
      os.precision(17);
      os << "explicit:" << s.scale;
      return os.str();
    }
  }
  return "?";
}

namespace detail {

using json = nlohmann::json;

class SpecReader {
 public:
  SpecReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  SpecReader child(const std::string& key) const {
    return SpecReader(at(key), name(key));
  }

  const json& at(const std::string& key) const {
    if (!j_.contains(key)) throw ParameterError("spec: missing field '" + name(key) + "'");
    return j_.at(key);
  }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    if (!j_.contains(key)) return fallback;
    return convert<T>(j_.at(key), name(key));
  }

  template <typename T>
  std::vector<T> list(const std::string& key, std::vector<T> fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array() || v.empty()) {
      throw ParameterError("spec: field '" + name(key) + "' must be a nonempty list");
    }
    std::vector<T> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(convert<T>(v[i], name(key) + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  void reject_unknown(std::initializer_list<const char*> known) const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool ok = false;
      for (const char* k : known) ok = ok || it.key() == k;
      if (!ok) throw ParameterError("spec: unknown field '" + name(it.key()) + "'");
    }
  }

 private:
  template <typename T>
  static T convert(const json& v, const std::string& field) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ParameterError("spec: '" + field + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ParameterError("spec: '" + field + "' must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) {
        throw ParameterError("spec: '" + field + "' must be an integer");
      }
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<long long>() < 0) {
          throw ParameterError("spec: '" + field + "' must be nonnegative");
        }
      }
      return v.get<T>();
    } else {
      if (!v.is_number()) throw ParameterError("spec: '" + field + "' must be a number");
      return v.get<T>();
    }
  }

  void fail(const std::string& what) const {
    throw ParameterError("spec: '" + path_ + "' " + what);
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& j_;
  std::string path_;
};

}  // namespace detail

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  using detail::SpecReader;
  const SpecReader top(j, "");
  top.reject_unknown({"format", "version", "master_seed", "dataset",
                      "architectures", "diagnostics", "training", "verify"});
  if (top.get<std::string>("format", "") != "gnnprop-experiment") {
    throw ParameterError("spec: field 'format' must be \"gnnprop-experiment\"");
  }
  const int version = top.get<int>("version", -1);
  if (version != kExperimentFormatVersion) {
    throw ParameterError("spec: unsupported version " + std::to_string(version));
  }
  ExperimentSpec s;
  s.master_seed = top.get<std::uint64_t>("master_seed", s.master_seed);

  if (top.has("dataset")) {
    const SpecReader d = top.child("dataset");
    d.reject_unknown({"file", "ssbm", "features", "split", "self_loops"});
    DatasetSpec& ds = s.dataset;
    ds.file = d.get<std::string>("file", "");
    if (d.has("ssbm")) {
      if (!ds.file.empty()) {
        throw ParameterError("spec: dataset takes either 'file' or 'ssbm'");
      }
      const SpecReader g = d.child("ssbm");
      g.reject_unknown({"n", "k", "a", "b"});
      ds.n = g.get<int>("n", ds.n);
      ds.k = g.get<int>("k", ds.k);
      ds.a = g.get<double>("a", ds.a);
      ds.b = g.get<double>("b", ds.b);
    }
    if (d.has("features")) {
      const SpecReader f = d.child("features");
      f.reject_unknown({"n0", "separation"});
      ds.n0 = f.get<int>("n0", ds.n0);
      ds.separation = f.get<double>("separation", ds.separation);
    }
    if (d.has("split")) {
      const SpecReader f = d.child("split");
      f.reject_unknown({"train", "val", "test"});
      ds.split.train = f.get<double>("train", ds.split.train);
      ds.split.val = f.get<double>("val", ds.split.val);
      ds.split.test = f.get<double>("test", ds.split.test);
    }
    ds.self_loops = d.get<bool>("self_loops", ds.self_loops);
  }

  if (top.has("architectures")) {
    const auto& arr = top.at("architectures");
    if (!arr.is_array() || arr.empty()) {
      throw ParameterError("spec: 'architectures' must be a nonempty list");
    }
    s.architectures.clear();
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const SpecReader a(arr[i], "architectures[" + std::to_string(i) + "]");
      a.reject_unknown({"name", "mode", "depths", "width", "output_width", "t",
                        "beta", "init"});
      ArchitectureGrid g;
      g.name = a.get<std::string>("name", "arch" + std::to_string(i));
      g.mode = a.get<std::string>("mode", g.mode);
      if (g.mode != "vanilla" && g.mode != "residual") {
        throw ParameterError("spec: mode must be \"vanilla\" or \"residual\"");
      }
      g.depths = a.list<int>("depths", g.depths);
      g.width = a.get<int>("width", g.width);
      g.output_width = a.get<int>("output_width", g.output_width);
      g.t = a.list<double>("t", g.t);
      g.beta = a.list<double>("beta", g.beta);
      g.inits.clear();
      for (const auto& name : a.list<std::string>("init", {"he_gnn"})) {
        g.inits.push_back(parse_init(name));
      }
      for (int depth : g.depths) {
        if (depth < 1) throw ParameterError("spec: depths must be >= 1");
      }
      if (g.width < 1 || g.output_width < 0) {
        throw ParameterError("spec: widths must be positive");
      }
      for (double t : g.t) {
        if (!(t >= 0.0 && t <= 1.0)) throw ParameterError("spec: t must lie in [0, 1]");
      }
      for (double b : g.beta) {
        if (!(b >= 0.0)) throw ParameterError("spec: beta must be >= 0");
      }
      s.architectures.push_back(std::move(g));
    }
  }

  if (top.has("diagnostics")) {
    const SpecReader d = top.child("diagnostics");
    d.reject_unknown({"draws", "condition_number", "gradient", "gradient_coordinates"});
    s.diagnostics.draws = d.get<int>("draws", s.diagnostics.draws);
    s.diagnostics.condition_number =
        d.get<bool>("condition_number", s.diagnostics.condition_number);
    s.diagnostics.gradient = d.get<bool>("gradient", s.diagnostics.gradient);
    s.diagnostics.gradient_coordinates =
        d.get<int>("gradient_coordinates", s.diagnostics.gradient_coordinates);
    if (s.diagnostics.draws < 1) throw ParameterError("spec: draws must be >= 1");
  }

  if (top.has("training")) {
    const SpecReader t = top.child("training");
    t.reject_unknown({"task", "lrs", "max_steps", "lr_drop", "seeds", "protocol",
                      "threshold"});
    TrainingSpec& ts = s.training;
    const std::string task = t.get<std::string>("task", to_string(ts.task));
    if (task == "classification") {
      ts.task = Task::kClassification;
    } else if (task == "regression") {
      ts.task = Task::kRegression;
    } else {
      throw ParameterError("spec: unknown task '" + task + "'");
    }
    ts.lrs = t.list<double>("lrs", ts.lrs);
    for (double lr : ts.lrs) {
      if (!(lr > 0.0)) throw ParameterError("spec: learning rates must be positive");
    }
    ts.max_steps = t.get<int>("max_steps", ts.max_steps);
    if (ts.max_steps < 1) throw ParameterError("spec: max_steps must be >= 1");
    if (t.has("lr_drop")) {
      const SpecReader d = t.child("lr_drop");
      d.reject_unknown({"factor", "step"});
      LrDrop drop;
      drop.factor = d.get<double>("factor", drop.factor);
      drop.step = d.get<int>("step", drop.step);
      ts.lr_drop = drop;
    }
    ts.seeds = t.get<int>("seeds", ts.seeds);
    if (ts.seeds < 1) throw ParameterError("spec: seeds must be >= 1");
    const std::string protocol = t.get<std::string>("protocol", to_string(ts.protocol));
    if (protocol == "performance") {
      ts.protocol = Protocol::kPerformance;
    } else if (protocol == "time_to_train") {
      ts.protocol = Protocol::kTimeToTrain;
    } else {
      throw ParameterError("spec: unknown protocol '" + protocol + "'");
    }
    if (t.has("threshold")) ts.threshold = t.get<double>("threshold", 0.0);
  }

  if (top.has("verify")) {
    const SpecReader v = top.child("verify");
    v.reject_unknown({"lemma_samples", "samples", "covariances", "graphs"});
    s.verify.lemma_samples = v.get<int>("lemma_samples", s.verify.lemma_samples);
    s.verify.samples = v.get<int>("samples", s.verify.samples);
    s.verify.covariances = v.get<int>("covariances", s.verify.covariances);
    s.verify.graphs = v.get<int>("graphs", s.verify.graphs);
  }
  return s;
}

inline nlohmann::ordered_json spec_to_json(const ExperimentSpec& s) {
  nlohmann::ordered_json j;
  j["format"] = "gnnprop-experiment";
  j["version"] = kExperimentFormatVersion;
  j["master_seed"] = s.master_seed;
  auto& d = j["dataset"];
  if (!s.dataset.file.empty()) {
    d["file"] = s.dataset.file;
  } else {
    d["ssbm"] = {{"n", s.dataset.n}, {"k", s.dataset.k}, {"a", s.dataset.a},
                 {"b", s.dataset.b}};
    d["features"] = {{"n0", s.dataset.n0}, {"separation", s.dataset.separation}};
    d["split"] = {{"train", s.dataset.split.train},
                  {"val", s.dataset.split.val},
                  {"test", s.dataset.split.test}};
  }
  d["self_loops"] = s.dataset.self_loops;
  auto archs = nlohmann::ordered_json::array();
  for (const auto& g : s.architectures) {
    nlohmann::ordered_json a;
    a["name"] = g.name;
    a["mode"] = g.mode;
    a["depths"] = g.depths;
    a["width"] = g.width;
    a["output_width"] = g.output_width;
    a["t"] = g.t;
    a["beta"] = g.beta;
    auto inits = nlohmann::ordered_json::array();
    for (const auto& i : g.inits) inits.push_back(format_init(i));
    a["init"] = inits;
    archs.push_back(a);
  }
  j["architectures"] = archs;
  j["diagnostics"] = {{"draws", s.diagnostics.draws},
                      {"condition_number", s.diagnostics.condition_number},
                      {"gradient", s.diagnostics.gradient},
                      {"gradient_coordinates", s.diagnostics.gradient_coordinates}};
  auto& t = j["training"];
  t["task"] = to_string(s.training.task);
  t["lrs"] = s.training.lrs;
  t["max_steps"] = s.training.max_steps;
  if (s.training.lr_drop) {
    t["lr_drop"] = {{"factor", s.training.lr_drop->factor},
                    {"step", s.training.lr_drop->step}};
  }
  t["seeds"] = s.training.seeds;
  t["protocol"] = to_string(s.training.protocol);
  if (s.training.threshold) t["threshold"] = *s.training.threshold;
  j["verify"] = {{"lemma_samples", s.verify.lemma_samples},
                 {"samples", s.verify.samples},
                 {"covariances", s.verify.covariances},
                 {"graphs", s.verify.graphs}};
  return j;
}

inline ExperimentSpec parse_spec(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError(std::string("spec is not valid JSON: ") + e.what());
  }
  return spec_from_json(j);
}

inline ExperimentSpec load_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open spec file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentSpec s = parse_spec(buffer.str());
  s.base_dir = std::filesystem::path(path).parent_path().string();
  return s;
}

// Seed tags for the streams derived from the master seed.
inline constexpr std::uint64_t kTagGraph = 0x67726170;     // "grap"
inline constexpr std::uint64_t kTagFeatures = 0x66656174;  // "feat"
inline constexpr std::uint64_t kTagSplit = 0x73706c74;     // "splt"
inline constexpr std::uint64_t kTagDiagnose = 0x64696167;  // "diag"
inline constexpr std::uint64_t kTagTrain = 0x7472616e;     // "tran"
inline constexpr std::uint64_t kTagBaseline = 0x6c696e65;  // "line"

struct DatasetSeeds {
  std::uint64_t graph = 0;
  std::uint64_t features = 0;
  std::uint64_t split = 0;
};

inline DatasetSeeds dataset_seeds(std::uint64_t master) {
  return {derive_seed(master, kTagGraph, 0), derive_seed(master, kTagFeatures, 0),
          derive_seed(master, kTagSplit, 0)};
}

inline Graph build_dataset(const ExperimentSpec& s) {
  const DatasetSpec& d = s.dataset;
  if (!d.file.empty()) {
    std::filesystem::path path(d.file);
    if (path.is_relative() && !s.base_dir.empty()) path = s.base_dir / path;
    return load_graph(path.string());
  }
  const DatasetSeeds seeds = dataset_seeds(s.master_seed);
  Graph g = generate_ssbm({d.n, d.k, d.a, d.b, seeds.graph});
  g = synthesize_features(std::move(g), d.n0, d.separation, seeds.features);
  return split_vertices(std::move(g), d.split, seeds.split);
}

// One point of an architecture grid.
struct ModelConfig {
  std::string group;
  std::string mode;
  int depth = 1;
  int width = 64;
  int output_width = 2;
  double t = 1.0;
  double beta = 0.0;
  InitScheme init;
  double lr = 0.0;  // 0 outside training

  bool residual() const { return mode == "residual"; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["group"] = group;
    j["mode"] = mode;
    j["depth"] = depth;
    j["width"] = width;
    j["output_width"] = output_width;
    j["t"] = t;
    j["beta"] = residual() ? beta : 0.0;
    j["init"] = format_init(init);
    j["lr"] = lr;
    return j;
  }

  std::string id() const {
    std::ostringstream os;
    os << group << "/" << mode << "/L" << depth << "/n" << width << "/t" << t;
    if (residual()) os << "/b" << beta;
    os << "/" << format_init(init);
    if (lr > 0.0) os << "/lr" << lr;
    return os.str();
  }

  double cw_scale() const {
    return init.kind == InitKind::kUniformBaseline ? 2.0 / 3.0 : init.scale;
  }
};

// FNV-1a over the canonical (key-sorted) JSON of the configuration, mixed
// with the master seed and the dataset description.
inline std::uint64_t config_hash(const ModelConfig& c, const ExperimentSpec& s) {
  nlohmann::json j = c.to_json();
  j["master_seed"] = s.master_seed;
  j["dataset"] = spec_to_json(s)["dataset"];
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Configurations in declaration order: blocks, then depth, t, beta, init and
// (when `with_lr`) learning rate, the last varying fastest.
inline std::vector<ModelConfig> expand_grid(const ExperimentSpec& s,
                                            int num_classes, bool with_lr) {
  std::vector<ModelConfig> out;
  const std::vector<double> lrs = with_lr ? s.training.lrs : std::vector<double>{0.0};
  for (const auto& g : s.architectures) {
    const std::vector<double> betas =
        g.mode == "residual" ? g.beta : std::vector<double>{0.0};
    for (int depth : g.depths) {
      for (double t : g.t) {
        for (double beta : betas) {
          for (const auto& init : g.inits) {
            for (double lr : lrs) {
              ModelConfig c;
              c.group = g.name;
              c.mode = g.mode;
              c.depth = depth;
              c.width = g.width;
              c.output_width = g.output_width > 0 ? g.output_width : num_classes;
              c.t = t;
              c.beta = beta;
              c.init = init;
              c.lr = lr;
              out.push_back(c);
            }
          }
        }
      }
    }
  }
  return out;
}

// Residual operators (1 - t) I + t P, shared across configurations.
class OperatorCache {
 public:
  explicit OperatorCache(OperatorPtr base) : base_(std::move(base)) {}

  const OperatorPtr& base() const { return base_; }

  OperatorPtr get(double t) {
    if (t == 1.0) return base_;
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    OperatorPtr p = residual_operator(*base_, t);
    cache_.emplace(t, p);
    return p;
  }

 private:
  OperatorPtr base_;
  std::map<double, OperatorPtr> cache_;
};

inline Architecture build_architecture(const ModelConfig& c, int n0,
                                       OperatorCache& ops) {
  const auto layers = repeat_operator(ops.get(c.t), c.depth);
  if (c.residual()) {
    return Architecture::residual_net(c.depth, n0, c.width, c.output_width, layers,
                                      std::vector<double>(c.depth, c.beta));
  }
  return Architecture::vanilla(c.depth, n0, c.width, c.output_width, layers);
}

}  // namespace gnnprop
