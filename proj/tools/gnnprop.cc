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

// gnnprop command line: generate, diagnose, verify-theory, train, sweep.
//
// Exit codes: 0 success, 1 verification failed, 2 bad spec or parameters,
// 3 numeric failure, 4 file I/O.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gnnprop/csv.hpp"
#include "gnnprop/diagnostics.hpp"
#include "gnnprop/experiment.hpp"
#include "gnnprop/graph_io.hpp"
#include "gnnprop/parallel.hpp"
#include "gnnprop/theory.hpp"
#include "gnnprop/trainer.hpp"
#include "gnnprop/verification.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace gnnprop;

namespace {

enum ExitCode { kOk = 0, kVerifyFailed = 1, kSpecError = 2, kNumericError = 3, kIoError = 4 };

struct Options {
  std::string spec_path;
  std::string out = "out";
  int workers = default_workers();
  std::optional<std::uint64_t> seed;
  std::optional<int> max_steps;
  bool inject_bug = false;
};

void log(const std::string& msg) { std::cerr << "gnnprop: " << msg << "\n"; }

ExperimentSpec load(const Options& o) {
  ExperimentSpec s = o.spec_path.empty() ? ExperimentSpec{} : load_spec(o.spec_path);
  if (o.seed) s.master_seed = *o.seed;
  if (o.max_steps) {
    if (*o.max_steps < 1) throw ParameterError("--max-steps must be >= 1");
    s.training.max_steps = *o.max_steps;
  }
  return s;
}

fs::path prepare_out(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError("cannot create output directory '" + o.out + "': " + ec.message());
  return fs::path(o.out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

int cmd_generate(const Options& o) {
  const ExperimentSpec s = load(o);
  if (!s.dataset.file.empty()) {
    throw ParameterError("generate needs an ssbm dataset, not a graph file");
  }
  const Graph g = build_dataset(s);
  const fs::path out = prepare_out(o);
  save_graph(g, (out / "graph.json").string());
  const DatasetSeeds seeds = dataset_seeds(s.master_seed);
  nlohmann::ordered_json prov;
  prov["master_seed"] = s.master_seed;
  prov["dataset"] = spec_to_json(s)["dataset"];
  prov["seeds"] = {{"graph", seeds.graph}, {"features", seeds.features},
                   {"split", seeds.split}};
  prov["num_edges"] = g.edges.size();
  prov["recovery_regime"] = to_string(recovery_regime(s.dataset.a, s.dataset.b));
  write_text(out / "provenance.json", prov.dump(2) + "\n");
  log("wrote " + (out / "graph.json").string());
  return kOk;
}

int cmd_diagnose(const Options& o) {
  const ExperimentSpec s = load(o);
  const Graph g = build_dataset(s);
  const fs::path out = prepare_out(o);
  OperatorCache ops(normalized_adjacency(g, s.dataset.self_loops));
  {
    CsvWriter spec_csv((out / "spectrum.csv").string(), {"index", "eigenvalue"});
    const auto& ev = ops.base()->eigenvalues();
    for (Eigen::Index j = 0; j < ev.size(); ++j) {
      spec_csv.row({static_cast<int>(j), ev(j)});
    }
  }
  const std::string seed_text = std::to_string(s.master_seed);
  CsvWriter diag((out / "diagnostics.csv").string(),
                 {"config_id", "depth", "layer", "metric", "mean", "se", "q10", "q90",
                  "seed_count", "master_seed", "config_hash"});
  CsvWriter bounds((out / "bounds.csv").string(),
                   {"config_id", "depth", "layer", "quantity", "lower", "upper", "flag",
                    "master_seed", "config_hash"});
  bool unit_rows = true;
  for (int v = 0; v < g.num_vertices; ++v) {
    unit_rows = unit_rows && std::abs(g.features.row(v).squaredNorm() - 1.0) <= 1e-9;
  }
  const double to_distortion =
      static_cast<double>(g.num_features()) / g.num_vertices;
  const std::uint64_t draw_seed_base = derive_seed(s.master_seed, kTagDiagnose, 0);
  int failures = 0;
  int numeric_failures = 0;
  for (const ModelConfig& c : expand_grid(s, g.num_classes, false)) {
    const std::string id = c.id();
    const std::string hash = hex64(config_hash(c, s));
    try {
      const Architecture arch = build_architecture(c, g.num_features(), ops);
      DiagnosticsOptions dopt;
      dopt.condition_number = s.diagnostics.condition_number;
      dopt.workers = o.workers;
      const DiagnosticsReport rep =
          run_diagnostics(arch, c.init, g.features, g.labels, g.num_classes,
                          s.diagnostics.draws, draw_seed_base, dopt);
      const auto stat_row = [&](int layer, const char* metric, const SummaryStats& st) {
        diag.row({id, c.depth, layer, metric, st.mean, st.se, st.q10, st.q90,
                  st.seed_count, seed_text, hash});
      };
      const auto est_row = [&](int layer, const char* metric, double mean, double se) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        diag.row({id, c.depth, layer, metric, mean, se, nan, nan, s.diagnostics.draws,
                  seed_text, hash});
      };
      stat_row(c.depth, "distortion", rep.distortion);
      for (const auto& e : rep.layers) {
        est_row(e.layer, "trace_K", e.trace.mean, e.trace.se);
        est_row(e.layer, "trace_K_top", e.top_trace.mean, e.top_trace.se);
        est_row(e.layer, "oversmoothing_ratio", e.ratio.value, e.ratio.se);
        est_row(e.layer, "oversmoothing_complement", e.complement.value, e.complement.se);
        // Delta method on -log(1 - r) with 1 - r from the complement.
        const double comp = e.complement.value;
        est_row(e.layer, "oversmoothing_rate", oversmoothing_rate(1.0 - comp),
                comp > 0.0 ? e.complement.se / comp
                           : std::numeric_limits<double>::infinity());
      }
      if (s.diagnostics.condition_number) {
        stat_row(c.depth, "class_condition_number", rep.condition);
        est_row(0, "class_condition_number_input", rep.input_condition, 0.0);
      }
      if (s.diagnostics.gradient) {
        std::vector<int> layers;
        for (int l = 1; l <= c.depth + 1; ++l) layers.push_back(l);
        GradientTraceOptions go;
        go.max_coordinates = s.diagnostics.gradient_coordinates;
        go.workers = o.workers;
        for (const auto& e : gradient_covariance_trace(arch, c.init, g.features, layers,
                                                       s.diagnostics.draws,
                                                       draw_seed_base, go)) {
          est_row(e.layer, "trace_G", e.trace.mean, e.trace.se);
        }
      }

      // Theory overlays. The trace and fixed-operator corridors describe
      // networks without residual connections.
      const double r1 = rep.layers[0].ratio.value;
      if (!c.residual()) {
        const auto var = weight_variances(arch, c.init);
        const Eigen::MatrixXd k1 = exact_first_layer_cov(arch, c.init, g.features);
        const TraceCorridor cor = trace_corridor(arch, var, k1, arch.op(1).projector());
        for (int l = 1; l <= c.depth + 1; ++l) {
          bounds.row({id, c.depth, l, "trace_K", cor.lower[l], cor.upper[l], "",
                      seed_text, hash});
        }
        if (unit_rows) {
          bounds.row({id, c.depth, c.depth, "distortion", to_distortion * cor.lower[c.depth],
                      to_distortion * cor.upper[c.depth], "", seed_text, hash});
        }
        for (int l = 1; l <= c.depth; ++l) {
          const TraceRatioBounds b = per_layer_trace_ratio_bounds(arch, var, l);
          bounds.row({id, c.depth, l, "trace_ratio", b.lower, b.upper,
                      b.readings_differ ? "readings_differ" : "", seed_text, hash});
        }
        if (r1 > 0.0) {
          const auto os = os_ratio_corridor(spectra_of(arch), r1);
          for (int l = 1; l <= c.depth + 1; ++l) {
            bounds.row({id, c.depth, l, "oversmoothing_ratio", os[l - 1].lower,
                        os[l - 1].upper, os[l - 1].upper_vacuous ? "upper_vacuous" : "",
                        seed_text, hash});
          }
        }
      }
      if (c.t < 1.0 && r1 > 0.0) {
        const auto& p = *ops.base();
        const double sum_t = c.t * c.depth;
        const double lb = residual_os_lower_bound(p.lambda1(), p.lambda2(), sum_t);
        if (p.lambda_min() > 0.0) {
          const ResidualCorridor rc = residual_os_corridor(
              p.lambda1(), p.lambda2(), p.lambda_min(),
              std::vector<double>(c.depth, c.t), r1);
          bounds.row({id, c.depth, c.depth, "residual_oversmoothing", rc.lower,
                      rc.upper_literal,
                      rc.upper_discrepancy ? "upper_discrepancy" : "", seed_text, hash});
          bounds.row({id, c.depth, c.depth, "residual_oversmoothing_mapped",
                      rc.lower_mapped, rc.upper_mapped, "", seed_text, hash});
        } else {
          bounds.row({id, c.depth, c.depth, "residual_oversmoothing", lb, 1.0,
                      "not_positive_definite", seed_text, hash});
        }
      }
      log("diagnosed " + id);
    } catch (const NumericError& e) {
      ++failures;
      ++numeric_failures;
      log("config " + id + " failed: " + e.what());
    } catch (const DegenerateError& e) {
      ++failures;
      ++numeric_failures;
      log("config " + id + " failed: " + e.what());
    } catch (const ParameterError& e) {
      ++failures;
      log("config " + id + " failed: " + e.what());
    }
  }
  if (failures == 0) return kOk;
  return numeric_failures > 0 ? kNumericError : kSpecError;
}

int cmd_verify(const Options& o) {
  const ExperimentSpec s = load(o);
  VerifyOptions vo;
  vo.seed = s.master_seed;
  vo.lemma_samples = s.verify.lemma_samples;
  vo.samples = s.verify.samples;
  vo.covariances = s.verify.covariances;
  vo.graphs = s.verify.graphs;
  vo.workers = o.workers;
  vo.bug = o.inject_bug ? InjectedBug::kDoubleRelu : InjectedBug::kNone;
  const auto results = run_verification(vo);
  const fs::path out = prepare_out(o);
  CsvWriter csv((out / "verify.csv").string(),
                {"check", "status", "value", "se", "expected", "detail", "master_seed"});
  int inconclusive = 0;
  for (const auto& r : results) {
    std::printf("%-28s %-12s value=%.6g se=%.3g expected=%.6g %s\n", r.name.c_str(),
                to_string(r.status), r.value, r.se, r.expected, r.detail.c_str());
    csv.row({r.name, to_string(r.status), r.value, r.se, r.expected, r.detail,
             std::to_string(s.master_seed)});
    if (r.status == CheckStatus::kInconclusive) ++inconclusive;
  }
  if (inconclusive > 0) {
    std::printf("%d check(s) inconclusive: too few samples for a 3-SE verdict\n",
                inconclusive);
  }
  return all_passed(results) ? kOk : kVerifyFailed;
}

struct RunRecord {
  RunSummary summary;
  double init_distortion = 0.0;
  double init_rate = 0.0;
  double init_condition = 0.0;
};

nlohmann::json record_to_json(const RunRecord& r, const std::string& hash,
                              const std::string& id, const TrainRun* run) {
  nlohmann::json j;
  j["config_hash"] = hash;
  j["config_id"] = id;
  j["seed"] = r.summary.seed;
  j["failed"] = r.summary.failed;
  j["steps_to_threshold"] = r.summary.steps_to_threshold;
  j["best_val_acc"] = r.summary.best_val_acc;
  j["test_acc_at_selection"] = r.summary.test_acc_at_selection;
  j["selected_step"] = r.summary.selected_step;
  j["init_distortion"] = r.init_distortion;
  j["init_rate"] = std::isfinite(r.init_rate) ? nlohmann::json(r.init_rate) : nlohmann::json("inf");
  j["init_condition"] =
      std::isfinite(r.init_condition) ? nlohmann::json(r.init_condition) : nlohmann::json("inf");
  if (run != nullptr) {
    j["failure"] = run->failure;
    j["train_acc"] = run->train_acc;
    j["val_acc"] = run->val_acc;
    j["test_acc"] = run->test_acc;
    j["train_loss"] = run->train_loss;
    j["val_loss"] = run->val_loss;
    j["test_loss"] = run->test_loss;
  }
  return j;
}

double number_or_inf(const nlohmann::json& v) {
  if (v.is_string()) return std::numeric_limits<double>::infinity();
  return v.get<double>();
}

std::optional<RunRecord> load_record(const fs::path& path, const std::string& hash) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("config_hash") != hash) return std::nullopt;
    RunRecord r;
    r.summary.seed = j.at("seed").get<std::uint64_t>();
    r.summary.failed = j.at("failed").get<bool>();
    r.summary.steps_to_threshold = j.at("steps_to_threshold").get<int>();
    r.summary.best_val_acc = j.at("best_val_acc").get<double>();
    r.summary.test_acc_at_selection = j.at("test_acc_at_selection").get<double>();
    r.summary.selected_step = j.at("selected_step").get<int>();
    r.init_distortion = j.at("init_distortion").get<double>();
    r.init_rate = number_or_inf(j.at("init_rate"));
    r.init_condition = number_or_inf(j.at("init_condition"));
    return r;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;  // incomplete record: recompute
  }
}

int cmd_train(const Options& o, bool select) {
  const ExperimentSpec s = load(o);
  const Graph g = build_dataset(s);
  const fs::path out = prepare_out(o);
  const fs::path runs_dir = out / "runs";
  fs::create_directories(runs_dir);
  OperatorCache ops(normalized_adjacency(g, s.dataset.self_loops));

  double threshold = 0.0;
  if (s.training.threshold) {
    threshold = *s.training.threshold;
  } else {
    const LinearBaseline lb = linear_baseline(
        g, default_baseline_lrs(), derive_seed(s.master_seed, kTagBaseline, 0));
    threshold = lb.threshold;
    log("linear baseline threshold " + std::to_string(threshold) + " (lr " +
        std::to_string(lb.best_lr) + ")");
  }

  const auto configs = expand_grid(s, g.num_classes, true);
  std::vector<Architecture> archs;
  std::vector<std::string> hashes;
  for (const auto& c : configs) {
    archs.push_back(build_architecture(c, g.num_features(), ops));
    hashes.push_back(hex64(config_hash(c, s)));
  }
  const int seeds = s.training.seeds;
  const std::size_t total = configs.size() * static_cast<std::size_t>(seeds);
  std::vector<RunRecord> records(total);
  std::vector<std::size_t> todo;
  const std::uint64_t train_master = derive_seed(s.master_seed, kTagTrain, 0);
  const auto record_path = [&](std::size_t i) {
    return runs_dir / (hashes[i / seeds] + "-s" + std::to_string(i % seeds) + ".json");
  };
  for (std::size_t i = 0; i < total; ++i) {
    if (auto r = load_record(record_path(i), hashes[i / seeds])) {
      records[i] = *r;
    } else {
      todo.push_back(i);
    }
  }
  log(std::to_string(total - todo.size()) + " of " + std::to_string(total) +
      " runs restored from " + runs_dir.string());

  std::mutex log_mutex;
  parallel_for(todo.size(), o.workers, [&](std::size_t k) {
    const std::size_t i = todo[k];
    const ModelConfig& c = configs[i / seeds];
    const Architecture& arch = archs[i / seeds];
    const std::uint64_t seed = run_seed(train_master, static_cast<int>(i % seeds));
    TrainConfig tc;
    tc.task = s.training.task;
    tc.lr = c.lr;
    tc.max_steps = s.training.max_steps;
    tc.lr_drop = s.training.lr_drop;
    tc.init = c.init;
    if (s.training.protocol == Protocol::kTimeToTrain) tc.stop_threshold = threshold;

    RunRecord rec;
    {
      // Failure-mode metrics of the network the run starts from.
      const NetworkState state = init_weights(arch, c.init, seed);
      const ForwardTrace trace = forward(state, arch, g.features);
      double dist = 0.0;
      for (int v = 0; v < g.num_vertices; ++v) dist += output_distortion(trace, v);
      rec.init_distortion = dist / g.num_vertices;
      const auto sample = detail::layer_sample(trace.z[c.depth], arch.op(1).top_basis());
      rec.init_rate = sample.total > 0.0
                          ? -std::log(sample.complement / sample.total)
                          : std::numeric_limits<double>::quiet_NaN();
      rec.init_condition = class_condition_number(trace, g.labels, g.num_classes, c.depth);
    }
    const TrainRun run = train(g, arch, tc, seed);
    rec.summary = summarize_run(run, threshold);
    records[i] = rec;
    write_text(record_path(i), record_to_json(rec, hashes[i / seeds], c.id(), &run).dump() + "\n");
    std::lock_guard<std::mutex> lock(log_mutex);
    log(c.id() + " seed " + std::to_string(i % seeds) + ": steps " +
        std::to_string(rec.summary.steps_to_threshold) + ", val " +
        std::to_string(rec.summary.best_val_acc) +
        (run.failed ? " (failed: " + run.failure + ")" : ""));
  });

  const std::string seed_text = std::to_string(s.master_seed);
  CsvWriter csv((out / "results.csv").string(),
                {"config_id", "depth", "t", "beta", "lr", "cw_scale", "init", "seed",
                 "task", "steps_to_threshold", "best_val_acc", "test_acc_at_selection",
                 "final_distortion", "oversmoothing_rate", "class_condition_number",
                 "failed", "threshold", "master_seed", "config_hash"});
  for (std::size_t i = 0; i < total; ++i) {
    const ModelConfig& c = configs[i / seeds];
    const RunRecord& r = records[i];
    csv.row({c.id(), c.depth, c.t, c.residual() ? c.beta : 0.0, c.lr, c.cw_scale(),
             format_init(c.init), static_cast<int>(i % seeds), to_string(s.training.task),
             r.summary.steps_to_threshold, r.summary.best_val_acc,
             r.summary.test_acc_at_selection, r.init_distortion, r.init_rate,
             r.init_condition, r.summary.failed, threshold, seed_text, hashes[i / seeds]});
  }
  if (!select) return kOk;

  // Selection over configurations, as in trainer::sweep.
  CsvWriter sel((out / "sweep.csv").string(),
                {"config_id", "protocol", "completed", "runs", "metric", "test_metric",
                 "selected", "master_seed", "config_hash"});
  int best = -1;
  std::vector<double> metric(configs.size()), test(configs.size());
  std::vector<int> completed(configs.size());
  for (std::size_t j = 0; j < configs.size(); ++j) {
    std::vector<double> m, te;
    for (int k = 0; k < seeds; ++k) {
      const RunSummary& r = records[j * seeds + k].summary;
      if (!r.failed) {
        ++completed[j];
        te.push_back(r.test_acc_at_selection);
      }
      if (s.training.protocol == Protocol::kTimeToTrain) {
        m.push_back(r.steps_to_threshold);
      } else if (!r.failed) {
        m.push_back(r.best_val_acc);
      }
    }
    metric[j] = m.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(m);
    test[j] = te.empty() ? std::numeric_limits<double>::quiet_NaN() : mean_of(te);
    if (completed[j] == 0) continue;
    const bool better =
        best < 0 || (s.training.protocol == Protocol::kPerformance ? metric[j] > metric[best]
                                                                    : metric[j] < metric[best]);
    if (better) best = static_cast<int>(j);
  }
  for (std::size_t j = 0; j < configs.size(); ++j) {
    sel.row({configs[j].id(), to_string(s.training.protocol), completed[j], seeds,
             metric[j], test[j], static_cast<int>(j) == best, seed_text, hashes[j]});
  }
  if (best >= 0) {
    std::printf("selected %s: metric %.6g, test %.6g\n", configs[best].id().c_str(),
                metric[best], test[best]);
  } else {
    std::printf("every configuration failed\n");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signal propagation laboratory for ReLU graph neural networks"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  int max_steps = 0;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--spec", o.spec_path, "experiment file (JSON)");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--workers", o.workers, "worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--seed", seed, "override the master seed");
    sub->add_option("--max-steps", max_steps, "override training.max_steps");
  };
  auto* gen = app.add_subcommand("generate", "generate the dataset and write graph.json");
  auto* diag = app.add_subcommand("diagnose", "Monte-Carlo diagnostics and theory bounds");
  auto* verify = app.add_subcommand("verify-theory", "run the bound and lemma checks");
  auto* trn = app.add_subcommand("train", "train every configuration of the grid");
  auto* swp = app.add_subcommand("sweep", "train the grid and select the best configuration");
  for (auto* sub : {gen, diag, verify, trn, swp}) add_common(sub);
  verify->add_flag("--inject-bug", o.inject_bug)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kSpecError;
  }
  for (auto* sub : {gen, diag, verify, trn, swp}) {
    if (sub->count("--seed") > 0) o.seed = seed;
    if (sub->count("--max-steps") > 0) o.max_steps = max_steps;
  }

  try {
    if (gen->parsed()) return cmd_generate(o);
    if (diag->parsed()) return cmd_diagnose(o);
    if (verify->parsed()) return cmd_verify(o);
    if (trn->parsed()) return cmd_train(o, false);
    if (swp->parsed()) return cmd_train(o, true);
  } catch (const LoadError& e) {
    log(e.what());
    return kIoError;
  } catch (const IoError& e) {
    log(e.what());
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    log(e.what());
    return kIoError;
  } catch (const NumericError& e) {
    log(e.what());
    return kNumericError;
  } catch (const DegenerateError& e) {
    log(e.what());
    return kNumericError;
  } catch (const Error& e) {
    log(e.what());
    return kSpecError;
  }
  return kOk;
}
