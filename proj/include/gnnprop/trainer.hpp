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

// Full-batch gradient descent for semi-supervised vertex classification.
//
// One step is one full-batch update, so "epoch" and "step" coincide. Entry s
// of every per-step series holds the metrics after s updates; entry 0 is the
// network at initialization.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gnnprop/errors.hpp"
#include "gnnprop/graph.hpp"
#include "gnnprop/network.hpp"
#include "gnnprop/parallel.hpp"
#include "gnnprop/rng.hpp"
#include "gnnprop/stats.hpp"

namespace gnnprop {

enum class Task { kClassification, kRegression };

inline const char* to_string(Task t) {
  return t == Task::kClassification ? "classification" : "regression";
}

struct LrDrop {
  double factor = 0.25;
  int step = 200;
};

struct TrainConfig {
  Task task = Task::kRegression;
  double lr = 0.01;
  int max_steps = 800;
  std::optional<LrDrop> lr_drop;
  InitScheme init = InitScheme::he_gnn();
  // When set, training stops at the first step where time_to_train is
  // satisfied for this threshold. Earlier entries are unaffected.
  std::optional<double> stop_threshold;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
      throw ParameterError("train: lr must be finite and nonnegative");
    }
    if (max_steps < 1) throw ParameterError("train: max_steps must be >= 1");
  }
};

struct MaskMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainRun {
  std::uint64_t seed = 0;
  int max_steps = 0;
  std::vector<double> train_acc, val_acc, test_acc;
  std::vector<double> train_loss, val_loss, test_loss;
  bool failed = false;
  std::string failure;

  int last_step() const { return static_cast<int>(train_acc.size()) - 1; }
};

namespace detail {

inline std::vector<int> mask_indices(const std::vector<bool>& mask) {
  std::vector<int> out;
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (mask[v]) out.push_back(static_cast<int>(v));
  }
  return out;
}

inline int argmax_row(const Eigen::MatrixXd& z, int v) {
  Eigen::Index best = 0;
  z.row(v).maxCoeff(&best);
  return static_cast<int>(best);
}

// Loss and accuracy over `rows`; if `grad` is given, adds dLoss/dz there.
inline MaskMetrics evaluate(const Eigen::MatrixXd& z,
                            const std::vector<int>& labels,
                            const std::vector<int>& rows, Task task,
                            Eigen::MatrixXd* grad) {
  MaskMetrics m;
  if (rows.empty()) {
    m.loss = std::numeric_limits<double>::quiet_NaN();
    m.accuracy = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  const int k = static_cast<int>(z.cols());
  const double count = static_cast<double>(rows.size());
  CompensatedSum loss;
  int correct = 0;
  for (int v : rows) {
    const int y = labels[v];
    if (argmax_row(z, v) == y) ++correct;
    if (task == Task::kRegression) {
      for (int c = 0; c < k; ++c) {
        const double diff = z(v, c) - (c == y ? 1.0 : 0.0);
        loss.add(diff * diff / (count * k));
        if (grad != nullptr) (*grad)(v, c) += 2.0 * diff / (count * k);
      }
    } else {
      const double zmax = z.row(v).maxCoeff();
      const double lse =
          zmax + std::log((z.row(v).array() - zmax).exp().sum());
      loss.add((lse - z(v, y)) / count);
      if (grad != nullptr) {
        for (int c = 0; c < k; ++c) {
          (*grad)(v, c) +=
              (std::exp(z(v, c) - lse) - (c == y ? 1.0 : 0.0)) / count;
        }
      }
    }
  }
  m.loss = loss.value();
  m.accuracy = correct / count;
  return m;
}

}  // namespace detail

inline bool time_to_train_satisfied(const TrainRun& run, double threshold,
                                    int s);

inline TrainRun train(const Graph& graph, const Architecture& arch,
                      const TrainConfig& config, std::uint64_t seed) {
  graph.validate();
  arch.validate();
  config.validate();
  if (arch.num_vertices() != graph.num_vertices ||
      arch.input_width() != graph.num_features() ||
      arch.output_width() != graph.num_classes) {
    throw ParameterError(
        "train: architecture must map n_0 features to k class scores");
  }
  const auto train_rows = detail::mask_indices(graph.masks.train);
  const auto val_rows = detail::mask_indices(graph.masks.val);
  const auto test_rows = detail::mask_indices(graph.masks.test);
  if (train_rows.empty()) throw ParameterError("train: empty train mask");

  TrainRun run;
  run.seed = seed;
  run.max_steps = config.max_steps;
  NetworkState state = init_weights(arch, config.init, seed);
  for (int s = 0;; ++s) {
    const ForwardTrace trace = forward(state, arch, graph.features);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(trace.output().rows(),
                                                 trace.output().cols());
    const MaskMetrics tr = detail::evaluate(trace.output(), graph.labels,
                                            train_rows, config.task, &grad);
    const MaskMetrics va = detail::evaluate(trace.output(), graph.labels,
                                            val_rows, config.task, nullptr);
    const MaskMetrics te = detail::evaluate(trace.output(), graph.labels,
                                            test_rows, config.task, nullptr);
    if (!std::isfinite(tr.loss) || !trace.output().allFinite()) {
      run.failed = true;
      run.failure = "non-finite loss at step " + std::to_string(s);
      break;
    }
    run.train_acc.push_back(tr.accuracy);
    run.val_acc.push_back(va.accuracy);
    run.test_acc.push_back(te.accuracy);
    run.train_loss.push_back(tr.loss);
    run.val_loss.push_back(va.loss);
    run.test_loss.push_back(te.loss);
    if (s == config.max_steps) break;
    if (config.stop_threshold &&
        time_to_train_satisfied(run, *config.stop_threshold, s)) {
      break;
    }
    double lr = config.lr;
    if (config.lr_drop && s >= config.lr_drop->step) lr *= config.lr_drop->factor;
    gd_step(state, backward(state, arch, trace, grad), lr);
  }
  return run;
}

inline constexpr int kTrainWindow = 10;
inline constexpr double kTrainBand = 0.05;
inline constexpr int kSelectWindow = 25;
inline constexpr double kSelectBand = 0.025;

namespace detail {

// Validation accuracy strictly increased at every step of [s - w, s], or
// stayed within band * val[s] of val[s] there.
inline bool validation_stable(const std::vector<double>& val, int s, int w,
                              double band) {
  if (s < w) return false;
  bool increasing = true;
  bool within = true;
  for (int j = s - w; j <= s; ++j) {
    if (j > s - w && !(val[j] > val[j - 1])) increasing = false;
    if (!(std::abs(val[j] - val[s]) <= band * std::abs(val[s]))) within = false;
  }
  return increasing || within;
}

}  // namespace detail

// Train accuracy >= threshold at every step of [s - 10, s] and validation
// accuracy stable over the same window.
inline bool time_to_train_satisfied(const TrainRun& run, double threshold,
                                    int s) {
  if (s < kTrainWindow || s > run.last_step()) return false;
  for (int j = s - kTrainWindow; j <= s; ++j) {
    if (!(run.train_acc[j] >= threshold)) return false;
  }
  return detail::validation_stable(run.val_acc, s, kTrainWindow, kTrainBand);
}

// First step satisfying the criterion, or max_steps. Failed runs count as
// max_steps.
inline int time_to_train(const TrainRun& run, double threshold) {
  if (run.failed) return run.max_steps;
  for (int s = 0; s <= run.last_step(); ++s) {
    if (time_to_train_satisfied(run, threshold, s)) return s;
  }
  return run.max_steps;
}

struct Selection {
  int step = 0;
  double test_accuracy = 0.0;
  double val_accuracy = 0.0;
  bool stable = false;  // false when no step met the stability rule
};

// Among steps whose validation accuracy strictly increased over the last 25
// steps or stayed within 2.5% of its current value there, the one with the
// least validation loss (earliest on ties). Without such a step, the least
// validation loss overall.
inline Selection select_best_checkpoint(const TrainRun& run) {
  if (run.val_acc.empty()) {
    throw ParameterError("select_best_checkpoint: empty run");
  }
  Selection sel;
  int best = -1;
  for (int s = 0; s <= run.last_step(); ++s) {
    if (!detail::validation_stable(run.val_acc, s, kSelectWindow, kSelectBand)) {
      continue;
    }
    if (best < 0 || run.val_loss[s] < run.val_loss[best]) best = s;
  }
  sel.stable = best >= 0;
  if (best < 0) {
    best = 0;
    for (int s = 1; s <= run.last_step(); ++s) {
      if (run.val_loss[s] < run.val_loss[best]) best = s;
    }
  }
  sel.step = best;
  sel.test_accuracy = run.test_acc[best];
  sel.val_accuracy = run.val_acc[best];
  return sel;
}

inline bool selection_is_stable(const TrainRun& run, int step) {
  return detail::validation_stable(run.val_acc, step, kSelectWindow, kSelectBand);
}

struct LinearBaseline {
  double threshold = 0.0;                // best mean validation accuracy
  double best_lr = 0.0;
  std::vector<double> lrs;
  std::vector<double> mean_val_accuracy;  // per lr
};

struct LinearBaselineOptions {
  int steps = 800;
  int seeds = 3;
  Task task = Task::kClassification;
};

inline const std::vector<double>& default_baseline_lrs() {
  static const std::vector<double> lrs = {0.05, 0.01, 0.005, 0.001, 0.0005};
  return lrs;
}

// A single bias-free linear layer x W on the vertex features, trained by GD
// for each learning rate; the threshold is the best validation accuracy
// averaged over seeds.
inline LinearBaseline linear_baseline(const Graph& graph,
                                      const std::vector<double>& lrs,
                                      std::uint64_t seed,
                                      const LinearBaselineOptions& o = {}) {
  graph.validate();
  if (lrs.empty()) throw ParameterError("linear_baseline: no learning rates");
  const auto train_rows = detail::mask_indices(graph.masks.train);
  const auto val_rows = detail::mask_indices(graph.masks.val);
  if (train_rows.empty() || val_rows.empty()) {
    throw ParameterError("linear_baseline: train and val masks must be nonempty");
  }
  const int n0 = graph.num_features();
  const int k = graph.num_classes;
  const Eigen::MatrixXd& x = graph.features;
  LinearBaseline out;
  out.lrs = lrs;
  out.threshold = -1.0;
  for (double lr : lrs) {
    std::vector<double> accs;
    for (int r = 0; r < o.seeds; ++r) {
      Philox4x32 rng = make_stream(derive_seed(seed, 0x6c696e, r),
                                   StreamPurpose::kWeights, 0);
      Eigen::MatrixXd w(n0, k);
      const double sd = std::sqrt(2.0 / n0);
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = sd * standard_normal(rng);
      }
      for (int s = 0; s < o.steps; ++s) {
        const Eigen::MatrixXd z = x * w;
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(z.rows(), z.cols());
        detail::evaluate(z, graph.labels, train_rows, o.task, &grad);
        w -= lr * (x.transpose() * grad);
      }
      const Eigen::MatrixXd z = x * w;
      accs.push_back(
          detail::evaluate(z, graph.labels, val_rows, o.task, nullptr).accuracy);
    }
    const double mean = mean_of(accs);
    out.mean_val_accuracy.push_back(mean);
    if (mean > out.threshold) {
      out.threshold = mean;
      out.best_lr = lr;
    }
  }
  return out;
}

enum class Protocol { kPerformance, kTimeToTrain };

inline const char* to_string(Protocol p) {
  return p == Protocol::kPerformance ? "performance" : "time_to_train";
}

struct SweepJob {
  std::string id;
  Architecture arch;
  TrainConfig config;
};

struct RunSummary {
  std::uint64_t seed = 0;
  bool failed = false;
  int steps_to_threshold = 0;
  double best_val_acc = 0.0;
  double test_acc_at_selection = 0.0;
  int selected_step = 0;
};

inline RunSummary summarize_run(const TrainRun& run,
                                std::optional<double> threshold) {
  RunSummary s;
  s.seed = run.seed;
  s.failed = run.failed;
  s.steps_to_threshold = threshold ? time_to_train(run, *threshold) : run.max_steps;
  if (!run.val_acc.empty()) {
    const Selection sel = select_best_checkpoint(run);
    s.best_val_acc = sel.val_accuracy;
    s.test_acc_at_selection = sel.test_accuracy;
    s.selected_step = sel.step;
  }
  return s;
}

struct SweepEntry {
  std::string id;
  std::vector<RunSummary> runs;
  int completed = 0;         // runs that did not fail
  double metric = 0.0;       // mean val acc of completed runs, or mean steps of all runs
  double test_metric = 0.0;  // mean test acc at selection of completed runs
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  int selected = -1;  // index into entries; -1 when every config failed
};

inline std::uint64_t run_seed(std::uint64_t master, int index) {
  return derive_seed(master, 0x72756e, static_cast<std::uint64_t>(index));
}

// Runs every job for `seeds` seeds and selects the configuration with the
// best mean validation accuracy (performance) or the fewest mean steps to
// threshold (time to train). Failed runs are excluded from the means; a
// configuration whose runs all failed cannot be selected.
inline SweepResult sweep(const Graph& graph, const std::vector<SweepJob>& jobs,
                         int seeds, std::uint64_t master_seed,
                         Protocol protocol, std::optional<double> threshold,
                         int workers = 1) {
  if (jobs.empty()) throw ParameterError("sweep: empty grid");
  if (seeds < 1) throw ParameterError("sweep: seeds must be >= 1");
  if (protocol == Protocol::kTimeToTrain && !threshold) {
    throw ParameterError("sweep: time-to-train needs a threshold");
  }
  const std::size_t total = jobs.size() * static_cast<std::size_t>(seeds);
  std::vector<RunSummary> results(total);
  parallel_for(total, workers, [&](std::size_t i) {
    const SweepJob& job = jobs[i / seeds];
    TrainConfig config = job.config;
    if (protocol == Protocol::kTimeToTrain) config.stop_threshold = threshold;
    const TrainRun run = train(graph, job.arch, config,
                               run_seed(master_seed, static_cast<int>(i % seeds)));
    results[i] = summarize_run(run, threshold);
  });
  SweepResult out;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    SweepEntry e;
    e.id = jobs[j].id;
    std::vector<double> metric, test;
    for (int s = 0; s < seeds; ++s) {
      const RunSummary& r = results[j * seeds + s];
      e.runs.push_back(r);
      if (!r.failed) {
        ++e.completed;
        test.push_back(r.test_acc_at_selection);
      }
      if (protocol == Protocol::kTimeToTrain) {
        // Failed runs count as the sentinel here.
        metric.push_back(r.steps_to_threshold);
      } else if (!r.failed) {
        metric.push_back(r.best_val_acc);
      }
    }
    e.metric = mean_of(metric);
    e.test_metric = test.empty() ? std::numeric_limits<double>::quiet_NaN()
                                 : mean_of(test);
    out.entries.push_back(std::move(e));
  }
  for (std::size_t j = 0; j < out.entries.size(); ++j) {
    const SweepEntry& e = out.entries[j];
    if (e.completed == 0) continue;
    if (out.selected < 0) {
      out.selected = static_cast<int>(j);
      continue;
    }
    const SweepEntry& b = out.entries[out.selected];
    const bool better = protocol == Protocol::kPerformance ? e.metric > b.metric
                                                           : e.metric < b.metric;
    if (better) out.selected = static_cast<int>(j);
  }
  return out;
}

}  // namespace gnnprop
