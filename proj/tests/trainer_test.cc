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


#include "gnnprop/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace gnnprop {
namespace {

TrainRun synthetic_run(int steps) {
  TrainRun r;
  r.max_steps = steps;
  r.train_acc.assign(steps + 1, 0.5);
  r.val_acc.assign(steps + 1, 0.8);
  r.test_acc.assign(steps + 1, 0.7);
  r.train_loss.assign(steps + 1, 1.0);
  r.val_loss.assign(steps + 1, 1.0);
  r.test_loss.assign(steps + 1, 1.0);
  return r;
}

Graph toy_graph(std::uint64_t seed, double separation = 4.0) {
  Graph g = generate_ssbm({120, 2, 8.0, 1.5, seed});
  g = synthesize_features(std::move(g), 4, separation, seed + 1);
  return split_vertices(std::move(g), {}, seed + 2);
}

TEST(TimeToTrain, CrossingAtHundredGivesHundredTen) {
  TrainRun r = synthetic_run(800);
  for (int s = 100; s <= 800; ++s) r.train_acc[s] = 0.9;
  EXPECT_EQ(time_to_train(r, 0.85), 110);
  EXPECT_FALSE(time_to_train_satisfied(r, 0.85, 109));
  EXPECT_TRUE(time_to_train_satisfied(r, 0.85, 110));
}

TEST(TimeToTrain, DipResetsWindow) {
  TrainRun r = synthetic_run(800);
  for (int s = 100; s <= 800; ++s) r.train_acc[s] = 0.9;
  r.train_acc[105] = 0.8;
  EXPECT_EQ(time_to_train(r, 0.85), 116);
}

TEST(TimeToTrain, OscillatingValidationNeverStable) {
  TrainRun r = synthetic_run(800);
  for (int s = 0; s <= 800; ++s) {
    r.train_acc[s] = 0.95;
    r.val_acc[s] = s % 2 == 0 ? 0.88 : 0.72;  // +-10% around 0.8
  }
  EXPECT_EQ(time_to_train(r, 0.9), 800);
}

TEST(TimeToTrain, IncreasingValidationIsStable) {
  TrainRun r = synthetic_run(100);
  for (int s = 0; s <= 100; ++s) {
    r.train_acc[s] = 0.95;
    r.val_acc[s] = 0.3 + 0.005 * s;
  }
  EXPECT_EQ(time_to_train(r, 0.9), 10);
}

TEST(TimeToTrain, FailedRunGetsSentinel) {
  TrainRun r = synthetic_run(50);
  for (auto& a : r.train_acc) a = 1.0;
  r.failed = true;
  EXPECT_EQ(time_to_train(r, 0.5), 50);
}

TEST(Selection, RejectsUnstableSpike) {
  TrainRun r = synthetic_run(200);
  for (int s = 0; s <= 200; ++s) r.val_loss[s] = 1.0 - 0.001 * s;
  // Lowest loss at step 150, but accuracy jumps there.
  r.val_loss[150] = 0.01;
  r.val_acc[150] = 0.95;
  r.test_acc[150] = 0.99;
  const Selection sel = select_best_checkpoint(r);
  EXPECT_TRUE(sel.stable);
  EXPECT_EQ(sel.step, 200);
  EXPECT_DOUBLE_EQ(sel.test_accuracy, 0.7);
  EXPECT_FALSE(selection_is_stable(r, 150));
  EXPECT_FALSE(selection_is_stable(r, 170));
  EXPECT_TRUE(selection_is_stable(r, 176));
}

TEST(Selection, FallsBackToLeastLoss) {
  TrainRun r = synthetic_run(20);  // shorter than the stability window
  for (int s = 0; s <= 20; ++s) r.val_loss[s] = std::abs(s - 7) + 1.0;
  const Selection sel = select_best_checkpoint(r);
  EXPECT_FALSE(sel.stable);
  EXPECT_EQ(sel.step, 7);
}

TEST(Train, ZeroLearningRateKeepsMetrics) {
  const Graph g = toy_graph(3);
  const auto p = normalized_adjacency(g, true);
  const Architecture a = Architecture::vanilla(2, 4, 8, 2, repeat_operator(p, 2));
  TrainConfig c;
  c.lr = 0.0;
  c.max_steps = 20;
  const TrainRun r = train(g, a, c, 1);
  ASSERT_EQ(r.last_step(), 20);
  for (int s = 1; s <= 20; ++s) {
    EXPECT_EQ(r.train_acc[s], r.train_acc[0]);
    EXPECT_EQ(r.val_loss[s], r.val_loss[0]);
  }
  EXPECT_FALSE(r.failed);
}

TEST(Train, LearnsSeparableToyProblem) {
  const Graph g = toy_graph(4);
  const auto p = normalized_adjacency(g, true);
  for (Task task : {Task::kRegression, Task::kClassification}) {
    const Architecture a = Architecture::residual_net(
        2, 4, 16, 2, repeat_operator(residual_operator(*p, 0.5), 2), {0.5, 0.5});
    TrainConfig c;
    c.task = task;
    c.lr = 0.05;
    c.max_steps = 300;
    const TrainRun r = train(g, a, c, 2);
    EXPECT_GT(r.train_acc.back(), 0.9) << to_string(task);
    EXPECT_LT(r.train_loss.back(), r.train_loss.front()) << to_string(task);
    EXPECT_LT(time_to_train(r, 0.85), 300) << to_string(task);
  }
}

TEST(Train, EarlyStopAtThreshold) {
  const Graph g = toy_graph(5);
  const auto p = normalized_adjacency(g, true);
  const Architecture a = Architecture::residual_net(
      2, 4, 16, 2, repeat_operator(residual_operator(*p, 0.5), 2), {0.5, 0.5});
  TrainConfig c;
  c.lr = 0.05;
  c.max_steps = 300;
  const TrainRun full = train(g, a, c, 3);
  c.stop_threshold = 0.85;
  const TrainRun stopped = train(g, a, c, 3);
  const int t = time_to_train(full, 0.85);
  ASSERT_LT(t, 300);
  EXPECT_EQ(stopped.last_step(), t);
  EXPECT_EQ(time_to_train(stopped, 0.85), t);
  for (int s = 0; s <= t; ++s) EXPECT_EQ(stopped.val_acc[s], full.val_acc[s]);
}

TEST(Train, DivergenceMarksRunFailed) {
  const Graph g = toy_graph(6);
  const auto p = normalized_adjacency(g, true);
  const Architecture a = Architecture::vanilla(3, 4, 16, 2, repeat_operator(p, 3));
  TrainConfig c;
  c.lr = 1e200;
  c.max_steps = 200;
  const TrainRun r = train(g, a, c, 4);
  EXPECT_TRUE(r.failed);
  EXPECT_LT(r.last_step(), 200);
  EXPECT_EQ(time_to_train(r, 0.5), 200);
}

TEST(Train, RejectsMismatchedArchitecture) {
  const Graph g = toy_graph(7);
  const auto p = normalized_adjacency(g, true);
  const Architecture a = Architecture::vanilla(2, 3, 8, 2, repeat_operator(p, 2));
  EXPECT_THROW(train(g, a, {}, 1), ParameterError);
  TrainConfig bad;
  bad.lr = -1.0;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(LinearBaseline, ChanceWithoutSignal) {
  const Graph g = toy_graph(8, 0.0);
  const LinearBaseline b = linear_baseline(g, {0.05, 0.01}, 1, {.steps = 200});
  EXPECT_NEAR(b.threshold, 0.5, 0.2);
  ASSERT_EQ(b.mean_val_accuracy.size(), 2u);
}

TEST(LinearBaseline, SeparatedFeatures) {
  const Graph g = toy_graph(9, 6.0);
  const LinearBaseline b = linear_baseline(g, default_baseline_lrs(), 1, {.steps = 300});
  EXPECT_GT(b.threshold, 0.9);
  EXPECT_EQ(b.lrs, default_baseline_lrs());
}

TEST(Sweep, SelectsAndExcludesFailures) {
  const Graph g = toy_graph(10);
  const auto p = normalized_adjacency(g, true);
  const Architecture a = Architecture::residual_net(
      2, 4, 16, 2, repeat_operator(residual_operator(*p, 0.5), 2), {0.5, 0.5});
  TrainConfig good;
  good.lr = 0.05;
  good.max_steps = 150;
  TrainConfig bad = good;
  bad.lr = 1e200;
  TrainConfig slow = good;
  slow.lr = 0.0;
  const Architecture deep = Architecture::vanilla(3, 4, 16, 2, repeat_operator(p, 3));
  const std::vector<SweepJob> jobs = {{"bad", deep, bad}, {"slow", a, slow}, {"good", a, good}};
  const SweepResult perf = sweep(g, jobs, 2, 5, Protocol::kPerformance, std::nullopt);
  EXPECT_EQ(perf.entries[0].completed, 0);
  EXPECT_EQ(perf.selected, 2);
  const SweepResult ttt = sweep(g, jobs, 2, 5, Protocol::kTimeToTrain, 0.85);
  EXPECT_EQ(ttt.selected, 2);
  EXPECT_EQ(ttt.entries[0].metric, 150.0);
  EXPECT_EQ(ttt.entries[1].metric, 150.0);
  EXPECT_LT(ttt.entries[2].metric, 150.0);
  EXPECT_THROW(sweep(g, jobs, 2, 5, Protocol::kTimeToTrain, std::nullopt), ParameterError);
  // Same master seed gives the same runs.
  const SweepResult again = sweep(g, jobs, 2, 5, Protocol::kTimeToTrain, 0.85, 2);
  EXPECT_EQ(again.entries[2].metric, ttt.entries[2].metric);
}

}  // namespace
}  // namespace gnnprop
