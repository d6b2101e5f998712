/**
 * Copyright 2026 The FDML Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <atomic>
#include <chrono>
#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "fdml/coordinator.h"
#include "fdml/errors.h"
#include "fdml/random.h"
#include "fdml/verify.h"
#include "fdml/worker.h"

namespace fdml {
namespace {

std::shared_ptr<const SampleSchedule> schedule(std::uint64_t seed, std::size_t n,
                                               std::size_t b, std::size_t e) {
  return std::make_shared<const SampleSchedule>(SampleSchedule::generate(seed, n, b, e));
}

// Sample i has features {(0, a_i), (1, b_i)}.
Dataset tiny() {
  Dataset d;
  const double a[] = {1.0, -0.5, 2.0, 0.25};
  const double b[] = {0.5, 1.5, -1.0, 0.0};
  const int y[] = {1, 0, 1, 0};
  for (int i = 0; i < 4; ++i) {
    std::vector<SparseEntry> row = {{0, a[i]}};
    if (b[i] != 0.0) row.push_back({1, b[i]});
    d.add_row(y[i], row);
  }
  return d;
}

TEST(FinishGradient, MeanDividesThenRegularizesOnce) {
  const auto spec = SubModelSpec::Linear(2);
  const std::vector<double> x = {1.0, 2.0, 3.0};
  std::vector<double> g = {4.0, 8.0, 12.0};
  finish_gradient(spec, x, 4, BatchReduction::kMean, 0.5, g);
  EXPECT_EQ(g, (std::vector<double>{1.5, 3.0, 3.0}));
  std::vector<double> s = {4.0, 8.0, 12.0};
  finish_gradient(spec, x, 4, BatchReduction::kSum, 0.5, s);
  EXPECT_EQ(s, (std::vector<double>{4.5, 9.0, 12.0}));
}

TEST(ApplyStep, ZeroGradientLeavesParameters) {
  std::vector<double> x = {0.25, -3.0, 7.5};
  const std::vector<double> before = x;
  apply_step(x, std::vector<double>(3, 0.0), 0.9);
  EXPECT_EQ(x, before);
}

TEST(ApplyStep, NonFiniteGradientAborts) {
  std::vector<double> x = {1.0, 2.0};
  const std::vector<double> before = x;
  EXPECT_THROW(apply_step(x, std::vector<double>{0.0, std::nan("")}, 0.1),
               DivergenceError);
  EXPECT_THROW(apply_step(x, std::vector<double>{HUGE_VAL, 0.0}, 0.1), DivergenceError);
  EXPECT_EQ(x, before);
}

TEST(ApplyStep, StepBoundedByEtaTimesGradientNorm) {
  SplitMix64 rng(4);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(5), g(5);
    for (auto& v : x) v = rng.uniform() - 0.5;
    for (auto& v : g) v = rng.uniform() - 0.5;
    const auto before = x;
    const double eta = rng.uniform();
    apply_step(x, g, eta);
    double step = 0.0, norm = 0.0;
    for (int k = 0; k < 5; ++k) {
      step += (x[k] - before[k]) * (x[k] - before[k]);
      norm += g[k] * g[k];
    }
    EXPECT_LE(std::sqrt(step), eta * std::sqrt(norm) * (1 + 1e-12));
  }
}

TEST(BatchReduction, Parse) {
  EXPECT_EQ(parse_reduction("sum"), BatchReduction::kSum);
  EXPECT_EQ(parse_reduction(to_string(BatchReduction::kMean)), BatchReduction::kMean);
  EXPECT_THROW(parse_reduction("avg"), ConfigError);
}

TEST(Worker, SinglePartyMatchesTextbookSgd) {
  const Dataset data = tiny();
  const auto sched = schedule(5, 4, 1, 2);
  SspCoordinator coordinator(4, 1, 0);
  coordinator.set_schedule(sched);
  CoordinatorService service(coordinator);
  InProcessCarrier carrier(service);
  const auto spec = SubModelSpec::Linear(2);
  WorkerOptions options;
  options.eta = 0.7;
  options.lambda = 0.0;
  Worker worker(0, spec, data, sched, options, carrier, init_block(spec, 0, 1));
  worker.handshake(1);

  std::vector<double> w = {0.0, 0.0, 0.0};  // w0, w1, bias
  for (std::uint64_t t = 1; t <= sched->iterations(); ++t) {
    worker.step(t);
    const std::uint32_t i = sched->batch(t)[0];
    double x[2] = {0.0, 0.0};
    for (const auto& e : data.row(i)) x[e.index] = e.value;
    const double p = 1.0 / (1.0 + std::exp(-(w[0] * x[0] + w[1] * x[1] + w[2])));
    const double r = p - data.label(i);
    const double eta = 0.7 / std::sqrt(static_cast<double>(t));
    w[0] -= eta * r * x[0];
    w[1] -= eta * r * x[1];
    w[2] -= eta * r;
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(worker.block().values[k], w[k], 1e-15) << "t=" << t << " k=" << k;
    }
  }
  EXPECT_TRUE(coordinator.finished());
}

TEST(Worker, TwoPartyRoundRobinEqualsBlockSynchronousOracle) {
  const Dataset full = make_synthetic(60, 6, 3);
  const auto partition = VerticalPartition::even(6, 2);
  const Dataset s0 = project_dataset(full, partition, 0);
  const Dataset s1 = project_dataset(full, partition, 1);
  const auto sched = schedule(8, 60, 7, 3);
  SspCoordinator coordinator(60, 2, 0);
  coordinator.set_schedule(sched);
  CoordinatorService service(coordinator);
  InProcessCarrier c0(service), c1(service);
  const auto spec0 = SubModelSpec::FeedForward(3, 4);
  const auto spec1 = SubModelSpec::Linear(3);
  WorkerOptions options;
  options.eta = 0.3;
  options.lambda = 0.01;
  Worker w0(0, spec0, s0, sched, options, c0, init_block(spec0, 0, 2));
  Worker w1(1, spec1, s1, sched, options, c1, init_block(spec1, 1, 2));

  // Oracle: both blocks updated from sums of the same pre-step parameters.
  std::vector<double> x0 = init_block(spec0, 0, 2).values;
  std::vector<double> x1 = init_block(spec1, 1, 2).values;
  for (std::uint64_t t = 1; t <= sched->iterations(); ++t) {
    w0.push(t);
    w1.push(t);
    ASSERT_TRUE(w0.try_pull(t));
    ASSERT_TRUE(w1.try_pull(t));
    w0.update(t);
    w1.update(t);

    const auto batch = sched->batch(t);
    std::vector<double> g0(x0.size(), 0.0), g1(x1.size(), 0.0);
    for (std::uint32_t i : batch) {
      double s = 0.0;
      s += local_prediction(spec0, x0, s0.row(i));
      s += local_prediction(spec1, x1, s1.row(i));
      const double h = h_term(s, full.label(i));
      accumulate_prediction_gradient(spec0, x0, s0.row(i), h, g0);
      accumulate_prediction_gradient(spec1, x1, s1.row(i), h, g1);
    }
    finish_gradient(spec0, x0, batch.size(), BatchReduction::kMean, 0.01, g0);
    finish_gradient(spec1, x1, batch.size(), BatchReduction::kMean, 0.01, g1);
    apply_step(x0, g0, learning_rate(0.3, t));
    apply_step(x1, g1, learning_rate(0.3, t));
    ASSERT_EQ(w0.block().values, x0) << t;
    ASSERT_EQ(w1.block().values, x1) << t;
  }
}

TEST(Worker, MessagesCarryOnlyNoisyPredictions) {
  const Dataset data = tiny();
  const auto sched = schedule(2, 4, 2, 1);
  SspCoordinator coordinator(4, 1, 0);
  CoordinatorService service(coordinator);
  std::vector<Message> sent;
  InProcessCarrier carrier(service, [&](FrameDirection d, std::span<const std::uint8_t> f) {
    if (d == FrameDirection::kRequest) sent.push_back(decode(f));
  });
  const auto spec = SubModelSpec::Linear(2);
  ParameterBlock block{0, {0.5, -1.0, 0.25}};
  WorkerOptions options;
  options.noise = {NoiseMechanism::kLaplace, 3.0, 11};
  Worker worker(0, spec, data, sched, options, carrier, block);
  worker.run();

  const NoiseSpec party_noise{NoiseMechanism::kLaplace, 3.0, SplitMix64::mix(11) ^ 0};
  const auto& push = std::get<PushRequest>(sent.at(0));
  ASSERT_EQ(push.pairs.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::uint32_t i = sched->batch(1)[k];
    EXPECT_EQ(push.pairs[k].first, i);
    const double alpha = local_prediction(spec, block.values, data.row(i));
    EXPECT_EQ(push.pairs[k].second, alpha + noise_draw(party_noise, k));
  }
  // Nothing else leaves the worker: no parameters, no raw features.
  for (const Message& m : sent) {
    EXPECT_TRUE(std::holds_alternative<PushRequest>(m) ||
                std::holds_alternative<PullRequest>(m))
        << describe(m);
  }
}

TEST(Worker, EpochReportsCarrySnapshots) {
  const Dataset data = tiny();
  const auto sched = schedule(1, 4, 3, 2);  // 2 batches per epoch
  SspCoordinator coordinator(4, 1, 0);
  CoordinatorService service(coordinator);
  InProcessCarrier carrier(service);
  const auto spec = SubModelSpec::Linear(2);
  std::vector<EpochReport> reports;
  WorkerOptions options;
  options.on_epoch_end = [&](const EpochReport& r) { reports.push_back(r); };
  Worker worker(0, spec, data, sched, options, carrier, init_block(spec, 0, 0));
  worker.run();
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].epoch, 0u);
  EXPECT_EQ(reports[1].epoch, 1u);
  EXPECT_EQ(reports[0].iterations, 2u);
  EXPECT_EQ(reports[1].snapshot.values, worker.block().values);
  EXPECT_GT(reports[0].loss_sum, 0.0);
}

TEST(Worker, RetryBudgetEndsInTransportError) {
  const Dataset data = tiny();
  const auto sched = schedule(1, 4, 2, 3);
  SspCoordinator coordinator(4, 2, 0);  // peer never pushes
  CoordinatorService service(coordinator);
  InProcessCarrier carrier(service);
  const auto spec = SubModelSpec::Linear(2);
  WorkerOptions options;
  options.retry.initial = std::chrono::microseconds(10);
  options.retry.max_rejections = 5;
  Worker worker(0, spec, data, sched, options, carrier, init_block(spec, 0, 0));
  EXPECT_THROW(worker.step(1), TransportError);
  EXPECT_EQ(worker.rejections(), 5u);
}

TEST(Worker, CancellationStopsRetrying) {
  const Dataset data = tiny();
  const auto sched = schedule(1, 4, 2, 3);
  SspCoordinator coordinator(4, 2, 0);
  CoordinatorService service(coordinator);
  InProcessCarrier carrier(service);
  const auto spec = SubModelSpec::Linear(2);
  std::atomic<bool> cancelled{true};
  WorkerOptions options;
  options.cancelled = &cancelled;
  Worker worker(0, spec, data, sched, options, carrier, init_block(spec, 0, 0));
  EXPECT_THROW(worker.step(1), TransportError);
  EXPECT_EQ(worker.rejections(), 1u);
}

TEST(Worker, WrongPartyCountIsRefused) {
  const Dataset data = tiny();
  const auto sched = schedule(1, 4, 2, 1);
  SspCoordinator coordinator(4, 2, 0);
  coordinator.set_schedule(sched);
  CoordinatorService service(coordinator);
  InProcessCarrier carrier(service);
  const auto spec = SubModelSpec::Linear(2);
  Worker worker(0, spec, data, sched, {}, carrier, init_block(spec, 0, 0));
  try {
    worker.handshake(3);
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code(), static_cast<std::uint16_t>(ErrorCode::kConfigMismatch));
  }
  EXPECT_NO_THROW(worker.handshake(2));
}

TEST(Worker, MismatchedStoreIsConfigError) {
  const Dataset data = tiny();
  SspCoordinator coordinator(5, 1, 0);
  CoordinatorService service(coordinator);
  InProcessCarrier carrier(service);
  const auto spec = SubModelSpec::Linear(2);
  EXPECT_THROW(Worker(0, spec, data, schedule(1, 5, 2, 1), {}, carrier,
                      init_block(spec, 0, 0)),
               ConfigError);
  EXPECT_THROW(Worker(0, spec, data, schedule(1, 4, 2, 1), {}, carrier,
                      ParameterBlock{0, {0.0}}),
               ConfigError);
}

}  // namespace
}  // namespace fdml
