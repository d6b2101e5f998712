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
#include <thread>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "fdml/coordinator.h"
#include "fdml/errors.h"
#include "fdml/schedule.h"

namespace fdml {
namespace {

using Pairs = std::vector<std::pair<std::uint64_t, double>>;
using Ids = std::vector<std::uint64_t>;

TEST(Matrix, SingleWriteLeavesOtherColumnsZero) {
  SspCoordinator c(10, 3, 0);
  c.handle_push(0, 1, Pairs{{5, 0.3}});
  EXPECT_EQ(c.cell(5, 0), 0.3);
  EXPECT_EQ(c.cell(5, 1), 0.0);
  EXPECT_EQ(c.cell(5, 2), 0.0);
  EXPECT_EQ(c.cell(4, 0), 0.0);
  EXPECT_EQ(c.cell_iteration(5, 0), 1u);
}

TEST(Matrix, LastWriterWins) {
  SspCoordinator c(10, 1, 0);
  c.handle_push(0, 1, Pairs{{2, 0.3}});
  c.handle_push(0, 2, Pairs{{2, -0.1}});
  EXPECT_EQ(c.cell(2, 0), -0.1);
}

TEST(Matrix, OutOfRangeSampleLeavesMatrixUnchanged) {
  SspCoordinator c(10, 2, 0);
  try {
    c.handle_push(1, 1, Pairs{{3, 1.0}, {10, 2.0}});
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code(), static_cast<std::uint16_t>(ErrorCode::kSampleOutOfRange));
  }
  EXPECT_EQ(c.cell(3, 1), 0.0);
  EXPECT_EQ(c.pushed(1), 0u);
}

TEST(Matrix, UnknownWorker) {
  SspCoordinator c(10, 2, 0);
  try {
    c.handle_push(2, 1, Pairs{});
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.code(), static_cast<std::uint16_t>(ErrorCode::kUnknownWorker));
  }
}

TEST(Admission, SingleWorkerAlwaysGranted) {
  SspCoordinator c(4, 1, 0);
  std::vector<double> sums;
  for (std::uint64_t t = 1; t <= 20; ++t) {
    c.handle_push(0, t, Pairs{{t % 4, 1.0}});
    EXPECT_TRUE(c.handle_pull(0, t, Ids{t % 4}, sums).granted);
    EXPECT_EQ(c.slowest_iteration(), t);
  }
}

TEST(Admission, RejectsWhenAheadByMoreThanTau) {
  SspCoordinator c(4, 2, 3);
  std::vector<double> sums;
  c.handle_push(1, 1, Pairs{});
  for (std::uint64_t t = 1; t <= 5; ++t) c.handle_push(0, t, Pairs{});
  const auto out = c.handle_pull(0, 5, Ids{0}, sums);
  EXPECT_FALSE(out.granted);
  EXPECT_EQ(out.slowest, 1u);
  EXPECT_EQ(c.rejections(0), 1u);
  EXPECT_EQ(c.granted(0), 0u);
}

TEST(Admission, GrantsWithinTauAndSumsRow) {
  SspCoordinator c(8, 3, 3);
  c.handle_push(1, 1, Pairs{{6, -0.5}});
  c.handle_push(2, 2, Pairs{{6, 0.1}});
  for (std::uint64_t t = 1; t <= 4; ++t) {
    c.handle_push(0, t, t == 4 ? Pairs{{6, 0.2}} : Pairs{});
  }
  std::vector<double> sums;
  const auto out = c.handle_pull(0, 4, Ids{6}, sums);
  EXPECT_TRUE(out.granted);
  EXPECT_EQ(out.slowest, 1u);
  ASSERT_EQ(sums.size(), 1u);
  EXPECT_DOUBLE_EQ(sums[0], -0.2);
  EXPECT_EQ(sums[0], (0.0 + 0.2) + -0.5 + 0.1);  // party order from 0.0
}

TEST(Admission, UnpushedWorkersCountAsZero) {
  SspCoordinator c(4, 2, 1);
  std::vector<double> sums;
  c.handle_push(0, 1, Pairs{});
  EXPECT_TRUE(c.handle_pull(0, 1, Ids{}, sums).granted);
  c.handle_push(0, 2, Pairs{});
  EXPECT_FALSE(c.handle_pull(0, 2, Ids{}, sums).granted);
}

TEST(Slowest, MinimumOverWorkers) {
  SspCoordinator one(2, 1, 0);
  EXPECT_THROW(one.slowest_iteration(), ProtocolError);
  for (std::uint64_t t = 1; t <= 3; ++t) one.handle_push(0, t, Pairs{});
  EXPECT_EQ(one.slowest_iteration(), 3u);

  SspCoordinator c(2, 3, 100);
  for (std::uint64_t t = 1; t <= 7; ++t) c.handle_push(0, t, Pairs{});
  for (std::uint64_t t = 1; t <= 2; ++t) c.handle_push(1, t, Pairs{});
  for (std::uint64_t t = 1; t <= 5; ++t) c.handle_push(2, t, Pairs{});
  EXPECT_EQ(c.slowest_iteration(), 2u);
  c.handle_push(1, 3, Pairs{});
  c.handle_push(1, 4, Pairs{});
  EXPECT_EQ(c.slowest_iteration(), 4u);
}

TEST(Protocol, PullWithoutMatchingPushIsRejectedAsError) {
  SspCoordinator c(4, 1, 0);
  std::vector<double> sums;
  EXPECT_THROW(c.handle_pull(0, 1, Ids{}, sums), ProtocolError);
  c.handle_push(0, 1, Pairs{});
  EXPECT_THROW(c.handle_pull(0, 2, Ids{}, sums), ProtocolError);
  c.handle_push(0, 2, Pairs{});
  EXPECT_THROW(c.handle_push(0, 1, Pairs{}), ProtocolError);
}

TEST(Protocol, ScheduleValidation) {
  auto schedule = std::make_shared<const SampleSchedule>(SampleSchedule::generate(3, 6, 2, 1));
  SspCoordinator c(6, 1, 0);
  c.set_schedule(schedule);
  const auto b = schedule->batch(1);
  Pairs good;
  for (auto i : b) good.emplace_back(i, 1.0);
  c.handle_push(0, 1, good);
  Pairs wrong = good;
  std::swap(wrong[0], wrong[1]);
  EXPECT_THROW(c.handle_push(0, 2, wrong), ProtocolError);
  EXPECT_THROW(c.handle_push(0, 4, Pairs{}), ProtocolError);
  EXPECT_THROW(c.set_schedule(std::make_shared<const SampleSchedule>(
                   SampleSchedule::generate(3, 7, 2, 1))),
               ConfigError);
}

TEST(Service, HelloValidatesConfiguration) {
  auto schedule = std::make_shared<const SampleSchedule>(SampleSchedule::generate(1, 10, 3, 2));
  SspCoordinator c(10, 2, 4);
  c.set_schedule(schedule);
  CoordinatorService service(c);
  const Hello good{1, 2, 10, schedule->iterations(), schedule->digest()};
  EXPECT_EQ(service.handle(good), Message(Welcome{4}));

  auto code_of = [&](const Hello& h) {
    const Message m = service.handle(h);
    EXPECT_TRUE(std::holds_alternative<ErrorReply>(m));
    return std::get<ErrorReply>(m).code;
  };
  Hello wrong_m = good;
  wrong_m.parties = 3;
  EXPECT_EQ(code_of(wrong_m), static_cast<std::uint16_t>(ErrorCode::kConfigMismatch));
  Hello wrong_id = good;
  wrong_id.worker = 2;
  EXPECT_EQ(code_of(wrong_id), static_cast<std::uint16_t>(ErrorCode::kUnknownWorker));
  Hello wrong_digest = good;
  wrong_digest.schedule_digest ^= 1;
  EXPECT_EQ(code_of(wrong_digest), static_cast<std::uint16_t>(ErrorCode::kConfigMismatch));
  Hello wrong_t = good;
  wrong_t.iterations += 1;
  EXPECT_EQ(code_of(wrong_t), static_cast<std::uint16_t>(ErrorCode::kConfigMismatch));
}

TEST(Service, MapsRequestsAndErrors) {
  SspCoordinator c(4, 1, 0);
  CoordinatorService service(c);
  EXPECT_EQ(service.handle(PushRequest{0, 1, {{2, 0.5}}}), Message(PushAck{1}));
  EXPECT_EQ(service.handle(PullRequest{0, 1, {2}}), Message(PullGrant{1, {0.5}}));
  const Message bad = service.handle(PushRequest{0, 2, {{4, 0.5}}});
  ASSERT_TRUE(std::holds_alternative<ErrorReply>(bad));
  EXPECT_EQ(std::get<ErrorReply>(bad).code,
            static_cast<std::uint16_t>(ErrorCode::kSampleOutOfRange));
  const Message unexpected = service.handle(PushAck{1});
  EXPECT_EQ(std::get<ErrorReply>(unexpected).code,
            static_cast<std::uint16_t>(ErrorCode::kUnexpectedMessage));
}

TEST(Service, MalformedFrameClosesConnection) {
  SspCoordinator c(4, 1, 0);
  CoordinatorService service(c);
  const std::vector<std::uint8_t> junk = {1, 0, 0, 0, 99};
  const auto reply = service.handle_frame(junk);
  EXPECT_TRUE(reply.close_connection);
  const Message m = decode(reply.frame);
  EXPECT_EQ(std::get<ErrorReply>(m).code,
            static_cast<std::uint16_t>(ErrorCode::kMalformedFrame));
}

TEST(Status, ReportsProgress) {
  SspCoordinator c(4, 2, 2);
  c.set_total_iterations(1);
  std::vector<double> sums;
  c.handle_push(0, 1, Pairs{});
  c.handle_push(1, 1, Pairs{});
  c.handle_pull(0, 1, Ids{}, sums);
  EXPECT_FALSE(c.finished());
  c.handle_pull(1, 1, Ids{}, sums);
  EXPECT_TRUE(c.finished());
  c.wait_until_finished();
  const std::string s = c.status_text();
  EXPECT_NE(s.find("t_min=1\n"), std::string::npos);
  EXPECT_NE(s.find("tau=2\n"), std::string::npos);
  EXPECT_NE(s.find("worker.1.granted=1\n"), std::string::npos);
  EXPECT_NE(s.find("finished=1\n"), std::string::npos);
}

TEST(Concurrency, BoundHoldsUnderContention) {
  constexpr std::uint64_t kTau = 2, kT = 300;
  constexpr std::size_t kM = 4;
  SspCoordinator c(8, kM, kTau);
  std::atomic<bool> violated{false};
  c.set_grant_observer([&](const GrantRecord& g) {
    const std::uint64_t t_min = *std::min_element(g.pushed.begin(), g.pushed.end());
    const std::uint64_t lead = *std::max_element(g.granted.begin(), g.granted.end());
    if (lead > t_min + kTau || g.iteration - g.slowest > kTau) violated = true;
  });
  std::vector<std::thread> workers;
  for (std::size_t j = 0; j < kM; ++j) {
    workers.emplace_back([&, j] {
      std::vector<double> sums;
      for (std::uint64_t t = 1; t <= kT; ++t) {
        c.handle_push(static_cast<std::uint16_t>(j), t, Pairs{{t % 8, 1.0}});
        while (!c.handle_pull(static_cast<std::uint16_t>(j), t, Ids{t % 8}, sums).granted) {
          std::this_thread::yield();
        }
        if (j == 0) std::this_thread::sleep_for(std::chrono::microseconds(50));
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_FALSE(violated);
  EXPECT_GT(c.rejections(1) + c.rejections(2) + c.rejections(3), 0u);
}

}  // namespace
}  // namespace fdml
