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

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdml/schedule.h"
#include "fdml/transport.h"

namespace fdml {

// Snapshot handed to the grant observer at every admitted pull.
struct GrantRecord {
  std::uint16_t worker = 0;
  std::uint64_t iteration = 0;
  std::uint64_t slowest = 0;
  std::vector<std::uint64_t> pushed;   // per-worker progress counters
  std::vector<std::uint64_t> granted;  // per-worker last granted iteration
};

// The server side of the protocol: holds the n x m matrix of latest local
// predictions and decides whether a pull may proceed.
//
// Worker progress advances on push. A pull at iteration t is granted iff
// t - t_min <= tau, where t_min is the smallest pushed iteration over all m
// workers (a worker that has not pushed yet counts as 0).
//
// Cell writes and reads are individually atomic and need no lock. Admission
// decisions are serialized by a small mutex so that every grant observes a
// consistent view of the counters; the per-sample sums are computed outside
// of it and may interleave with other workers' pushes.
class SspCoordinator {
 public:
  SspCoordinator(std::size_t samples, std::size_t parties, std::uint64_t tau);

  std::size_t samples() const { return samples_; }
  std::size_t parties() const { return parties_; }
  std::uint64_t tau() const { return tau_; }

  // When set, pushes and pulls must name exactly the samples of I(t).
  void set_schedule(std::shared_ptr<const SampleSchedule> schedule);
  const SampleSchedule* schedule() const { return schedule_.get(); }
  std::uint64_t total_iterations() const { return total_iterations_; }

  // Total iterations per worker; enables finished()/wait_until_finished().
  void set_total_iterations(std::uint64_t total);

  void set_grant_observer(std::function<void(const GrantRecord&)> observer);

  // Marks a worker as present (a first push does this implicitly).
  void register_worker(std::uint16_t worker);

  // A_{i,worker} := c for each pair; progress of `worker` becomes t.
  // Throws ProtocolError (matrix unchanged) on an unknown worker, a sample
  // id >= n, a sample outside I(t) or an iteration going backwards.
  void handle_push(std::uint16_t worker, std::uint64_t iteration,
                   std::span<const std::pair<std::uint64_t, double>> updates);

  struct PullOutcome {
    bool granted = false;
    std::uint64_t slowest = 0;
  };

  // On grant, sums[k] = sum over parties of A_{ids[k], .}, added in party
  // order starting from 0.0. Throws ProtocolError when the worker has not
  // pushed iteration t or an id is invalid.
  PullOutcome handle_pull(std::uint16_t worker, std::uint64_t iteration,
                          std::span<const std::uint64_t> sample_ids,
                          std::vector<double>& sums);

  // min over workers of last pushed iteration. Throws ProtocolError before
  // any worker registered.
  std::uint64_t slowest_iteration() const;

  double cell(std::size_t sample, std::size_t party) const;
  std::uint64_t cell_iteration(std::size_t sample, std::size_t party) const;
  std::uint64_t pushed(std::size_t worker) const;
  std::uint64_t granted(std::size_t worker) const;
  std::uint64_t rejections(std::size_t worker) const;

  bool finished() const;
  void wait_until_finished();

  // key=value lines: t_min, tau, per-worker pushed/granted/rejections.
  std::string status_text() const;

 private:
  void check_worker(std::uint16_t worker) const;
  void check_samples(std::uint64_t iteration,
                     std::span<const std::uint64_t> ids) const;
  std::uint64_t min_pushed() const;

  std::size_t samples_;
  std::size_t parties_;
  std::uint64_t tau_;
  std::shared_ptr<const SampleSchedule> schedule_;
  std::uint64_t total_iterations_ = 0;

  std::vector<std::atomic<double>> cells_;
  std::vector<std::atomic<std::uint64_t>> cell_iterations_;
  std::vector<std::atomic<std::uint64_t>> pushed_;
  std::vector<std::atomic<std::uint64_t>> granted_;
  std::vector<std::atomic<std::uint64_t>> rejections_;
  std::vector<std::atomic<bool>> registered_;

  mutable std::mutex admission_mu_;
  std::condition_variable finished_cv_;
  std::function<void(const GrantRecord&)> observer_;
};

// Adapts the coordinator to the wire protocol.
class CoordinatorService : public FrameHandler {
 public:
  explicit CoordinatorService(SspCoordinator& coordinator)
      : coordinator_(coordinator) {}

  Message handle(const Message& request);
  Reply handle_frame(std::span<const std::uint8_t> request) override;

 private:
  SspCoordinator& coordinator_;
};

}  // namespace fdml
