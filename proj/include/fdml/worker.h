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
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fdml/data.h"
#include "fdml/model.h"
#include "fdml/privacy.h"
#include "fdml/schedule.h"
#include "fdml/transport.h"

namespace fdml {

enum class BatchReduction { kSum, kMean };

BatchReduction parse_reduction(const std::string& name);
std::string to_string(BatchReduction reduction);

// Back-off for rejected pulls: wait `initial`, doubling up to `cap`.
// max_rejections == 0 retries forever.
struct RetryPolicy {
  std::chrono::microseconds initial{1000};
  std::chrono::microseconds cap{100000};
  std::uint64_t max_rejections = 0;
};

// What one worker did at one iteration; emitted only when a recorder is set.
struct StepRecord {
  int party = 0;
  std::uint64_t iteration = 0;
  double eta = 0.0;
  std::vector<double> params_before;
  std::vector<double> gradient;  // exactly what was applied
  std::vector<double> sums;      // pulled aggregates, one per sample of I(t)
  bool noisy = false;
};

struct EpochReport {
  int party = 0;
  std::size_t epoch = 0;
  ParameterBlock snapshot;
  double loss_sum = 0.0;         // sum over iterations of batch-mean loss
  double regularizer_sum = 0.0;  // sum over iterations of z^j(x_t^j)
  std::uint64_t iterations = 0;
};

struct WorkerOptions {
  double eta = 0.05;
  double lambda = 0.0;
  BatchReduction reduction = BatchReduction::kMean;
  NoiseSpec noise{NoiseMechanism::kNone, 0.0, 0};
  RetryPolicy retry;
  std::function<void(const StepRecord&)> recorder;
  std::function<void(const EpochReport&)> on_epoch_end;
  // Checked while retrying rejected pulls; once set, the worker gives up
  // with TransportError. Lets a driver unblock peers of a failed worker.
  const std::atomic<bool>* cancelled = nullptr;
  // Called at the top of every step; tests use it to inject slowdowns.
  std::function<void(int party, std::uint64_t iteration)> before_step;
};

// Completes the batch gradient: reduce the accumulated data term, then add
// the regularizer once. Shared by every training scheme so the arithmetic is
// identical across them.
void finish_gradient(const SubModelSpec& spec, std::span<const double> params,
                     std::size_t batch_size, BatchReduction reduction,
                     double lambda, std::span<double> grad);

// x := x - eta_t * g. Throws DivergenceError if g has a non-finite entry.
void apply_step(std::span<double> params, std::span<const double> grad,
                double eta_t);

// One party's training agent. Owns its parameter block exclusively and talks
// to the coordinator only through the carrier.
class Worker {
 public:
  Worker(std::uint16_t party, SubModelSpec spec, const Dataset& store,
         std::shared_ptr<const SampleSchedule> schedule, WorkerOptions options,
         Carrier& carrier, ParameterBlock initial);

  // Hello/Welcome exchange. Throws ProtocolError if the coordinator refuses.
  void handshake(std::size_t parties);

  // The three phases of an iteration, exposed separately so that a driver
  // can interleave several workers in one thread.
  void push(std::uint64_t t);
  bool try_pull(std::uint64_t t);
  void update(std::uint64_t t);

  // push, pull (retrying under the policy), update.
  void step(std::uint64_t t);

  // Every iteration of the schedule.
  void run();

  std::uint16_t party() const { return party_; }
  const ParameterBlock& block() const { return block_; }
  const SubModelSpec& spec() const { return spec_; }
  std::uint64_t rejections() const { return rejections_; }

 private:
  std::uint16_t party_;
  SubModelSpec spec_;
  const Dataset& store_;
  std::shared_ptr<const SampleSchedule> schedule_;
  WorkerOptions options_;
  Carrier& carrier_;
  ParameterBlock block_;

  std::vector<double> sums_;
  std::vector<double> grad_;
  std::uint64_t rejections_ = 0;
  EpochReport epoch_;
};

}  // namespace fdml
