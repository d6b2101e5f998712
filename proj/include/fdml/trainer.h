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

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fdml/coordinator.h"
#include "fdml/data.h"
#include "fdml/metrics.h"
#include "fdml/model.h"
#include "fdml/privacy.h"
#include "fdml/worker.h"

namespace fdml {

// local: party 0's slice only. centralized: one model over every feature.
// fdml: one worker per party behind the SSP coordinator.
enum class Scheme { kLocal, kCentralized, kFdml };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme scheme);

enum class CarrierKind { kInProcess, kSocket };

struct TrainingConfig {
  Scheme scheme = Scheme::kFdml;
  SubModelSpec::Kind model = SubModelSpec::Kind::kLinear;
  std::size_t parties = 2;
  std::vector<std::size_t> partition_sizes;  // empty: near-even contiguous split
  std::string partition_file;
  std::uint64_t tau = 8;
  double eta = 2.0;
  double lambda = 1e-4;
  std::size_t batch = 100;
  std::size_t epochs = 40;
  std::uint64_t seed = 1;
  BatchReduction reduction = BatchReduction::kMean;
  NoiseSpec noise{NoiseMechanism::kLaplace, 0.0, 0};
  bool deterministic = false;
  bool use_bias = true;
  std::size_t hidden = 64;
  Activation activation = Activation::kRelu;
  CarrierKind carrier = CarrierKind::kInProcess;
  RetryPolicy retry;

  // Single-thread seeded random interleaving of the workers' push, pull and
  // update phases through the real coordinator. Produces genuine bounded
  // staleness reproducibly; used by the convergence instrumentation.
  std::optional<std::uint64_t> interleave_seed;
  // Relative worker speeds for the interleaved driver (empty: equal).
  std::vector<double> interleave_speeds;

  // Per-epoch test evaluation (the trace); off for pure trajectory runs.
  bool evaluate_epochs = true;
};

struct TrainingHooks {
  std::function<void(const StepRecord&)> recorder;
  std::function<void(int, std::uint64_t)> before_step;
  std::function<void(const GrantRecord&)> grant_observer;
  FrameTap frame_tap;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double train_objective = 0.0;
  double test_logloss = 0.0;
  double test_auc = 0.0;
  double elapsed_seconds = 0.0;
};

struct TrainingResult {
  Scheme scheme = Scheme::kFdml;
  CompositeModel model;
  std::vector<EpochMetrics> trace;
  std::uint64_t rejections = 0;
  std::string coordinator_status;
  double seconds = 0.0;
};

// The partition a config implies for a dataset of dimension `dim`.
VerticalPartition make_partition(const TrainingConfig& config, std::size_t dim);

// The sub-model each party (or the single centralized/local model) trains.
std::vector<SubModelSpec> model_specs(const TrainingConfig& config,
                                      const VerticalPartition& partition);

// Runs one scheme end to end.
TrainingResult run_training(const TrainingConfig& config,
                            const DatasetSplit& data,
                            const TrainingHooks& hooks = {});

// Same, with a partition given explicitly.
TrainingResult run_training(const TrainingConfig& config,
                            const DatasetSplit& data,
                            const VerticalPartition& partition,
                            const TrainingHooks& hooks = {});

// Trace rows labelled like "LR FDML" or "NN local".
std::vector<ReportRow> report_rows(const TrainingConfig& config,
                                   const TrainingResult& result);

}  // namespace fdml
