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
#include <span>
#include <string>
#include <vector>

#include "fdml/data.h"
#include "fdml/metrics.h"
#include "fdml/model.h"

namespace fdml {

// Dense synthetic binary task: features ~ N(0, 1) (zeros dropped), labels
// drawn from a logistic model with weights ~ N(0, 1).
Dataset make_synthetic(std::size_t samples, std::size_t dim, std::uint64_t seed);

struct GradientCheck {
  std::size_t cases = 0;
  std::size_t coordinates = 0;
  std::size_t failures = 0;
  double max_relative_error = 0.0;
};

// Compares partial_gradient against central finite differences of an
// independently written loss, on random single-sample cases.
GradientCheck check_gradients(SubModelSpec::Kind kind, std::size_t cases,
                              std::uint64_t seed, double step = 1e-5,
                              double tolerance = 1e-4);

struct StepIdentityCheck {
  std::size_t steps = 0;
  std::size_t non_applicable = 0;
  double max_residual = 0.0;
  std::uint64_t max_lag = 0;  // largest observed iteration lead at a grant
};

// Two-party synthetic LR under seeded interleaving with staleness bound tau.
StepIdentityCheck check_step_identity(std::size_t steps, std::uint64_t tau,
                         std::uint64_t seed);

struct RegretRun {
  std::vector<RegretPoint> points;
  std::vector<double> envelope;  // bound at each checkpoint
  AssumptionProbe probe;
  double optimum_value = 0.0;
  std::uint64_t max_lag = 0;
};

// Two-party convex LR on make_synthetic(200, 10, seed), optimum from the
// full-batch oracle, regret and probed bound at each checkpoint. tau > 0
// runs the workers under seeded interleaving with uneven speeds.
RegretRun regret_experiment(std::uint64_t seed, std::uint64_t tau,
                            std::span<const std::uint64_t> checkpoints,
                            double eta = 0.5, double lambda = 1e-2,
                            std::size_t batch = 10);

struct ProtocolCheck {
  std::size_t round_trips = 0;
  std::size_t round_trip_failures = 0;
  std::size_t fuzzed = 0;
  std::size_t fuzz_crashes = 0;  // anything other than a clean DecodeError
  bool reference_bytes_ok = false;
};

ProtocolCheck check_protocol(std::size_t messages, std::size_t fuzz_frames,
                             std::uint64_t seed);

struct SuiteOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runs the named suites ("gradients", "lemma1", "protocol"). Unknown names
// throw ConfigError.
std::vector<SuiteOutcome> run_suites(const std::vector<std::string>& names,
                                     std::uint64_t seed = 1);

}  // namespace fdml
