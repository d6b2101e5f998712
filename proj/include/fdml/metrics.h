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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fdml/data.h"
#include "fdml/model.h"
#include "fdml/schedule.h"
#include "fdml/worker.h"

namespace fdml {

// Rank-based (Mann-Whitney) AUC, ties counted 1/2. Throws EvaluationError
// unless both classes are present.
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// The composite model as seen by an evaluator holding every block.
struct CompositeModel {
  std::vector<SubModelSpec> specs;
  std::vector<ParameterBlock> blocks;
};

// Per-sample sum of local predictions; stores[j] is party j's projection of
// the evaluated dataset.
std::vector<double> predict_sums(const CompositeModel& model,
                                 std::span<const Dataset> stores);

// Mean log loss, no regularizer.
double dataset_logloss(const CompositeModel& model,
                       std::span<const Dataset> stores);

struct Evaluation {
  double logloss = 0.0;
  double auc = 0.0;
};
Evaluation evaluate(const CompositeModel& model,
                    std::span<const Dataset> stores);

// F(x): mean log loss plus lambda * sum_j z^j(x^j).
double objective(const CompositeModel& model, std::span<const Dataset> stores,
                 double lambda);

// --- convergence instrumentation -------------------------------------------

using BlockVectors = std::vector<std::vector<double>>;

struct Optimum {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

// x_* of the centralized linear problem by full-batch gradient descent,
// stopping at ||grad F|| < tolerance. Throws InstrumentationError if
// max_iterations pass first.
Optimum linear_optimum(const Dataset& data, const SubModelSpec& spec,
                       double lambda, double tolerance = 1e-10,
                       std::size_t max_iterations = 2'000'000);

struct RegretPoint {
  std::uint64_t iterations = 0;
  double regret = 0.0;
};

// R(T') = (1/T') sum_{t <= T'} F_t(x_t) - F(x_*) at each checkpoint.
std::vector<RegretPoint> regret_trace(std::span<const double> step_losses,
                                      double optimum_value,
                                      std::span<const std::uint64_t> checkpoints);

struct StepIdentityResult {
  double residual = 0.0;
  // False when x_next is not x_t - eta * applied (noise, clipping, ...); the
  // identity does not apply to such a step.
  bool applicable = true;
};

// |LHS - RHS| of the per-step identity
//   <x_t - x_*, grad F_t(x_t)> = eta/2 sum_j ||g_j||^2 - (D_{t+1} - D_t)/eta
//                                + sum_j <x_t^j - x_*^j, grad_j F_t(x_t) - g_j>
// where g_j is the applied (possibly stale) block gradient and
// D_t = ||x_t - x_*||^2 / 2.
StepIdentityResult step_identity_residual(const BlockVectors& x_t, const BlockVectors& x_next,
                             const BlockVectors& x_star, double eta,
                             const BlockVectors& applied,
                             const BlockVectors& fresh);

// Running estimates of the constants the regret bound is stated in.
struct AssumptionProbe {
  double gradient_bound = 0.0;  // G: max ||grad F_t||
  double diameter = 0.0;        // D: max sqrt(2 D_t)
  std::vector<double> lipschitz;  // L_j
  double lipschitz_max() const;

  void observe_gradient(double norm);
  void observe_distance(double half_squared_distance);
  void observe_lipschitz(std::size_t block, double ratio);
};

// eta m G^2/sqrt(T) + D^2/(eta sqrt(T))
//   + G D m^{3/2} L_max eta tau / (2 sqrt(T)) * ((tau + 1)/sqrt(T) + 4)
double regret_envelope(double eta, std::size_t parties, double gradient_bound,
                       double diameter, double lipschitz_max, std::uint64_t tau,
                       std::uint64_t iterations);

// Everything derived from an instrumented run: the virtual iterate
// x_t = (x_t^1, ..., x_t^m) is assembled from each worker's own iteration-t
// parameters, the fresh gradient is recomputed from it, and the applied one
// is taken from the records.
struct InstrumentedRun {
  std::vector<double> step_losses;  // F_t(x_t)
  std::vector<double> identity_residuals;
  std::size_t non_applicable_steps = 0;
  AssumptionProbe probe;
};

// records[j][t-1] is worker j's StepRecord for iteration t. stores are the
// party projections of the training set; x_star is split per block.
InstrumentedRun analyze_run(const std::vector<std::vector<StepRecord>>& records,
                            std::span<const SubModelSpec> specs,
                            std::span<const Dataset> stores,
                            const SampleSchedule& schedule, double lambda,
                            BatchReduction reduction, const BlockVectors& x_star,
                            std::size_t lipschitz_pairs_per_step = 2,
                            std::uint64_t probe_seed = 7);

// --- reports -----------------------------------------------------------------

struct ReportRow {
  std::string scheme;
  std::size_t epoch = 0;
  double train_objective = 0.0;
  double test_logloss = 0.0;
  double test_auc = 0.0;
  double elapsed_s = 0.0;

  bool operator==(const ReportRow&) const = default;
};

inline constexpr const char* kReportHeader =
    "scheme,epoch,train_objective,test_logloss,test_auc,elapsed_s";

// Header plus one row each; reals printed with 17 significant digits.
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);
std::vector<ReportRow> read_report_csv(std::istream& in);

// Last row of every scheme, as an aligned text table with the columns
// Algorithm, Train loss, Test loss, Test AUC, Time(s).
std::string summary_table(std::span<const ReportRow> rows);

}  // namespace fdml
