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

#include "fdml/metrics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "fdml/errors.h"
#include "fdml/random.h"

namespace fdml {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double blocks_squared_distance(const BlockVectors& a, const BlockVectors& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    for (std::size_t i = 0; i < a[j].size(); ++i) {
      const double d = a[j][i] - b[j][i];
      s += d * d;
    }
  }
  return s;
}

// Batch loss and per-block gradients of F_t at a full (fresh) iterate.
struct BatchEval {
  double value = 0.0;
  BlockVectors gradients;
};

BatchEval evaluate_batch(std::span<const SubModelSpec> specs,
                         std::span<const Dataset> stores,
                         std::span<const std::uint32_t> batch,
                         const BlockVectors& x, double lambda,
                         BatchReduction reduction) {
  const std::size_t m = specs.size();
  BatchEval out;
  out.gradients.resize(m);
  std::vector<double> sums(batch.size(), 0.0);
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      sums[k] += local_prediction(specs[j], x[j], stores[j].row(batch[k]));
    }
  }
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    loss += log_loss(sigmoid(sums[k]), stores[0].label(batch[k]));
  }
  if (reduction == BatchReduction::kMean) loss /= static_cast<double>(batch.size());
  out.value = loss;
  for (std::size_t j = 0; j < m; ++j) {
    out.gradients[j].assign(specs[j].parameter_dim(), 0.0);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      accumulate_prediction_gradient(
          specs[j], x[j], stores[j].row(batch[k]),
          h_term(sums[k], stores[j].label(batch[k])), out.gradients[j]);
    }
    finish_gradient(specs[j], x[j], batch.size(), reduction, lambda,
                    out.gradients[j]);
    out.value += regularizer_value(specs[j], x[j], lambda);
  }
  return out;
}

}  // namespace

double auc(std::span<const double> scores,
           std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw EvaluationError("auc: scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of (1-based, tie-averaged) ranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    const double rank = 0.5 * static_cast<double>(lo + 1 + hi);
    for (std::size_t k = lo; k < hi; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    lo = hi;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw EvaluationError("auc needs both positive and negative labels");
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) /
         (p * static_cast<double>(negatives));
}

std::vector<double> predict_sums(const CompositeModel& model,
                                 std::span<const Dataset> stores) {
  if (stores.size() != model.blocks.size() ||
      model.specs.size() != model.blocks.size()) {
    throw ConfigError("composite model and feature stores disagree on parties");
  }
  const std::size_t n = stores.empty() ? 0 : stores[0].size();
  std::vector<double> sums(n, 0.0);
  std::vector<double> local(model.blocks.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < model.blocks.size(); ++j) {
      local[j] = local_prediction(model.specs[j], model.blocks[j].values,
                                  stores[j].row(i));
    }
    sums[i] = aggregate_sum(local);
  }
  return sums;
}

double dataset_logloss(const CompositeModel& model,
                       std::span<const Dataset> stores) {
  const std::vector<double> sums = predict_sums(model, stores);
  if (sums.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    total += log_loss(sigmoid(sums[i]), stores[0].label(i));
  }
  return total / static_cast<double>(sums.size());
}

Evaluation evaluate(const CompositeModel& model,
                    std::span<const Dataset> stores) {
  const std::vector<double> sums = predict_sums(model, stores);
  Evaluation out;
  double total = 0.0;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    total += log_loss(sigmoid(sums[i]), stores[0].label(i));
  }
  out.logloss = sums.empty() ? 0.0 : total / static_cast<double>(sums.size());
  out.auc = auc(sums, stores[0].labels());
  return out;
}

double objective(const CompositeModel& model, std::span<const Dataset> stores,
                 double lambda) {
  double value = dataset_logloss(model, stores);
  for (std::size_t j = 0; j < model.blocks.size(); ++j) {
    value += regularizer_value(model.specs[j], model.blocks[j].values, lambda);
  }
  return value;
}

Optimum linear_optimum(const Dataset& data, const SubModelSpec& spec,
                       double lambda, double tolerance,
                       std::size_t max_iterations) {
  if (spec.kind != SubModelSpec::Kind::kLinear) {
    throw InstrumentationError("optimum oracle needs a linear (convex) model");
  }
  if (data.empty()) throw InstrumentationError("optimum oracle needs data");
  // Hessian of the mean log loss is bounded by max_i ||(xi_i, 1)||^2 / 4.
  double max_row = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double r = spec.use_bias ? 1.0 : 0.0;
    for (const SparseEntry& e : data.row(i)) r += e.value * e.value;
    max_row = std::max(max_row, r);
  }
  const double step = 1.0 / (0.25 * max_row + lambda);
  const double n = static_cast<double>(data.size());

  Optimum opt;
  opt.x.assign(spec.parameter_dim(), 0.0);
  std::vector<double> grad(opt.x.size());
  for (opt.iterations = 0; opt.iterations < max_iterations; ++opt.iterations) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double s = local_prediction(spec, opt.x, data.row(i));
      accumulate_prediction_gradient(spec, opt.x, data.row(i),
                                     h_term(s, data.label(i)) / n, grad);
    }
    add_regularizer_gradient(spec, opt.x, lambda, grad);
    opt.gradient_norm = std::sqrt(squared_norm(grad));
    if (opt.gradient_norm < tolerance) break;
    for (std::size_t k = 0; k < opt.x.size(); ++k) opt.x[k] -= step * grad[k];
  }
  if (opt.gradient_norm >= tolerance) {
    throw InstrumentationError("optimum oracle did not converge: |grad| = " +
                               std::to_string(opt.gradient_norm));
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    loss += log_loss(sigmoid(local_prediction(spec, opt.x, data.row(i))),
                     data.label(i));
  }
  opt.value = loss / n + regularizer_value(spec, opt.x, lambda);
  return opt;
}

std::vector<RegretPoint> regret_trace(
    std::span<const double> step_losses, double optimum_value,
    std::span<const std::uint64_t> checkpoints) {
  std::vector<RegretPoint> out;
  double running = 0.0;
  std::size_t next = 0;
  std::vector<std::uint64_t> sorted(checkpoints.begin(), checkpoints.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::uint64_t t = 1; t <= step_losses.size() && next < sorted.size(); ++t) {
    running += step_losses[t - 1];
    while (next < sorted.size() && sorted[next] == t) {
      out.push_back({t, running / static_cast<double>(t) - optimum_value});
      ++next;
    }
  }
  return out;
}

StepIdentityResult step_identity_residual(const BlockVectors& x_t,
                             const BlockVectors& x_next,
                             const BlockVectors& x_star, double eta,
                             const BlockVectors& applied,
                             const BlockVectors& fresh) {
  StepIdentityResult result;
  double lhs = 0.0;
  double applied_sq = 0.0;
  double cross = 0.0;
  double max_step_error = 0.0;
  double max_scale = 0.0;
  for (std::size_t j = 0; j < x_t.size(); ++j) {
    for (std::size_t i = 0; i < x_t[j].size(); ++i) {
      const double offset = x_t[j][i] - x_star[j][i];
      lhs += offset * fresh[j][i];
      applied_sq += applied[j][i] * applied[j][i];
      cross += offset * (fresh[j][i] - applied[j][i]);
      const double expected = x_t[j][i] - eta * applied[j][i];
      max_step_error = std::max(max_step_error, std::fabs(expected - x_next[j][i]));
      max_scale = std::max(max_scale, std::fabs(x_t[j][i]) + 1.0);
    }
  }
  const double d_t = 0.5 * blocks_squared_distance(x_t, x_star);
  const double d_next = 0.5 * blocks_squared_distance(x_next, x_star);
  const double rhs = 0.5 * eta * applied_sq - (d_next - d_t) / eta + cross;
  result.residual = std::fabs(lhs - rhs);
  result.applicable = max_step_error <= 1e-12 * max_scale;
  return result;
}

double AssumptionProbe::lipschitz_max() const {
  return lipschitz.empty() ? 0.0
                           : *std::max_element(lipschitz.begin(), lipschitz.end());
}

void AssumptionProbe::observe_gradient(double norm) {
  gradient_bound = std::max(gradient_bound, norm);
}

void AssumptionProbe::observe_distance(double half_squared_distance) {
  diameter = std::max(diameter, std::sqrt(2.0 * half_squared_distance));
}

void AssumptionProbe::observe_lipschitz(std::size_t block, double ratio) {
  if (lipschitz.size() <= block) lipschitz.resize(block + 1, 0.0);
  lipschitz[block] = std::max(lipschitz[block], ratio);
}

double regret_envelope(double eta, std::size_t parties, double gradient_bound,
                       double diameter, double lipschitz_max, std::uint64_t tau,
                       std::uint64_t iterations) {
  const double m = static_cast<double>(parties);
  const double g = gradient_bound;
  const double d = diameter;
  const double root_t = std::sqrt(static_cast<double>(iterations));
  const double lag = static_cast<double>(tau);
  return eta * m * g * g / root_t + d * d / (eta * root_t) +
         0.5 * g * d * std::pow(m, 1.5) * lipschitz_max * eta * lag / root_t *
             ((lag + 1.0) / root_t + 4.0);
}

InstrumentedRun analyze_run(const std::vector<std::vector<StepRecord>>& records,
                            std::span<const SubModelSpec> specs,
                            std::span<const Dataset> stores,
                            const SampleSchedule& schedule, double lambda,
                            BatchReduction reduction, const BlockVectors& x_star,
                            std::size_t lipschitz_pairs_per_step,
                            std::uint64_t probe_seed) {
  const std::size_t m = specs.size();
  if (records.size() != m || stores.size() != m || x_star.size() != m) {
    throw InstrumentationError("instrumented run: party counts disagree");
  }
  std::size_t steps = records[0].size();
  for (const auto& r : records) steps = std::min(steps, r.size());

  InstrumentedRun run;
  SplitMix64 rng(probe_seed);
  BlockVectors x_t(m), x_next(m), applied(m);
  for (std::size_t t = 1; t <= steps; ++t) {
    double eta = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const StepRecord& rec = records[j][t - 1];
      if (rec.iteration != t) {
        throw InstrumentationError("records are not indexed by iteration");
      }
      x_t[j] = rec.params_before;
      applied[j] = rec.gradient;
      eta = rec.eta;
      if (t < records[j].size()) {
        x_next[j] = records[j][t].params_before;
      } else {
        x_next[j] = x_t[j];
        for (std::size_t i = 0; i < x_next[j].size(); ++i) {
          x_next[j][i] -= eta * applied[j][i];
        }
      }
    }
    const auto batch = schedule.batch(t);
    const BatchEval fresh =
        evaluate_batch(specs, stores, batch, x_t, lambda, reduction);
    run.step_losses.push_back(fresh.value);

    const StepIdentityResult identity =
        step_identity_residual(x_t, x_next, x_star, eta, applied, fresh.gradients);
    if (!identity.applicable || records[0][t - 1].noisy) {
      ++run.non_applicable_steps;
    } else {
      run.identity_residuals.push_back(identity.residual);
    }

    double fresh_sq = 0.0;
    double applied_sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      fresh_sq += squared_norm(fresh.gradients[j]);
      applied_sq += squared_norm(applied[j]);
    }
    run.probe.observe_gradient(std::sqrt(std::max(fresh_sq, applied_sq)));
    run.probe.observe_distance(0.5 * blocks_squared_distance(x_t, x_star));

    // Block Lipschitz constants from random pairs around the iterate.
    for (std::size_t p = 0; p < lipschitz_pairs_per_step; ++p) {
      BlockVectors a = x_t, b = x_t;
      for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < a[j].size(); ++i) {
          a[j][i] += 0.5 * (2.0 * rng.uniform() - 1.0);
          b[j][i] += 0.5 * (2.0 * rng.uniform() - 1.0);
        }
      }
      const double dist = std::sqrt(blocks_squared_distance(a, b));
      if (dist == 0.0) continue;
      const BatchEval ga = evaluate_batch(specs, stores, batch, a, lambda, reduction);
      const BatchEval gb = evaluate_batch(specs, stores, batch, b, lambda, reduction);
      for (std::size_t j = 0; j < m; ++j) {
        double diff = 0.0;
        for (std::size_t i = 0; i < ga.gradients[j].size(); ++i) {
          const double d = ga.gradients[j][i] - gb.gradients[j][i];
          diff += d * d;
        }
        run.probe.observe_lipschitz(j, std::sqrt(diff) / dist);
      }
    }
  }
  return run;
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << kReportHeader << "\n";
  const auto old_precision = out.precision();
  out << std::setprecision(17);
  for (const ReportRow& r : rows) {
    out << r.scheme << "," << r.epoch << "," << r.train_objective << ","
        << r.test_logloss << "," << r.test_auc << "," << r.elapsed_s << "\n";
  }
  out.precision(old_precision);
}

std::vector<ReportRow> read_report_csv(std::istream& in) {
  std::vector<ReportRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kReportHeader) throw ParseError("unexpected report header", 1);
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) throw ParseError("expected 6 report fields", line_no);
    try {
      rows.push_back(ReportRow{fields[0], std::stoul(fields[1]),
                               std::stod(fields[2]), std::stod(fields[3]),
                               std::stod(fields[4]), std::stod(fields[5])});
    } catch (const std::exception&) {
      throw ParseError("malformed report number", line_no);
    }
  }
  return rows;
}

std::string summary_table(std::span<const ReportRow> rows) {
  std::vector<std::string> order;
  std::map<std::string, ReportRow> last;
  for (const ReportRow& r : rows) {
    if (!last.contains(r.scheme)) order.push_back(r.scheme);
    last[r.scheme] = r;
  }
  std::size_t width = std::string("Algorithm").size();
  for (const auto& s : order) width = std::max(width, s.size());

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "Algorithm"
      << "  Train loss  Test loss  Test AUC  Time(s)\n";
  out << std::fixed;
  for (const auto& s : order) {
    const ReportRow& r = last[s];
    out << std::left << std::setw(static_cast<int>(width)) << s << std::right
        << "  " << std::setw(10) << std::setprecision(4) << r.train_objective
        << "  " << std::setw(9) << r.test_logloss << "  " << std::setw(8)
        << r.test_auc << "  " << std::setw(7) << std::setprecision(1)
        << r.elapsed_s << "\n";
  }
  return out.str();
}

}  // namespace fdml
