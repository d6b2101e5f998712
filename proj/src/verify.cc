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

#include "fdml/verify.h"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include "fdml/errors.h"
#include "fdml/metrics.h"
#include "fdml/random.h"
#include "fdml/trainer.h"
#include "fdml/transport.h"

namespace fdml {
namespace {

double gaussian(SplitMix64& rng) {
  double u1 = rng.uniform();
  while (u1 <= 0.0) u1 = rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double symmetric(SplitMix64& rng, double half_width) {
  return (2.0 * rng.uniform() - 1.0) * half_width;
}

// Reference forward pass written against the documented parameter layout,
// on a dense copy of the row. Deliberately shares nothing with model.cc.
double reference_output(const SubModelSpec& spec, const std::vector<double>& x,
                        const std::vector<double>& dense,
                        double* min_abs_hidden = nullptr) {
  const std::size_t d = spec.input_dim;
  if (spec.kind == SubModelSpec::Kind::kLinear) {
    double s = spec.use_bias ? x[d] : 0.0;
    for (std::size_t i = 0; i < d; ++i) s += x[i] * dense[i];
    return s;
  }
  const std::size_t h = spec.hidden_units;
  const std::size_t b1 = d * h, w2 = b1 + h, b2 = w2 + h;
  double out = x[b2];
  for (std::size_t k = 0; k < h; ++k) {
    double z = x[b1 + k];
    for (std::size_t i = 0; i < d; ++i) z += x[i * h + k] * dense[i];
    if (min_abs_hidden) *min_abs_hidden = std::min(*min_abs_hidden, std::fabs(z));
    const double a = spec.activation == Activation::kRelu ? std::max(z, 0.0)
                                                          : std::tanh(z);
    out += x[w2 + k] * a;
  }
  return out;
}

// log(1 + e^s) - y s, the unclamped log loss of sigma(s).
double reference_loss(double s, int y) {
  const double softplus = s > 0 ? s + std::log1p(std::exp(-s))
                                : std::log1p(std::exp(s));
  return softplus - y * s;
}

double reference_objective(const SubModelSpec& spec,
                           const std::vector<double>& x,
                           const std::vector<double>& dense, double others,
                           int y, double lambda) {
  double reg = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (spec.is_regularized(i)) reg += x[i] * x[i];
  }
  return reference_loss(reference_output(spec, x, dense) + others, y) +
         0.5 * lambda * reg;
}

Message random_message(SplitMix64& rng) {
  auto real = [&] { return symmetric(rng, 1e6) * std::pow(10.0, symmetric(rng, 20)); };
  const std::size_t n = rng.below(8) == 0 ? 0 : rng.below(64);
  switch (rng.below(8)) {
    case 0: {
      PushRequest m{static_cast<std::uint16_t>(rng.next()), rng.next(), {}};
      for (std::size_t k = 0; k < n; ++k) m.pairs.emplace_back(rng.next(), real());
      return m;
    }
    case 1:
      return PushAck{rng.next()};
    case 2: {
      PullRequest m{static_cast<std::uint16_t>(rng.next()), rng.next(), {}};
      for (std::size_t k = 0; k < n; ++k) m.sample_ids.push_back(rng.next());
      return m;
    }
    case 3: {
      PullGrant m{rng.next(), {}};
      for (std::size_t k = 0; k < n; ++k) m.sums.push_back(real());
      return m;
    }
    case 4:
      return PullReject{rng.next(), rng.next()};
    case 5: {
      ErrorReply m{static_cast<std::uint16_t>(rng.next()), {}};
      for (std::size_t k = 0; k < n; ++k) {
        m.detail.push_back(static_cast<char>(rng.next()));
      }
      return m;
    }
    case 6:
      return Hello{static_cast<std::uint16_t>(rng.next()),
                   static_cast<std::uint16_t>(rng.next()), rng.next(),
                   rng.next(), rng.next()};
    default:
      return Welcome{rng.next()};
  }
}

std::vector<std::uint8_t> mutate(std::vector<std::uint8_t> frame,
                                 SplitMix64& rng) {
  switch (rng.below(5)) {
    case 0:  // flip bits
      for (int k = 0, n = 1 + static_cast<int>(rng.below(4)); k < n; ++k) {
        frame[rng.below(frame.size())] ^= static_cast<std::uint8_t>(1u << rng.below(8));
      }
      break;
    case 1:  // truncate
      frame.resize(rng.below(frame.size()));
      break;
    case 2:  // append junk, then fix up the length to cover it
      for (std::size_t k = 0, n = 1 + rng.below(16); k < n; ++k) {
        frame.push_back(static_cast<std::uint8_t>(rng.next()));
      }
      if (rng.below(2) == 0) {
        const auto body = static_cast<std::uint32_t>(frame.size() - 4);
        for (int b = 0; b < 4; ++b) frame[b] = static_cast<std::uint8_t>(body >> (8 * b));
      }
      break;
    case 3:  // random tag
      if (frame.size() > 4) frame[4] = static_cast<std::uint8_t>(rng.next());
      break;
    default:  // pure noise
      frame.resize(rng.below(96));
      for (auto& b : frame) b = static_cast<std::uint8_t>(rng.next());
      break;
  }
  return frame;
}

std::string format(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

}  // namespace

Dataset make_synthetic(std::size_t samples, std::size_t dim,
                       std::uint64_t seed) {
  SplitMix64 rng(SplitMix64::mix(seed) ^ 0x5eedULL);
  std::vector<double> w(dim);
  for (double& v : w) v = gaussian(rng);
  Dataset data;
  data.reserve(samples, samples * dim);
  std::vector<SparseEntry> row;
  for (std::size_t i = 0; i < samples; ++i) {
    row.clear();
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double v = gaussian(rng);
      if (v == 0.0) continue;
      row.push_back({static_cast<std::uint32_t>(k), v});
      s += w[k] * v;
    }
    const int y = rng.uniform() < 1.0 / (1.0 + std::exp(-s)) ? 1 : 0;
    data.add_row(y, row);
  }
  return data;
}

GradientCheck check_gradients(SubModelSpec::Kind kind, std::size_t cases,
                              std::uint64_t seed, double step,
                              double tolerance) {
  SplitMix64 rng(seed);
  GradientCheck result;
  while (result.cases < cases) {
    const std::size_t d = 1 + rng.below(8);
    const SubModelSpec spec =
        kind == SubModelSpec::Kind::kLinear
            ? SubModelSpec::Linear(d, rng.below(2) == 0)
            : SubModelSpec::FeedForward(d, 1 + rng.below(8),
                                        rng.below(2) == 0 ? Activation::kRelu
                                                          : Activation::kTanh);
    std::vector<SparseEntry> row;
    std::vector<double> dense(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      if (rng.below(4) == 0) continue;
      dense[i] = symmetric(rng, 2.0);
      row.push_back({static_cast<std::uint32_t>(i), dense[i]});
    }
    std::vector<double> x(spec.parameter_dim());
    for (double& v : x) v = symmetric(rng, 1.0);
    const double others = symmetric(rng, 1.0);
    const int y = static_cast<int>(rng.below(2));
    const double lambda = rng.uniform() * 0.1;

    // Stay clear of the ReLU kink, where the derivative is undefined.
    double min_abs_hidden = 1.0;
    reference_output(spec, x, dense, &min_abs_hidden);
    if (spec.kind == SubModelSpec::Kind::kFeedForward &&
        spec.activation == Activation::kRelu && min_abs_hidden < 1e-3) {
      continue;
    }
    ++result.cases;

    const double s = local_prediction(spec, x, row) + others;
    const std::vector<double> analytic =
        partial_gradient(spec, x, row, h_term(s, y), lambda);
    for (std::size_t i = 0; i < x.size(); ++i) {
      std::vector<double> plus = x, minus = x;
      plus[i] += step;
      minus[i] -= step;
      const double numeric =
          (reference_objective(spec, plus, dense, others, y, lambda) -
           reference_objective(spec, minus, dense, others, y, lambda)) /
          (2.0 * step);
      const double scale = std::max(std::fabs(analytic[i]), std::fabs(numeric));
      const double err = std::fabs(analytic[i] - numeric);
      ++result.coordinates;
      // Below 1e-6 the finite difference itself is dominated by rounding.
      const double rel = scale < 1e-6 ? err / 1e-6 : err / scale;
      result.max_relative_error = std::max(result.max_relative_error, rel);
      if (rel > tolerance) ++result.failures;
    }
  }
  return result;
}

namespace {

// A two-party synthetic LR run with every step recorded, analysed against
// the full-batch optimum.
struct Instrumented {
  InstrumentedRun run;
  Optimum optimum;
  std::uint64_t max_lag = 0;
};

Instrumented instrumented_run(std::uint64_t seed, std::uint64_t tau,
                              std::uint64_t steps, double eta, double lambda,
                              std::size_t batch, std::size_t lipschitz_pairs) {
  constexpr std::size_t kSamples = 200, kDim = 10;
  DatasetSplit data{make_synthetic(kSamples, kDim, seed),
                    make_synthetic(50, kDim, seed + 1), kDim};
  const VerticalPartition partition = VerticalPartition::even(kDim, 2);
  const std::size_t per_epoch = (kSamples + batch - 1) / batch;

  TrainingConfig config;
  config.scheme = Scheme::kFdml;
  config.parties = 2;
  config.use_bias = false;
  config.tau = tau;
  config.eta = eta;
  config.lambda = lambda;
  config.batch = batch;
  config.epochs = (steps + per_epoch - 1) / per_epoch;
  config.seed = seed;
  if (tau == 0) {
    config.deterministic = true;
  } else {
    config.interleave_seed = seed;
    config.interleave_speeds = {1.0, 4.0};
  }
  config.evaluate_epochs = false;

  Instrumented out;
  std::vector<std::vector<StepRecord>> records(2);
  std::mutex mu;
  TrainingHooks hooks;
  hooks.recorder = [&](const StepRecord& r) {
    std::lock_guard lock(mu);
    auto& mine = records[static_cast<std::size_t>(r.party)];
    if (mine.size() < steps) mine.push_back(r);
  };
  hooks.grant_observer = [&](const GrantRecord& g) {
    std::lock_guard lock(mu);
    out.max_lag = std::max(out.max_lag, g.iteration - g.slowest);
  };
  const TrainingResult result = run_training(config, data, partition, hooks);

  out.optimum = linear_optimum(data.train, SubModelSpec::Linear(kDim, false), lambda);
  BlockVectors x_star(2);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::uint32_t g : partition.slice(j)) x_star[j].push_back(out.optimum.x[g]);
  }
  std::vector<Dataset> stores;
  for (std::size_t j = 0; j < 2; ++j) {
    stores.push_back(project_dataset(data.train, partition, j));
  }
  const SampleSchedule schedule =
      SampleSchedule::generate(seed, kSamples, batch, config.epochs);
  out.run = analyze_run(records, result.model.specs, stores, schedule, lambda,
                        config.reduction, x_star, lipschitz_pairs, seed);
  return out;
}

}  // namespace

StepIdentityCheck check_step_identity(std::size_t steps, std::uint64_t tau,
                         std::uint64_t seed) {
  const Instrumented r = instrumented_run(seed, tau, steps, 0.5, 1e-3, 10, 0);
  StepIdentityCheck out;
  out.steps = r.run.identity_residuals.size() + r.run.non_applicable_steps;
  out.non_applicable = r.run.non_applicable_steps;
  out.max_lag = r.max_lag;
  for (double v : r.run.identity_residuals) out.max_residual = std::max(out.max_residual, v);
  return out;
}

RegretRun regret_experiment(std::uint64_t seed, std::uint64_t tau,
                            std::span<const std::uint64_t> checkpoints,
                            double eta, double lambda, std::size_t batch) {
  const std::uint64_t steps = *std::max_element(checkpoints.begin(), checkpoints.end());
  const Instrumented r = instrumented_run(seed, tau, steps, eta, lambda, batch, 2);
  RegretRun out;
  out.optimum_value = r.optimum.value;
  out.probe = r.run.probe;
  out.max_lag = r.max_lag;
  out.points = regret_trace(r.run.step_losses, r.optimum.value, checkpoints);
  for (const RegretPoint& p : out.points) {
    out.envelope.push_back(regret_envelope(eta, 2, out.probe.gradient_bound,
                                           out.probe.diameter,
                                           out.probe.lipschitz_max(), tau,
                                           p.iterations));
  }
  return out;
}

ProtocolCheck check_protocol(std::size_t messages, std::size_t fuzz_frames,
                             std::uint64_t seed) {
  ProtocolCheck out;
  const std::vector<std::uint8_t> ack = encode(PushAck{0});
  const std::vector<std::uint8_t> expected = {9, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0};
  out.reference_bytes_ok = ack == expected;

  SplitMix64 rng(seed);
  std::vector<std::vector<std::uint8_t>> corpus;
  for (std::size_t k = 0; k < messages; ++k) {
    const Message msg = random_message(rng);
    ++out.round_trips;
    try {
      std::vector<std::uint8_t> frame = encode(msg);
      if (!(decode(frame) == msg)) ++out.round_trip_failures;
      if (corpus.size() < 256) corpus.push_back(std::move(frame));
    } catch (const std::exception&) {
      ++out.round_trip_failures;
    }
  }
  for (std::size_t k = 0; k < fuzz_frames && !corpus.empty(); ++k) {
    const auto frame = mutate(corpus[rng.below(corpus.size())], rng);
    ++out.fuzzed;
    try {
      const Message msg = decode(frame);
      // Whatever decodes must re-encode to the same bytes.
      if (encode(msg) != frame) ++out.fuzz_crashes;
    } catch (const DecodeError&) {
    } catch (...) {
      ++out.fuzz_crashes;
    }
  }
  return out;
}

std::vector<SuiteOutcome> run_suites(const std::vector<std::string>& names,
                                     std::uint64_t seed) {
  std::vector<SuiteOutcome> out;
  for (const std::string& name : names) {
    SuiteOutcome s{name, false, {}};
    if (name == "gradients") {
      const GradientCheck lr = check_gradients(SubModelSpec::Kind::kLinear, 100, seed);
      const GradientCheck nn =
          check_gradients(SubModelSpec::Kind::kFeedForward, 100, seed);
      s.passed = lr.failures == 0 && nn.failures == 0;
      s.detail = "lr max rel err " + format(lr.max_relative_error) +
                 ", nn max rel err " + format(nn.max_relative_error) + " over " +
                 std::to_string(lr.coordinates + nn.coordinates) + " coordinates";
    } else if (name == "lemma1") {
      const StepIdentityCheck l = check_step_identity(1000, 16, seed);
      s.passed = l.steps >= 1000 && l.non_applicable == 0 && l.max_residual < 1e-8;
      s.detail = std::to_string(l.steps) + " steps, max residual " +
                 format(l.max_residual) + ", max lag " + std::to_string(l.max_lag);
    } else if (name == "protocol") {
      const ProtocolCheck p = check_protocol(10000, 10000, seed);
      s.passed = p.reference_bytes_ok && p.round_trip_failures == 0 &&
                 p.fuzz_crashes == 0;
      s.detail = std::to_string(p.round_trips) + " round trips, " +
                 std::to_string(p.fuzzed) + " fuzzed frames, " +
                 std::to_string(p.round_trip_failures + p.fuzz_crashes) +
                 " failures";
    } else {
      throw ConfigError("unknown verify suite '" + name + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fdml
