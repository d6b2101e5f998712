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

#include "fdml/trainer.h"

#include <atomic>
#include <chrono>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <spdlog/spdlog.h>

#include "fdml/errors.h"
#include "fdml/random.h"

namespace fdml {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Gathers per-party epoch reports as workers finish epochs, in any order.
class EpochCollector {
 public:
  EpochCollector(std::size_t parties, Clock::time_point start)
      : parties_(parties), start_(start) {}

  void add(const EpochReport& report) {
    std::lock_guard lock(mu_);
    Entry& e = epochs_[report.epoch];
    e.reports.resize(parties_);
    e.reports[report.party] = report;
    if (++e.count == parties_) e.elapsed = seconds_since(start_);
  }

  struct Entry {
    std::vector<EpochReport> reports;
    std::size_t count = 0;
    double elapsed = 0.0;
  };

  std::map<std::size_t, Entry> take() {
    std::lock_guard lock(mu_);
    return std::move(epochs_);
  }

 private:
  std::size_t parties_;
  Clock::time_point start_;
  std::mutex mu_;
  std::map<std::size_t, Entry> epochs_;
};

// Contiguous, disjoint, in-order partitions can be reproduced inside a
// single linear model by summing slice by slice.
std::vector<std::pair<std::uint32_t, std::uint32_t>> contiguous_segments(
    const VerticalPartition& partition) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> segments;
  std::uint32_t next = 0;
  for (std::size_t j = 0; j < partition.parties(); ++j) {
    const auto slice = partition.slice(j);
    for (std::size_t k = 0; k < slice.size(); ++k) {
      if (slice[k] != next + k) return {};
    }
    segments.emplace_back(next, next + static_cast<std::uint32_t>(slice.size()));
    next += static_cast<std::uint32_t>(slice.size());
  }
  if (next != partition.dim()) return {};
  return segments;
}

// Linear prediction of the centralized model, summed per feature segment in
// the same order the coordinator adds the parties' local predictions.
double segmented_linear(const SubModelSpec& spec, std::span<const double> w,
                        SparseRow row,
                        std::span<const std::pair<std::uint32_t, std::uint32_t>> segments) {
  double s = 0.0;
  std::size_t k = 0;
  for (const auto& [begin, end] : segments) {
    double part = 0.0;
    while (k < row.size() && row[k].index < end) {
      part += w[row[k].index] * row[k].value;
      ++k;
    }
    s += part;
  }
  if (spec.use_bias) s += w[spec.input_dim];
  return s;
}

// Local and centralized schemes: plain mini-batch SGD on one model.
void train_single(const TrainingConfig& config, const SubModelSpec& spec,
                  const Dataset& train, const SampleSchedule& schedule,
                  const VerticalPartition& partition, ParameterBlock& block,
                  const TrainingHooks& hooks, EpochCollector& collector) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> segments;
  if (config.scheme == Scheme::kCentralized &&
      spec.kind == SubModelSpec::Kind::kLinear) {
    segments = contiguous_segments(partition);
  }
  std::vector<double> grad;
  std::vector<double> sums;
  EpochReport epoch;
  for (std::uint64_t t = 1; t <= schedule.iterations(); ++t) {
    if (hooks.before_step) hooks.before_step(0, t);
    const auto batch = schedule.batch(t);
    const double eta_t = learning_rate(config.eta, t);
    grad.assign(block.values.size(), 0.0);
    sums.resize(batch.size());
    double loss = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const SparseRow row = train.row(batch[k]);
      sums[k] = segments.empty()
                    ? aggregate_sum(std::array{local_prediction(spec, block.values, row)})
                    : segmented_linear(spec, block.values, row, segments);
      const int y = train.label(batch[k]);
      accumulate_prediction_gradient(spec, block.values, row,
                                     h_term(sums[k], y), grad);
      loss += log_loss(sigmoid(sums[k]), y);
    }
    finish_gradient(spec, block.values, batch.size(), config.reduction,
                    config.lambda, grad);
    epoch.loss_sum += loss / static_cast<double>(batch.size());
    epoch.regularizer_sum += regularizer_value(spec, block.values, config.lambda);
    ++epoch.iterations;
    if (hooks.recorder) {
      hooks.recorder(StepRecord{0, t, eta_t, block.values, grad, sums, false});
    }
    apply_step(block.values, grad, eta_t);
    if (schedule.ends_epoch(t)) {
      epoch.epoch = schedule.epoch_of(t);
      epoch.snapshot = block;
      collector.add(epoch);
      epoch = EpochReport{};
    }
  }
}

void drive_deterministic(std::vector<std::unique_ptr<Worker>>& workers,
                         std::uint64_t total) {
  for (std::uint64_t t = 1; t <= total; ++t) {
    for (auto& w : workers) w->push(t);
    for (auto& w : workers) {
      if (!w->try_pull(t)) {
        throw ProtocolError("deterministic mode: pull for iteration " +
                            std::to_string(t) + " rejected");
      }
    }
    for (auto& w : workers) w->update(t);
  }
}

void drive_interleaved(std::vector<std::unique_ptr<Worker>>& workers,
                       std::uint64_t total, std::uint64_t seed,
                       std::vector<double> speeds,
                       const TrainingHooks& hooks) {
  const std::size_t m = workers.size();
  if (speeds.empty()) speeds.assign(m, 1.0);
  if (speeds.size() != m) {
    throw ConfigError("interleave_speeds needs one entry per party");
  }
  enum class Phase { kPush, kPull, kUpdate };
  std::vector<std::uint64_t> next(m, 1);
  std::vector<Phase> phase(m, Phase::kPush);
  SplitMix64 rng(seed);
  double total_speed = 0.0;
  for (double s : speeds) total_speed += s;
  std::size_t done = 0;
  while (done < m) {
    double pick = rng.uniform() * total_speed;
    std::size_t j = 0;
    while (j + 1 < m && pick >= speeds[j]) pick -= speeds[j++];
    if (next[j] > total) continue;
    Worker& w = *workers[j];
    switch (phase[j]) {
      case Phase::kPush:
        if (hooks.before_step) hooks.before_step(static_cast<int>(j), next[j]);
        w.push(next[j]);
        phase[j] = Phase::kPull;
        break;
      case Phase::kPull:
        if (w.try_pull(next[j])) phase[j] = Phase::kUpdate;
        break;
      case Phase::kUpdate:
        w.update(next[j]);
        phase[j] = Phase::kPush;
        if (++next[j] > total) ++done;
        break;
    }
  }
}

void drive_threads(std::vector<std::unique_ptr<Worker>>& workers,
                   std::atomic<bool>& cancelled) {
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers.size());
  for (std::size_t j = 0; j < workers.size(); ++j) {
    threads.emplace_back([&, j] {
      try {
        workers[j]->run();
      } catch (...) {
        errors[j] = std::current_exception();
        cancelled.store(true);
      }
    });
  }
  for (auto& t : threads) t.join();
  // Report the root cause, not a peer's cancellation.
  for (auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const TransportError&) {
      if (!cancelled.load()) throw;
    } catch (...) {
      throw;
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Scheme parse_scheme(const std::string& name) {
  if (name == "local") return Scheme::kLocal;
  if (name == "centralized") return Scheme::kCentralized;
  if (name == "fdml") return Scheme::kFdml;
  throw ConfigError("unknown scheme '" + name + "'");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::kLocal:
      return "local";
    case Scheme::kCentralized:
      return "centralized";
    case Scheme::kFdml:
      return "fdml";
  }
  return "fdml";
}

VerticalPartition make_partition(const TrainingConfig& config,
                                 std::size_t dim) {
  if (!config.partition_file.empty()) {
    return VerticalPartition::load(config.partition_file, dim);
  }
  if (!config.partition_sizes.empty()) {
    return VerticalPartition::contiguous(dim, config.partition_sizes);
  }
  return VerticalPartition::even(dim, config.parties);
}

std::vector<SubModelSpec> model_specs(const TrainingConfig& config,
                                      const VerticalPartition& partition) {
  auto spec_for = [&](std::size_t d) {
    return config.model == SubModelSpec::Kind::kLinear
               ? SubModelSpec::Linear(d, config.use_bias)
               : SubModelSpec::FeedForward(d, config.hidden, config.activation);
  };
  switch (config.scheme) {
    case Scheme::kLocal:
      return {spec_for(partition.local_dim(0))};
    case Scheme::kCentralized:
      return {spec_for(partition.dim())};
    case Scheme::kFdml: {
      std::vector<SubModelSpec> specs;
      for (std::size_t j = 0; j < partition.parties(); ++j) {
        specs.push_back(spec_for(partition.local_dim(j)));
      }
      return specs;
    }
  }
  return {};
}

TrainingResult run_training(const TrainingConfig& config,
                            const DatasetSplit& data,
                            const TrainingHooks& hooks) {
  return run_training(config, data, make_partition(config, data.dim), hooks);
}

TrainingResult run_training(const TrainingConfig& config,
                            const DatasetSplit& data,
                            const VerticalPartition& partition,
                            const TrainingHooks& hooks) {
  if (config.eta <= 0.0) throw ConfigError("eta must be positive");
  if (config.lambda < 0.0) throw ConfigError("lambda must be non-negative");
  if (config.batch == 0) throw ConfigError("batch size must be positive");
  if (config.noise.level < 0.0) throw ConfigError("noise level must be non-negative");
  if (partition.dim() != data.dim) {
    throw ConfigError("partition dimension differs from dataset dimension");
  }
  if (config.scheme == Scheme::kFdml && config.parties != partition.parties()) {
    throw ConfigError("config names " + std::to_string(config.parties) +
                      " parties, partition has " +
                      std::to_string(partition.parties()));
  }

  TrainingResult result;
  result.scheme = config.scheme;
  result.model.specs = model_specs(config, partition);
  const std::size_t m = result.model.specs.size();

  // Feature stores: the party projections, or the full rows when centralized.
  std::vector<Dataset> train_stores, test_stores;
  if (config.scheme == Scheme::kCentralized) {
    train_stores.push_back(data.train);
    test_stores.push_back(data.test);
  } else {
    for (std::size_t j = 0; j < m; ++j) {
      train_stores.push_back(project_dataset(data.train, partition, j));
      test_stores.push_back(project_dataset(data.test, partition, j));
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    result.model.blocks.push_back(
        init_block(result.model.specs[j], static_cast<int>(j), config.seed));
  }
  if (config.epochs == 0) return result;

  auto schedule = std::make_shared<const SampleSchedule>(SampleSchedule::generate(
      config.seed, data.train.size(), config.batch, config.epochs));

  const auto start = Clock::now();
  EpochCollector collector(m, start);

  if (config.scheme != Scheme::kFdml) {
    train_single(config, result.model.specs[0], train_stores[0], *schedule,
                 partition, result.model.blocks[0], hooks, collector);
  } else {
    SspCoordinator coordinator(data.train.size(), m,
                               config.deterministic ? 0 : config.tau);
    coordinator.set_schedule(schedule);
    if (hooks.grant_observer) coordinator.set_grant_observer(hooks.grant_observer);
    CoordinatorService service(coordinator);

    std::unique_ptr<SocketServer> server;
    std::vector<std::unique_ptr<Carrier>> carriers;
    if (config.carrier == CarrierKind::kSocket) {
      server = std::make_unique<SocketServer>(service, "127.0.0.1", 0);
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (server) {
        carriers.push_back(std::make_unique<SocketCarrier>(
            "127.0.0.1", server->port(), 50, hooks.frame_tap));
      } else {
        carriers.push_back(
            std::make_unique<InProcessCarrier>(service, hooks.frame_tap));
      }
    }

    std::atomic<bool> cancelled{false};
    std::vector<std::unique_ptr<Worker>> workers;
    for (std::size_t j = 0; j < m; ++j) {
      WorkerOptions options;
      options.eta = config.eta;
      options.lambda = config.lambda;
      options.reduction = config.reduction;
      options.noise = config.noise;
      options.retry = config.retry;
      options.recorder = hooks.recorder;
      options.before_step = hooks.before_step;
      options.cancelled = &cancelled;
      options.on_epoch_end = [&collector](const EpochReport& r) {
        collector.add(r);
      };
      workers.push_back(std::make_unique<Worker>(
          static_cast<std::uint16_t>(j), result.model.specs[j],
          train_stores[j], schedule, std::move(options), *carriers[j],
          result.model.blocks[j]));
      workers.back()->handshake(m);
    }

    if (config.deterministic) {
      drive_deterministic(workers, schedule->iterations());
    } else if (config.interleave_seed) {
      drive_interleaved(workers, schedule->iterations(), *config.interleave_seed,
                        config.interleave_speeds, hooks);
    } else {
      drive_threads(workers, cancelled);
    }

    for (std::size_t j = 0; j < m; ++j) {
      result.model.blocks[j] = workers[j]->block();
      result.rejections += workers[j]->rejections();
    }
    result.coordinator_status = coordinator.status_text();
    if (server) server->stop();
  }
  result.seconds = seconds_since(start);

  if (!config.evaluate_epochs) return result;
  for (auto& [epoch, entry] : collector.take()) {
    if (entry.count != m) continue;
    CompositeModel snapshot{result.model.specs, {}};
    EpochMetrics metrics;
    metrics.epoch = epoch + 1;
    metrics.elapsed_seconds = entry.elapsed;
    // Loss seen by party 0 (every party sees the same sums up to staleness)
    // plus each party's regularizer, both averaged over the epoch.
    const EpochReport& first = entry.reports[0];
    metrics.train_objective =
        first.loss_sum / static_cast<double>(first.iterations);
    for (const EpochReport& r : entry.reports) {
      snapshot.blocks.push_back(r.snapshot);
      metrics.train_objective +=
          r.regularizer_sum / static_cast<double>(r.iterations);
    }
    const Evaluation eval = evaluate(snapshot, test_stores);
    metrics.test_logloss = eval.logloss;
    metrics.test_auc = eval.auc;
    result.trace.push_back(metrics);
  }
  return result;
}

std::vector<ReportRow> report_rows(const TrainingConfig& config,
                                   const TrainingResult& result) {
  const std::string model =
      config.model == SubModelSpec::Kind::kLinear ? "LR" : "NN";
  const std::string scheme =
      result.scheme == Scheme::kFdml ? "FDML" : to_string(result.scheme);
  std::vector<ReportRow> rows;
  for (const EpochMetrics& e : result.trace) {
    rows.push_back(ReportRow{model + " " + scheme, e.epoch, e.train_objective,
                             e.test_logloss, e.test_auc, e.elapsed_seconds});
  }
  return rows;
}

}  // namespace fdml
