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

#include "fdml/worker.h"

#include <algorithm>
#include <cmath>
#include <thread>
#include <utility>

#include <spdlog/spdlog.h>

#include "fdml/errors.h"
#include "fdml/random.h"

namespace fdml {
namespace {

template <typename T>
const T& expect_reply(const Message& reply, std::uint16_t party) {
  if (const auto* err = std::get_if<ErrorReply>(&reply)) {
    throw ProtocolError("coordinator refused worker " + std::to_string(party) +
                            ": " + err->detail,
                        err->code);
  }
  if (const auto* ok = std::get_if<T>(&reply)) return *ok;
  throw ProtocolError("unexpected reply " + describe(reply));
}

}  // namespace

BatchReduction parse_reduction(const std::string& name) {
  if (name == "sum") return BatchReduction::kSum;
  if (name == "mean") return BatchReduction::kMean;
  throw ConfigError("unknown batch reduction '" + name + "'");
}

std::string to_string(BatchReduction reduction) {
  return reduction == BatchReduction::kSum ? "sum" : "mean";
}

void finish_gradient(const SubModelSpec& spec, std::span<const double> params,
                     std::size_t batch_size, BatchReduction reduction,
                     double lambda, std::span<double> grad) {
  if (reduction == BatchReduction::kMean && batch_size > 1) {
    const double n = static_cast<double>(batch_size);
    for (double& g : grad) g /= n;
  }
  add_regularizer_gradient(spec, params, lambda, grad);
}

void apply_step(std::span<double> params, std::span<const double> grad,
                double eta_t) {
  for (double g : grad) {
    if (!std::isfinite(g)) throw DivergenceError("non-finite gradient");
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta_t * grad[i];
}

Worker::Worker(std::uint16_t party, SubModelSpec spec, const Dataset& store,
               std::shared_ptr<const SampleSchedule> schedule,
               WorkerOptions options, Carrier& carrier, ParameterBlock initial)
    : party_(party),
      spec_(spec),
      store_(store),
      schedule_(std::move(schedule)),
      options_(std::move(options)),
      carrier_(carrier),
      block_(std::move(initial)) {
  if (block_.values.size() != spec_.parameter_dim()) {
    throw ConfigError("initial block does not match sub-model");
  }
  if (store_.size() != schedule_->samples()) {
    throw ConfigError("feature store has " + std::to_string(store_.size()) +
                      " rows, schedule expects " +
                      std::to_string(schedule_->samples()));
  }
  epoch_.party = party_;
  if (!options_.noise.is_identity()) {
    options_.noise.seed = SplitMix64::mix(options_.noise.seed) ^ party_;
  }
}

void Worker::handshake(std::size_t parties) {
  Hello hello{party_, static_cast<std::uint16_t>(parties),
              schedule_->samples(), schedule_->iterations(),
              schedule_->digest()};
  expect_reply<Welcome>(carrier_.exchange(hello), party_);
}

void Worker::push(std::uint64_t t) {
  const auto batch = schedule_->batch(t);
  PushRequest request{party_, t, {}};
  request.pairs.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const std::uint32_t i = batch[k];
    const double alpha = local_prediction(spec_, block_.values, store_.row(i));
    const std::uint64_t draw = (t - 1) * schedule_->batch_size() + k;
    request.pairs.emplace_back(i, perturb(alpha, options_.noise, draw));
  }
  expect_reply<PushAck>(carrier_.exchange(request), party_);
}

bool Worker::try_pull(std::uint64_t t) {
  const auto batch = schedule_->batch(t);
  PullRequest request{party_, t, {batch.begin(), batch.end()}};
  const Message reply = carrier_.exchange(request);
  if (std::holds_alternative<PullReject>(reply)) {
    ++rejections_;
    return false;
  }
  sums_ = expect_reply<PullGrant>(reply, party_).sums;
  if (sums_.size() != batch.size()) {
    throw ProtocolError("pull grant carries " + std::to_string(sums_.size()) +
                        " sums for a batch of " + std::to_string(batch.size()));
  }
  return true;
}

void Worker::update(std::uint64_t t) {
  const auto batch = schedule_->batch(t);
  const double eta_t = learning_rate(options_.eta, t);
  grad_.assign(block_.values.size(), 0.0);
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const std::uint32_t i = batch[k];
    const int y = store_.label(i);
    accumulate_prediction_gradient(spec_, block_.values, store_.row(i),
                                   h_term(sums_[k], y), grad_);
    loss += log_loss(sigmoid(sums_[k]), y);
  }
  finish_gradient(spec_, block_.values, batch.size(), options_.reduction,
                  options_.lambda, grad_);

  epoch_.loss_sum += loss / static_cast<double>(batch.size());
  epoch_.regularizer_sum +=
      regularizer_value(spec_, block_.values, options_.lambda);
  ++epoch_.iterations;

  if (options_.recorder) {
    options_.recorder(StepRecord{party_, t, eta_t, block_.values, grad_, sums_,
                                 !options_.noise.is_identity()});
  }
  apply_step(block_.values, grad_, eta_t);

  if (schedule_->ends_epoch(t)) {
    epoch_.epoch = schedule_->epoch_of(t);
    epoch_.snapshot = block_;
    if (options_.on_epoch_end) options_.on_epoch_end(epoch_);
    epoch_ = EpochReport{};
    epoch_.party = party_;
  }
}

void Worker::step(std::uint64_t t) {
  if (options_.before_step) options_.before_step(party_, t);
  push(t);
  auto wait = options_.retry.initial;
  std::uint64_t rejected = 0;
  while (!try_pull(t)) {
    ++rejected;
    if (options_.cancelled && options_.cancelled->load()) {
      throw TransportError("worker " + std::to_string(party_) + " cancelled");
    }
    if (options_.retry.max_rejections != 0 &&
        rejected >= options_.retry.max_rejections) {
      throw TransportError("worker " + std::to_string(party_) +
                           ": pull for iteration " + std::to_string(t) +
                           " rejected " + std::to_string(rejected) + " times");
    }
    std::this_thread::sleep_for(wait);
    wait = std::min(wait * 2, options_.retry.cap);
  }
  update(t);
}

void Worker::run() {
  const std::uint64_t total = schedule_->iterations();
  for (std::uint64_t t = 1; t <= total; ++t) {
    step(t);
    if (t % 1000 == 0) {
      spdlog::debug("worker {} at iteration {}/{}", party_, t, total);
    }
  }
}

}  // namespace fdml
