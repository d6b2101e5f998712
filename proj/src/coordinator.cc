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

#include "fdml/coordinator.h"

#include <algorithm>
#include <sstream>

#include "fdml/errors.h"

namespace fdml {
namespace {

constexpr auto kUnknownWorker =
    static_cast<std::uint16_t>(ErrorCode::kUnknownWorker);
constexpr auto kSampleOutOfRange =
    static_cast<std::uint16_t>(ErrorCode::kSampleOutOfRange);

}  // namespace

SspCoordinator::SspCoordinator(std::size_t samples, std::size_t parties,
                               std::uint64_t tau)
    : samples_(samples),
      parties_(parties),
      tau_(tau),
      cells_(samples * parties),
      cell_iterations_(samples * parties),
      pushed_(parties),
      granted_(parties),
      rejections_(parties),
      registered_(parties) {
  if (parties == 0) throw ConfigError("coordinator needs at least one worker");
  if (parties > UINT16_MAX) throw ConfigError("too many workers");
  for (auto& c : cells_) c.store(0.0, std::memory_order_relaxed);
}

void SspCoordinator::set_schedule(
    std::shared_ptr<const SampleSchedule> schedule) {
  if (schedule && schedule->samples() != samples_) {
    throw ConfigError("schedule sample count differs from coordinator");
  }
  schedule_ = std::move(schedule);
  if (schedule_) total_iterations_ = schedule_->iterations();
}

void SspCoordinator::set_total_iterations(std::uint64_t total) {
  total_iterations_ = total;
}

void SspCoordinator::set_grant_observer(
    std::function<void(const GrantRecord&)> observer) {
  std::lock_guard lock(admission_mu_);
  observer_ = std::move(observer);
}

void SspCoordinator::check_worker(std::uint16_t worker) const {
  if (worker >= parties_) {
    throw ProtocolError("unknown worker " + std::to_string(worker) +
                            " (coordinator has " + std::to_string(parties_) +
                            ")",
                        kUnknownWorker);
  }
}

void SspCoordinator::check_samples(std::uint64_t iteration,
                                   std::span<const std::uint64_t> ids) const {
  for (std::uint64_t id : ids) {
    if (id >= samples_) {
      throw ProtocolError("sample id " + std::to_string(id) + " >= n = " +
                              std::to_string(samples_),
                          kSampleOutOfRange);
    }
  }
  if (!schedule_) return;
  if (iteration > schedule_->iterations()) {
    throw ProtocolError("iteration " + std::to_string(iteration) +
                        " beyond schedule");
  }
  const auto batch = schedule_->batch(iteration);
  if (batch.size() != ids.size() ||
      !std::equal(batch.begin(), batch.end(), ids.begin())) {
    throw ProtocolError(
        "samples do not match I(" + std::to_string(iteration) + ")",
        kSampleOutOfRange);
  }
}

void SspCoordinator::register_worker(std::uint16_t worker) {
  check_worker(worker);
  registered_[worker].store(true);
}

void SspCoordinator::handle_push(
    std::uint16_t worker, std::uint64_t iteration,
    std::span<const std::pair<std::uint64_t, double>> updates) {
  check_worker(worker);
  if (iteration == 0 || iteration < pushed_[worker].load()) {
    throw ProtocolError("push for iteration " + std::to_string(iteration) +
                        " after " + std::to_string(pushed_[worker].load()));
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(updates.size());
  for (const auto& u : updates) ids.push_back(u.first);
  check_samples(iteration, ids);

  for (const auto& [sample, value] : updates) {
    const std::size_t cell = sample * parties_ + worker;
    cells_[cell].store(value, std::memory_order_release);
    cell_iterations_[cell].store(iteration, std::memory_order_relaxed);
  }
  registered_[worker].store(true);
  pushed_[worker].store(iteration, std::memory_order_release);
}

std::uint64_t SspCoordinator::min_pushed() const {
  std::uint64_t m = UINT64_MAX;
  for (const auto& p : pushed_) m = std::min(m, p.load(std::memory_order_acquire));
  return m;
}

SspCoordinator::PullOutcome SspCoordinator::handle_pull(
    std::uint16_t worker, std::uint64_t iteration,
    std::span<const std::uint64_t> sample_ids, std::vector<double>& sums) {
  check_worker(worker);
  if (iteration == 0 || pushed_[worker].load() != iteration) {
    throw ProtocolError("pull for iteration " + std::to_string(iteration) +
                        " but worker " + std::to_string(worker) +
                        " last pushed " +
                        std::to_string(pushed_[worker].load()));
  }
  check_samples(iteration, sample_ids);

  PullOutcome outcome;
  {
    std::lock_guard lock(admission_mu_);
    outcome.slowest = min_pushed();
    outcome.granted = iteration - outcome.slowest <= tau_;
    if (!outcome.granted) {
      rejections_[worker].fetch_add(1, std::memory_order_relaxed);
      return outcome;
    }
    granted_[worker].store(iteration, std::memory_order_release);
    if (observer_) {
      GrantRecord record{worker, iteration, outcome.slowest, {}, {}};
      for (const auto& p : pushed_) record.pushed.push_back(p.load());
      for (const auto& g : granted_) record.granted.push_back(g.load());
      observer_(record);
    }
  }

  sums.resize(sample_ids.size());
  for (std::size_t k = 0; k < sample_ids.size(); ++k) {
    const std::size_t row = sample_ids[k] * parties_;
    double s = 0.0;
    for (std::size_t j = 0; j < parties_; ++j) {
      s += cells_[row + j].load(std::memory_order_acquire);
    }
    sums[k] = s;
  }
  if (total_iterations_ != 0 && iteration == total_iterations_) {
    std::lock_guard lock(admission_mu_);
    finished_cv_.notify_all();
  }
  return outcome;
}

std::uint64_t SspCoordinator::slowest_iteration() const {
  const bool any = std::any_of(registered_.begin(), registered_.end(),
                               [](const auto& r) { return r.load(); });
  if (!any) throw ProtocolError("no workers registered");
  return min_pushed();
}

double SspCoordinator::cell(std::size_t sample, std::size_t party) const {
  return cells_.at(sample * parties_ + party).load();
}

std::uint64_t SspCoordinator::cell_iteration(std::size_t sample,
                                             std::size_t party) const {
  return cell_iterations_.at(sample * parties_ + party).load();
}

std::uint64_t SspCoordinator::pushed(std::size_t worker) const {
  return pushed_.at(worker).load();
}

std::uint64_t SspCoordinator::granted(std::size_t worker) const {
  return granted_.at(worker).load();
}

std::uint64_t SspCoordinator::rejections(std::size_t worker) const {
  return rejections_.at(worker).load();
}

bool SspCoordinator::finished() const {
  if (total_iterations_ == 0) return false;
  return std::all_of(granted_.begin(), granted_.end(), [&](const auto& g) {
    return g.load() >= total_iterations_;
  });
}

void SspCoordinator::wait_until_finished() {
  std::unique_lock lock(admission_mu_);
  finished_cv_.wait(lock, [this] { return finished(); });
}

std::string SspCoordinator::status_text() const {
  std::ostringstream out;
  std::uint64_t total_rejections = 0;
  out << "t_min=" << min_pushed() << "\n";
  out << "tau=" << tau_ << "\n";
  out << "workers=" << parties_ << "\n";
  for (std::size_t j = 0; j < parties_; ++j) {
    out << "worker." << j << ".pushed=" << pushed_[j].load() << "\n";
    out << "worker." << j << ".granted=" << granted_[j].load() << "\n";
    out << "worker." << j << ".rejections=" << rejections_[j].load() << "\n";
    total_rejections += rejections_[j].load();
  }
  out << "rejections=" << total_rejections << "\n";
  out << "finished=" << (finished() ? 1 : 0) << "\n";
  return out.str();
}

namespace {

ErrorReply error_reply(ErrorCode code, const std::string& detail) {
  return ErrorReply{static_cast<std::uint16_t>(code), detail};
}

}  // namespace

Message CoordinatorService::handle(const Message& request) {
  try {
    if (const auto* hello = std::get_if<Hello>(&request)) {
      if (hello->worker >= coordinator_.parties()) {
        return error_reply(ErrorCode::kUnknownWorker,
                           "worker id " + std::to_string(hello->worker) +
                               " but coordinator serves " +
                               std::to_string(coordinator_.parties()) +
                               " workers");
      }
      if (hello->parties != coordinator_.parties() ||
          hello->samples != coordinator_.samples()) {
        return error_reply(
            ErrorCode::kConfigMismatch,
            "worker expects m=" + std::to_string(hello->parties) +
                ", n=" + std::to_string(hello->samples) +
                "; coordinator has m=" +
                std::to_string(coordinator_.parties()) +
                ", n=" + std::to_string(coordinator_.samples()));
      }
      if (coordinator_.total_iterations() != 0 &&
          hello->iterations != coordinator_.total_iterations()) {
        return error_reply(ErrorCode::kConfigMismatch,
                           "worker runs " + std::to_string(hello->iterations) +
                               " iterations; coordinator expects " +
                               std::to_string(coordinator_.total_iterations()));
      }
      if (const SampleSchedule* s = coordinator_.schedule();
          s && hello->schedule_digest != s->digest()) {
        return error_reply(ErrorCode::kConfigMismatch,
                           "worker sample schedule differs from coordinator's");
      }
      coordinator_.register_worker(hello->worker);
      return Welcome{coordinator_.tau()};
    }
    if (const auto* push = std::get_if<PushRequest>(&request)) {
      coordinator_.handle_push(push->worker, push->iteration, push->pairs);
      return PushAck{push->iteration};
    }
    if (const auto* pull = std::get_if<PullRequest>(&request)) {
      PullGrant grant{pull->iteration, {}};
      const auto outcome = coordinator_.handle_pull(
          pull->worker, pull->iteration, pull->sample_ids, grant.sums);
      if (!outcome.granted) return PullReject{pull->iteration, outcome.slowest};
      return grant;
    }
  } catch (const ProtocolError& e) {
    return ErrorReply{e.code(), e.what()};
  }
  return error_reply(ErrorCode::kUnexpectedMessage,
                     "coordinator cannot handle " + describe(request));
}

FrameHandler::Reply CoordinatorService::handle_frame(
    std::span<const std::uint8_t> request) {
  Message msg;
  try {
    msg = decode(request);
  } catch (const DecodeError& e) {
    return {encode(error_reply(ErrorCode::kMalformedFrame, e.what())), true};
  }
  return {encode(handle(msg)), false};
}

}  // namespace fdml
