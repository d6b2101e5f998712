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

#include "fdml/schedule.h"

#include <cmath>
#include <numeric>

#include "fdml/errors.h"
#include "fdml/random.h"

namespace fdml {

SampleSchedule SampleSchedule::generate(std::uint64_t seed,
                                        std::size_t samples,
                                        std::size_t batch_size,
                                        std::size_t epochs) {
  if (samples == 0 || batch_size == 0) {
    throw ConfigError("schedule needs at least one sample and batch size >= 1");
  }
  if (samples > UINT32_MAX) throw ConfigError("too many samples for schedule");
  SampleSchedule s;
  s.samples_ = samples;
  s.batch_size_ = batch_size;
  s.epochs_ = epochs;
  s.batches_per_epoch_ = (samples + batch_size - 1) / batch_size;
  s.order_.resize(samples * epochs);

  SplitMix64 rng(seed);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::uint32_t* perm = s.order_.data() + e * samples;
    std::iota(perm, perm + samples, 0u);
    for (std::size_t i = samples - 1; i > 0; --i) {
      std::swap(perm[i], perm[rng.below(i + 1)]);
    }
  }
  return s;
}

std::span<const std::uint32_t> SampleSchedule::batch(std::uint64_t t) const {
  if (t == 0 || t > iterations()) {
    throw ConfigError("iteration " + std::to_string(t) + " outside schedule");
  }
  const std::size_t e = epoch_of(t);
  const std::size_t k = (t - 1) % batches_per_epoch_;
  const std::size_t begin = k * batch_size_;
  const std::size_t end = std::min(begin + batch_size_, samples_);
  return {order_.data() + e * samples_ + begin, end - begin};
}

std::uint64_t SampleSchedule::digest() const {
  std::uint64_t h = SplitMix64::mix(samples_ ^ (batch_size_ << 32) ^ epochs_);
  for (std::uint32_t i : order_) h = SplitMix64::mix(h ^ i);
  return h;
}

double learning_rate(double eta, std::uint64_t t) {
  if (t == 0) throw ConfigError("learning rate iteration starts at 1");
  return eta / std::sqrt(static_cast<double>(t));
}

}  // namespace fdml
