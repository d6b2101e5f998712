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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fdml {

// The globally shared mini-batch presentation order I(t), t = 1..T.
//
// Every epoch starts from the identity order and is shuffled by Fisher-Yates
// (i from n-1 down to 1, swap with SplitMix64::below(i + 1)) using one
// SplitMix64 stream seeded with `seed` and continued across epochs. The
// permutation is then cut into consecutive batches; the final short batch of
// an epoch is kept. Parties that agree on (seed, n, batch, epochs) derive the
// same bytes.
class SampleSchedule {
 public:
  static SampleSchedule generate(std::uint64_t seed, std::size_t samples,
                                 std::size_t batch_size, std::size_t epochs);

  std::size_t samples() const { return samples_; }
  std::size_t batch_size() const { return batch_size_; }
  std::size_t epochs() const { return epochs_; }
  std::size_t batches_per_epoch() const { return batches_per_epoch_; }

  // T = epochs * ceil(n / B).
  std::uint64_t iterations() const {
    return static_cast<std::uint64_t>(epochs_) * batches_per_epoch_;
  }

  // I(t) for 1 <= t <= T.
  std::span<const std::uint32_t> batch(std::uint64_t t) const;

  // Zero-based epoch that iteration t belongs to.
  std::size_t epoch_of(std::uint64_t t) const {
    return static_cast<std::size_t>((t - 1) / batches_per_epoch_);
  }
  bool ends_epoch(std::uint64_t t) const { return t % batches_per_epoch_ == 0; }

  // Order-sensitive hash of the full sequence, for agreement checks.
  std::uint64_t digest() const;

 private:
  std::size_t samples_ = 0;
  std::size_t batch_size_ = 1;
  std::size_t epochs_ = 0;
  std::size_t batches_per_epoch_ = 0;
  std::vector<std::uint32_t> order_;
};

// eta_t = eta / sqrt(t).
double learning_rate(double eta, std::uint64_t t);

}  // namespace fdml
