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

#include "fdml/privacy.h"

#include <cmath>
#include <numbers>

#include "fdml/errors.h"
#include "fdml/random.h"

namespace fdml {
namespace {

// Uniform in the open interval (0, 1).
double open_uniform(SplitMix64& rng) {
  return (static_cast<double>(rng.next() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

NoiseMechanism parse_noise_mechanism(const std::string& name) {
  if (name == "none") return NoiseMechanism::kNone;
  if (name == "laplace") return NoiseMechanism::kLaplace;
  if (name == "gaussian") return NoiseMechanism::kGaussian;
  throw ConfigError("unknown noise mechanism '" + name + "'");
}

std::string to_string(NoiseMechanism mechanism) {
  switch (mechanism) {
    case NoiseMechanism::kNone:
      return "none";
    case NoiseMechanism::kLaplace:
      return "laplace";
    case NoiseMechanism::kGaussian:
      return "gaussian";
  }
  return "none";
}

double noise_draw(const NoiseSpec& spec, std::uint64_t draw_index) {
  if (spec.is_identity()) return 0.0;
  SplitMix64 rng(SplitMix64::mix(spec.seed) ^
                 SplitMix64::mix(draw_index + 0x632BE59BD9B4E019ULL));
  if (spec.mechanism == NoiseMechanism::kLaplace) {
    // Inverse CDF.
    const double u = open_uniform(rng) - 0.5;
    return -spec.level * std::copysign(1.0, u) *
           std::log(1.0 - 2.0 * std::fabs(u));
  }
  // Box-Muller, first output only.
  const double u1 = open_uniform(rng);
  const double u2 = open_uniform(rng);
  return spec.level * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double perturb(double value, const NoiseSpec& spec, std::uint64_t draw_index) {
  if (spec.is_identity()) return value;
  return value + noise_draw(spec, draw_index);
}

}  // namespace fdml
