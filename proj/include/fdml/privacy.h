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
#include <string>

namespace fdml {

enum class NoiseMechanism { kNone, kLaplace, kGaussian };

// Additive perturbation of outgoing local predictions. `level` is the scale
// b of the distribution: Laplace(0, b) or Normal(0, b^2).
struct NoiseSpec {
  NoiseMechanism mechanism = NoiseMechanism::kLaplace;
  double level = 0.0;
  std::uint64_t seed = 0;

  bool is_identity() const {
    return mechanism == NoiseMechanism::kNone || level == 0.0;
  }
};

NoiseMechanism parse_noise_mechanism(const std::string& name);
std::string to_string(NoiseMechanism mechanism);

// The noise term alone. Counter-based: a pure function of
// (mechanism, level, seed, draw_index).
double noise_draw(const NoiseSpec& spec, std::uint64_t draw_index);

// value + noise_draw(spec, draw_index); exact identity when the spec is.
double perturb(double value, const NoiseSpec& spec, std::uint64_t draw_index);

}  // namespace fdml
