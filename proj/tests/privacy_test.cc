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

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fdml/errors.h"
#include "fdml/privacy.h"

namespace fdml {
namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double mean_abs = 0.0;
};

Moments moments(const NoiseSpec& spec, std::size_t draws) {
  // Welford, to keep the variance estimate stable over 1e6 draws.
  Moments m;
  double m2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const double x = noise_draw(spec, i);
    const double delta = x - m.mean;
    m.mean += delta / static_cast<double>(i + 1);
    m2 += delta * (x - m.mean);
    m.mean_abs += std::fabs(x);
  }
  m.variance = m2 / static_cast<double>(draws - 1);
  m.mean_abs /= static_cast<double>(draws);
  return m;
}

TEST(Noise, ZeroLevelIsIdentity) {
  for (auto mech : {NoiseMechanism::kLaplace, NoiseMechanism::kGaussian,
                    NoiseMechanism::kNone}) {
    const NoiseSpec spec{mech, 0.0, 17};
    EXPECT_TRUE(spec.is_identity());
    for (std::uint64_t i = 0; i < 100; ++i) {
      EXPECT_EQ(perturb(0.75, spec, i), 0.75);
    }
  }
  const NoiseSpec none{NoiseMechanism::kNone, 3.0, 1};
  EXPECT_EQ(perturb(-2.0, none, 5), -2.0);
}

TEST(Noise, LaplaceVarianceIsTwoBSquared) {
  const Moments m = moments({NoiseMechanism::kLaplace, 1.0, 2024}, 1'000'000);
  EXPECT_GE(m.variance, 1.98);
  EXPECT_LE(m.variance, 2.02);
  EXPECT_NEAR(m.mean, 0.0, 0.01);
  EXPECT_NEAR(m.mean_abs, 1.0, 0.01);  // E|X| = b
}

TEST(Noise, LaplaceScalesWithLevel) {
  const Moments m = moments({NoiseMechanism::kLaplace, 3.0, 5}, 200'000);
  EXPECT_NEAR(m.variance / 18.0, 1.0, 0.03);
}

TEST(Noise, GaussianVarianceIsLevelSquared) {
  const Moments m = moments({NoiseMechanism::kGaussian, 2.0, 8}, 200'000);
  EXPECT_NEAR(m.variance / 4.0, 1.0, 0.02);
  EXPECT_NEAR(m.mean, 0.0, 0.02);
}

TEST(Noise, CounterBasedAndSeeded) {
  const NoiseSpec a{NoiseMechanism::kLaplace, 1.0, 1};
  const NoiseSpec b{NoiseMechanism::kLaplace, 1.0, 2};
  EXPECT_EQ(noise_draw(a, 42), noise_draw(a, 42));
  EXPECT_NE(noise_draw(a, 42), noise_draw(a, 43));
  EXPECT_NE(noise_draw(a, 42), noise_draw(b, 42));
  EXPECT_EQ(perturb(1.0, a, 9), 1.0 + noise_draw(a, 9));
}

TEST(Noise, Parse) {
  EXPECT_EQ(parse_noise_mechanism("laplace"), NoiseMechanism::kLaplace);
  EXPECT_EQ(parse_noise_mechanism(to_string(NoiseMechanism::kGaussian)),
            NoiseMechanism::kGaussian);
  EXPECT_EQ(parse_noise_mechanism("none"), NoiseMechanism::kNone);
  EXPECT_THROW(parse_noise_mechanism("uniform"), ConfigError);
}

}  // namespace
}  // namespace fdml
