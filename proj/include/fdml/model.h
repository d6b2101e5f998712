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
#include <string>
#include <vector>

namespace fdml {

struct SparseEntry {
  std::uint32_t index = 0;
  double value = 0.0;

  bool operator==(const SparseEntry&) const = default;
};

// A view of one sample's features in some coordinate system (global, or a
// party's local one). Indices are strictly increasing.
using SparseRow = std::span<const SparseEntry>;

// One party's slice of one sample, in that party's local coordinates.
struct LocalFeatureVector {
  std::uint64_t sample_id = 0;
  std::vector<SparseEntry> entries;
};

enum class Activation { kRelu, kTanh };

// Describes the sub-model a party trains on its slice.
//
// Parameter layout:
//   Linear       [w_0 .. w_{d-1}] [bias]            (bias present iff use_bias)
//   FeedForward  [W1: d x H, input-major] [b1: H] [w2: H] [b2]
// Input-major W1 keeps the hidden weights of one sparse feature contiguous.
struct SubModelSpec {
  enum class Kind { kLinear, kFeedForward };

  Kind kind = Kind::kLinear;
  std::size_t input_dim = 0;
  bool use_bias = true;
  std::size_t hidden_units = 64;
  Activation activation = Activation::kRelu;

  static SubModelSpec Linear(std::size_t input_dim, bool use_bias = true);
  static SubModelSpec FeedForward(std::size_t input_dim,
                                  std::size_t hidden_units = 64,
                                  Activation activation = Activation::kRelu);

  std::size_t parameter_dim() const;

  // True for coordinates that the L2 regularizer acts on (biases are not).
  bool is_regularized(std::size_t coordinate) const;
};

std::string to_string(SubModelSpec::Kind kind);
std::string to_string(Activation activation);
Activation parse_activation(const std::string& name);

// The sub-model parameters x^j of one party. Never leaves the party.
struct ParameterBlock {
  int party = 0;
  std::vector<double> values;
};

// Linear blocks start at zero; feed-forward weights are Glorot-uniform from
// a seeded SplitMix64 stream with zero biases.
ParameterBlock init_block(const SubModelSpec& spec, int party,
                          std::uint64_t seed);

// alpha^j(x^j, xi^j). Throws ConfigError when params or features do not fit
// the spec.
double local_prediction(const SubModelSpec& spec,
                        std::span<const double> params, SparseRow features);

constexpr double kSigmoidClamp = 35.0;
constexpr double kProbabilityEpsilon = 1e-15;

double sigmoid(double s);

// Sum of local predictions, added left to right starting from 0.0. The
// coordinator uses the same order, which the exact-equivalence checks rely on.
double aggregate_sum(std::span<const double> local_predictions);

// sigma(sum of local predictions).
double aggregate(std::span<const double> local_predictions);

// Binary log loss with p clamped to [eps, 1 - eps].
double log_loss(double probability, int label);

// Chain-rule factor of log loss composed with the sigmoid: sigma(s) - y.
double h_term(double aggregate_sum, int label);

// grad += scale * d alpha / d x. This is the data part of the partial
// gradient; callers accumulate it over a batch before adding the
// regularizer once.
void accumulate_prediction_gradient(const SubModelSpec& spec,
                                    std::span<const double> params,
                                    SparseRow features, double scale,
                                    std::span<double> grad);

// grad += lambda * x on regularized coordinates.
void add_regularizer_gradient(const SubModelSpec& spec,
                              std::span<const double> params, double lambda,
                              std::span<double> grad);

// Full single-sample partial gradient h * d alpha/dx + lambda * x.
std::vector<double> partial_gradient(const SubModelSpec& spec,
                                     std::span<const double> params,
                                     SparseRow features, double h,
                                     double lambda);

// lambda * 0.5 * ||x||^2 over regularized coordinates.
double regularizer_value(const SubModelSpec& spec,
                         std::span<const double> params, double lambda);

}  // namespace fdml
