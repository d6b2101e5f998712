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

#include "fdml/model.h"

#include <algorithm>
#include <cmath>

#include "fdml/errors.h"
#include "fdml/random.h"

namespace fdml {
namespace {

struct FeedForwardLayout {
  std::size_t d;
  std::size_t h;

  explicit FeedForwardLayout(const SubModelSpec& spec)
      : d(spec.input_dim), h(spec.hidden_units) {}

  std::size_t w1(std::size_t feature) const { return feature * h; }
  std::size_t b1() const { return d * h; }
  std::size_t w2() const { return d * h + h; }
  std::size_t b2() const { return d * h + 2 * h; }
};

void check_params(const SubModelSpec& spec, std::span<const double> params) {
  if (params.size() != spec.parameter_dim()) {
    throw ConfigError("parameter block has " + std::to_string(params.size()) +
                      " entries, sub-model expects " +
                      std::to_string(spec.parameter_dim()));
  }
}

void check_features(const SubModelSpec& spec, SparseRow features) {
  if (!features.empty() && features.back().index >= spec.input_dim) {
    throw ConfigError("feature index " + std::to_string(features.back().index) +
                      " outside sub-model input dimension " +
                      std::to_string(spec.input_dim));
  }
}

double activate(Activation a, double z) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through pre-activation z and activation value.
double activate_grad(Activation a, double z, double value) {
  return a == Activation::kRelu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - value * value;
}

// Hidden pre-activations for one sample; reused scratch per thread.
std::vector<double>& hidden_pre(const SubModelSpec& spec,
                                std::span<const double> params,
                                SparseRow features) {
  thread_local std::vector<double> z;
  const FeedForwardLayout layout(spec);
  z.assign(params.begin() + layout.b1(), params.begin() + layout.b1() + layout.h);
  for (const SparseEntry& e : features) {
    const double* w = params.data() + layout.w1(e.index);
    for (std::size_t k = 0; k < layout.h; ++k) z[k] += w[k] * e.value;
  }
  return z;
}

}  // namespace

SubModelSpec SubModelSpec::Linear(std::size_t input_dim, bool use_bias) {
  SubModelSpec spec;
  spec.kind = Kind::kLinear;
  spec.input_dim = input_dim;
  spec.use_bias = use_bias;
  return spec;
}

SubModelSpec SubModelSpec::FeedForward(std::size_t input_dim,
                                       std::size_t hidden_units,
                                       Activation activation) {
  SubModelSpec spec;
  spec.kind = Kind::kFeedForward;
  spec.input_dim = input_dim;
  spec.hidden_units = hidden_units;
  spec.activation = activation;
  return spec;
}

std::size_t SubModelSpec::parameter_dim() const {
  if (kind == Kind::kLinear) return input_dim + (use_bias ? 1 : 0);
  return input_dim * hidden_units + 2 * hidden_units + 1;
}

bool SubModelSpec::is_regularized(std::size_t coordinate) const {
  if (kind == Kind::kLinear) return coordinate < input_dim;
  const FeedForwardLayout layout(*this);
  if (coordinate < layout.b1()) return true;
  return coordinate >= layout.w2() && coordinate < layout.b2();
}

std::string to_string(SubModelSpec::Kind kind) {
  return kind == SubModelSpec::Kind::kLinear ? "lr" : "nn";
}

std::string to_string(Activation activation) {
  return activation == Activation::kRelu ? "relu" : "tanh";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + name + "'");
}

ParameterBlock init_block(const SubModelSpec& spec, int party,
                          std::uint64_t seed) {
  ParameterBlock block;
  block.party = party;
  block.values.assign(spec.parameter_dim(), 0.0);
  if (spec.kind == SubModelSpec::Kind::kLinear) return block;

  const FeedForwardLayout layout(spec);
  SplitMix64 rng(SplitMix64::mix(seed) ^ static_cast<std::uint64_t>(party));
  const double r1 = std::sqrt(6.0 / static_cast<double>(layout.d + layout.h));
  const double r2 = std::sqrt(6.0 / static_cast<double>(layout.h + 1));
  for (std::size_t i = 0; i < layout.b1(); ++i) {
    block.values[i] = (2.0 * rng.uniform() - 1.0) * r1;
  }
  for (std::size_t k = 0; k < layout.h; ++k) {
    block.values[layout.w2() + k] = (2.0 * rng.uniform() - 1.0) * r2;
  }
  return block;
}

double local_prediction(const SubModelSpec& spec,
                        std::span<const double> params, SparseRow features) {
  check_params(spec, params);
  check_features(spec, features);
  if (spec.kind == SubModelSpec::Kind::kLinear) {
    double s = 0.0;
    for (const SparseEntry& e : features) s += params[e.index] * e.value;
    if (spec.use_bias) s += params[spec.input_dim];
    return s;
  }
  const FeedForwardLayout layout(spec);
  const std::vector<double>& z = hidden_pre(spec, params, features);
  double out = params[layout.b2()];
  for (std::size_t k = 0; k < layout.h; ++k) {
    out += params[layout.w2() + k] * activate(spec.activation, z[k]);
  }
  return out;
}

double sigmoid(double s) {
  s = std::clamp(s, -kSigmoidClamp, kSigmoidClamp);
  return 1.0 / (1.0 + std::exp(-s));
}

double aggregate_sum(std::span<const double> local_predictions) {
  double s = 0.0;
  for (double a : local_predictions) s += a;
  return s;
}

double aggregate(std::span<const double> local_predictions) {
  return sigmoid(aggregate_sum(local_predictions));
}

double log_loss(double probability, int label) {
  const double p =
      std::clamp(probability, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

double h_term(double aggregate_sum, int label) {
  return sigmoid(aggregate_sum) - static_cast<double>(label);
}

void accumulate_prediction_gradient(const SubModelSpec& spec,
                                    std::span<const double> params,
                                    SparseRow features, double scale,
                                    std::span<double> grad) {
  check_params(spec, params);
  check_features(spec, features);
  if (grad.size() != params.size()) {
    throw ConfigError("gradient buffer does not match parameter block");
  }
  if (spec.kind == SubModelSpec::Kind::kLinear) {
    for (const SparseEntry& e : features) grad[e.index] += scale * e.value;
    if (spec.use_bias) grad[spec.input_dim] += scale;
    return;
  }
  const FeedForwardLayout layout(spec);
  const std::vector<double>& z = hidden_pre(spec, params, features);
  thread_local std::vector<double> delta;
  delta.resize(layout.h);
  grad[layout.b2()] += scale;
  for (std::size_t k = 0; k < layout.h; ++k) {
    const double a = activate(spec.activation, z[k]);
    grad[layout.w2() + k] += scale * a;
    delta[k] = scale * params[layout.w2() + k] *
               activate_grad(spec.activation, z[k], a);
    grad[layout.b1() + k] += delta[k];
  }
  for (const SparseEntry& e : features) {
    double* g = grad.data() + layout.w1(e.index);
    for (std::size_t k = 0; k < layout.h; ++k) g[k] += delta[k] * e.value;
  }
}

void add_regularizer_gradient(const SubModelSpec& spec,
                              std::span<const double> params, double lambda,
                              std::span<double> grad) {
  check_params(spec, params);
  if (lambda == 0.0) return;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (spec.is_regularized(i)) grad[i] += lambda * params[i];
  }
}

std::vector<double> partial_gradient(const SubModelSpec& spec,
                                     std::span<const double> params,
                                     SparseRow features, double h,
                                     double lambda) {
  std::vector<double> grad(spec.parameter_dim(), 0.0);
  accumulate_prediction_gradient(spec, params, features, h, grad);
  add_regularizer_gradient(spec, params, lambda, grad);
  return grad;
}

double regularizer_value(const SubModelSpec& spec,
                         std::span<const double> params, double lambda) {
  check_params(spec, params);
  if (lambda == 0.0) return 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (spec.is_regularized(i)) sq += params[i] * params[i];
  }
  return lambda * 0.5 * sq;
}

}  // namespace fdml
