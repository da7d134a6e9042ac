/*
 * Copyright 2026 The dagp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "dagp/model.hpp"

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagp {

struct TrainConfig {
  int steps = 20000;
  int batch_size = 128;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-8;
  double temperature_start = 1.0;
  double temperature_end = 0.1;
  double anneal_fraction = 0.5;
  int n_mc_train = 1;
  std::uint64_t seed = 0;
  int trace_every = 100;

  void validate() const;
};

class NonFiniteGradient : public std::runtime_error {
public:
  explicit NonFiniteGradient(std::string parameter)
      : std::runtime_error("non-finite gradient for " + parameter),
        parameter_(std::move(parameter)) {}
  const std::string &parameter() const { return parameter_; }

private:
  std::string parameter_;
};

/// Flat gradient in for_each_parameter order; see parameter_names.
struct GradientVector {
  Vector values;
};

struct GradientResult {
  ElboEstimate estimate;
  GradientVector gradient;
};

/// Pathwise gradient of one minibatch estimate. Throws NonFiniteGradient
/// naming the first offending parameter.
GradientResult gradient(const DagpModel &model, const Dataset &data,
                        std::span<const Eigen::Index> batch, int n_mc,
                        double temperature, RngStream &rng);

struct AdamState {
  Vector first;
  Vector second;
  long step = 0;

  explicit AdamState(Eigen::Index size)
      : first(Vector::Zero(size)), second(Vector::Zero(size)) {}
};

/// One bias-corrected Adam step, ascending along `grad`.
void adam_step(AdamState &state, Vector &params, const Vector &grad,
               const TrainConfig &config);

double temperature_at(const TrainConfig &config, int step);

struct TraceRow {
  int step = 0;
  ElboEstimate elbo;
  double temperature = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<TraceRow> trace;
  std::vector<double> step_elbo; // one minibatch estimate per step
};

using TraceCallback = std::function<void(const TraceRow &)>;

/// Optimizes `model` in place. Steps whose gradient is non-finite are skipped;
/// the third consecutive one rethrows.
TrainResult train(DagpModel &model, const Dataset &data,
                  const TrainConfig &config, const TraceCallback &on_trace = {});

/// Trailing moving average with the given window.
std::vector<double> smooth(const std::vector<double> &values, std::size_t window);

} // namespace dagp
