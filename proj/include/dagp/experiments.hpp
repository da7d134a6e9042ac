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

#include "dagp/training.hpp"

#include <array>
#include <optional>

namespace dagp {

// ---------------------------------------------------------------------------
// Noise separation: a damped cosine with some targets replaced by uniform
// outliers.

struct ChoicenetOptions {
  double outlier_rate = 0.0;
  Eigen::Index n = 1000;
  double signal_noise_std = 0.15;
  double outlier_low = -1.0;
  double outlier_high = 3.0;
  double x_low = -3.0;
  double x_high = 3.0;
};

double choicenet_curve(double x);

/// Labels are 1 for outliers, 0 for signal points.
Dataset gen_choicenet(const ChoicenetOptions &options, std::uint64_t seed);

/// `n` equally spaced noiseless points of the curve over the input range.
Dataset choicenet_test_grid(const ChoicenetOptions &options, Eigen::Index n);

// ---------------------------------------------------------------------------
// Bimodal / trimodal toy data.

enum class SemibimodalSampling {
  // Every sampled input yields all three branch targets.
  triplet,
  // Branch 1 at double rate everywhere, branch 3 at single rate, branch 2
  // only on [0, 5].
  rate_weighted,
};

SemibimodalSampling semibimodal_sampling_from_string(const std::string &s);
std::string to_string(SemibimodalSampling s);

/// Noise-free branch value, `branch` in {0, 1, 2}.
double semibimodal_branch(int branch, double x);

/// `n` points in total on [-2pi, 2pi]; labels hold the branch index.
Dataset gen_semibimodal(Eigen::Index n, std::uint64_t seed,
                        SemibimodalSampling sampling = SemibimodalSampling::triplet,
                        double noise_std = 0.005);

// ---------------------------------------------------------------------------
// Cart-pole.

struct CartpoleConfig {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force_magnitude = 10.0;
  double dt = 0.02;

  static CartpoleConfig default_system() { return {}; }
  static CartpoleConfig short_pole();
  void validate() const;
};

/// Cart position, cart velocity, pole angle, pole angular velocity.
using CartpoleState = std::array<double, 4>;

/// One explicit Euler step under `force`. No termination.
CartpoleState cartpole_step(const CartpoleState &state, double force,
                            const CartpoleConfig &cfg);

/// Mechanical energy of the cart and pole (uniform rod).
double cartpole_energy(const CartpoleState &state, const CartpoleConfig &cfg);

struct CartpoleSampling {
  int actions_per_trajectory = 10;
  int steps_per_action = 5;
  double angle_noise_std = 0.01;
  double start_range = 0.05;
};

/// Inputs are the state before an action plus the force (D = 5); targets are
/// the noisy change of pole angle while the action is held. Every row gets
/// `label`.
Dataset gen_cartpole(const CartpoleConfig &cfg, Eigen::Index n_points,
                     std::uint64_t seed, const CartpoleSampling &sampling = {},
                     int label = 0);

// ---------------------------------------------------------------------------
// Metrics.

class LengthMismatch : public DimensionMismatch {
public:
  using DimensionMismatch::DimensionMismatch;
};

double rmse(const Vector &predicted, const Vector &truth);

struct MeanWithError {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Mean and standard error (sample std / sqrt(n)) of per-point values.
MeanWithError mean_with_error(const Vector &values);

/// Mean log predictive density of `y` under the mixture, or under component
/// `component` alone.
MeanWithError mll(const PredictiveMixture &mix, const Vector &y,
                  std::optional<Eigen::Index> component = std::nullopt);

/// The mean of the component with the largest weight at each point.
Vector argmax_component_mean(const PredictiveMixture &mix);

/// A sparse GP regression baseline: the same model and loop with K = 1.
DagpModel baseline_gpr(const Dataset &data, ModelSpec spec,
                       const TrainConfig &train_config, std::uint64_t model_seed,
                       TrainResult *result = nullptr);

} // namespace dagp
