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

#include "dagp/experiments.hpp"

#include <cmath>
#include <numbers>

namespace dagp {

namespace {

constexpr double kPi = std::numbers::pi;

} // namespace

double choicenet_curve(double x) {
  return std::cos(0.5 * kPi * x) * std::exp(-0.25 * x * x);
}

Dataset gen_choicenet(const ChoicenetOptions &options, std::uint64_t seed) {
  require(options.n >= 1, "gen_choicenet: n must be >= 1");
  require(options.outlier_rate >= 0.0 && options.outlier_rate <= 1.0,
          "gen_choicenet: outlier_rate must lie in [0, 1]");
  RngStream rng(seed, 0x63686f696365ULL);
  Dataset data;
  data.x.resize(options.n, 1);
  data.y.resize(options.n, 1);
  data.labels = std::vector<int>(static_cast<std::size_t>(options.n));
  data.noiseless = Vector(options.n);
  for (Eigen::Index i = 0; i < options.n; ++i) {
    const double x = options.x_low + (options.x_high - options.x_low) * rng.uniform();
    const bool outlier = rng.uniform() < options.outlier_rate;
    const double clean = choicenet_curve(x);
    const double y =
        outlier ? options.outlier_low +
                      (options.outlier_high - options.outlier_low) * rng.uniform()
                : clean + options.signal_noise_std * rng.normal();
    data.x(i, 0) = x;
    data.y(i, 0) = y;
    (*data.labels)[static_cast<std::size_t>(i)] = outlier ? 1 : 0;
    (*data.noiseless)[i] = clean;
  }
  return data;
}

Dataset choicenet_test_grid(const ChoicenetOptions &options, Eigen::Index n) {
  require(n >= 2, "choicenet_test_grid: n must be >= 2");
  Dataset data;
  data.x.resize(n, 1);
  data.y.resize(n, 1);
  data.noiseless = Vector(n);
  data.labels = std::vector<int>(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = options.x_low + (options.x_high - options.x_low) *
                                         static_cast<double>(i) /
                                         static_cast<double>(n - 1);
    data.x(i, 0) = x;
    data.y(i, 0) = choicenet_curve(x);
    (*data.noiseless)[i] = data.y(i, 0);
  }
  return data;
}

SemibimodalSampling semibimodal_sampling_from_string(const std::string &s) {
  if (s == "triplet") {
    return SemibimodalSampling::triplet;
  }
  if (s == "rate_weighted") {
    return SemibimodalSampling::rate_weighted;
  }
  throw std::invalid_argument("unknown semibimodal sampling '" + s + "'");
}

std::string to_string(SemibimodalSampling s) {
  return s == SemibimodalSampling::triplet ? "triplet" : "rate_weighted";
}

double semibimodal_branch(int branch, double x) {
  switch (branch) {
  case 0:
    return std::sin(x);
  case 1:
    return std::sin(x) - 2.0 * std::exp(-0.5 * (x - 2.0) * (x - 2.0));
  case 2:
    return -1.0 - 3.0 / (8.0 * kPi) * x + 0.3 * std::sin(2.0 * x);
  default:
    throw std::invalid_argument("semibimodal_branch: branch must be 0, 1 or 2");
  }
}

Dataset gen_semibimodal(Eigen::Index n, std::uint64_t seed,
                        SemibimodalSampling sampling, double noise_std) {
  require(n >= 3, "gen_semibimodal: n must be >= 3");
  RngStream rng(seed, 0x73656d69ULL);
  Dataset data;
  data.x.resize(n, 1);
  data.y.resize(n, 1);
  data.labels = std::vector<int>(static_cast<std::size_t>(n));
  data.noiseless = Vector(n);
  double x = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int branch = 0;
    if (sampling == SemibimodalSampling::triplet) {
      if (i % 3 == 0) {
        x = -2.0 * kPi + 4.0 * kPi * rng.uniform();
      }
      branch = static_cast<int>(i % 3);
    } else {
      // Inside [0, 5] half of the branch-1 draws move to branch 2, so each
      // branch holds a third of the data there.
      x = -2.0 * kPi + 4.0 * kPi * rng.uniform();
      const double u = rng.uniform();
      branch = u < 2.0 / 3.0 ? 0 : 2;
      if (branch == 0 && x >= 0.0 && x <= 5.0 && u < 1.0 / 3.0) {
        branch = 1;
      }
    }
    const double clean = semibimodal_branch(branch, x);
    data.x(i, 0) = x;
    data.y(i, 0) = clean + noise_std * rng.normal();
    (*data.labels)[static_cast<std::size_t>(i)] = branch;
    (*data.noiseless)[i] = clean;
  }
  return data;
}

CartpoleConfig CartpoleConfig::short_pole() {
  CartpoleConfig cfg;
  cfg.pole_mass = 0.05;
  cfg.pole_half_length = 0.05;
  return cfg;
}

void CartpoleConfig::validate() const {
  require(gravity > 0.0 && cart_mass > 0.0 && pole_mass > 0.0 &&
              pole_half_length > 0.0 && force_magnitude >= 0.0 && dt > 0.0,
          "CartpoleConfig: masses, lengths and dt must be positive");
}

CartpoleState cartpole_step(const CartpoleState &state, double force,
                            const CartpoleConfig &cfg) {
  const auto [x, x_dot, theta, theta_dot] = state;
  const double total_mass = cfg.cart_mass + cfg.pole_mass;
  const double pole_moment = cfg.pole_mass * cfg.pole_half_length;
  const double sin_t = std::sin(theta);
  const double cos_t = std::cos(theta);
  const double temp = (force + pole_moment * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (cfg.gravity * sin_t - cos_t * temp) /
      (cfg.pole_half_length *
       (4.0 / 3.0 - cfg.pole_mass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_moment * theta_acc * cos_t / total_mass;
  return {x + cfg.dt * x_dot, x_dot + cfg.dt * x_acc, theta + cfg.dt * theta_dot,
          theta_dot + cfg.dt * theta_acc};
}

double cartpole_energy(const CartpoleState &state, const CartpoleConfig &cfg) {
  const double x_dot = state[1];
  const double theta = state[2];
  const double theta_dot = state[3];
  const double m = cfg.pole_mass;
  const double l = cfg.pole_half_length;
  const double kinetic = 0.5 * (cfg.cart_mass + m) * x_dot * x_dot +
                         m * l * std::cos(theta) * x_dot * theta_dot +
                         (2.0 / 3.0) * m * l * l * theta_dot * theta_dot;
  return kinetic + m * cfg.gravity * l * std::cos(theta);
}

Dataset gen_cartpole(const CartpoleConfig &cfg, Eigen::Index n_points,
                     std::uint64_t seed, const CartpoleSampling &sampling,
                     int label) {
  cfg.validate();
  require(sampling.actions_per_trajectory >= 1 && sampling.steps_per_action >= 1,
          "gen_cartpole: empty trajectories");
  require(n_points >= 1 && n_points % sampling.actions_per_trajectory == 0,
          "gen_cartpole: n_points must be a positive multiple of the actions "
          "per trajectory");
  RngStream rng(seed, 0x63617274ULL);
  RngStream noise_rng = rng.derive(1);
  Dataset data;
  data.x.resize(n_points, 5);
  data.y.resize(n_points, 1);
  data.labels = std::vector<int>(static_cast<std::size_t>(n_points), label);
  data.noiseless = Vector(n_points);
  Eigen::Index row = 0;
  while (row < n_points) {
    CartpoleState state;
    for (double &s : state) {
      s = sampling.start_range * (2.0 * rng.uniform() - 1.0);
    }
    for (int a = 0; a < sampling.actions_per_trajectory; ++a, ++row) {
      const double force = cfg.force_magnitude * (2.0 * rng.uniform() - 1.0);
      for (int j = 0; j < 4; ++j) {
        data.x(row, j) = state[static_cast<std::size_t>(j)];
      }
      data.x(row, 4) = force;
      const double before = state[2];
      for (int s = 0; s < sampling.steps_per_action; ++s) {
        state = cartpole_step(state, force, cfg);
      }
      const double change = state[2] - before;
      (*data.noiseless)[row] = change;
      data.y(row, 0) = change + sampling.angle_noise_std * noise_rng.normal();
    }
  }
  return data;
}

double rmse(const Vector &predicted, const Vector &truth) {
  if (predicted.size() != truth.size()) {
    throw LengthMismatch("rmse: length mismatch");
  }
  require(predicted.size() > 0, "rmse: empty input");
  return std::sqrt((predicted - truth).squaredNorm() /
                   static_cast<double>(predicted.size()));
}

MeanWithError mean_with_error(const Vector &values) {
  require(values.size() > 0, "mean_with_error: empty input");
  const auto n = static_cast<double>(values.size());
  MeanWithError out;
  out.mean = values.mean();
  if (values.size() > 1) {
    const double var = (values.array() - out.mean).square().sum() / (n - 1.0);
    out.standard_error = std::sqrt(var / n);
  }
  return out;
}

MeanWithError mll(const PredictiveMixture &mix, const Vector &y,
                  std::optional<Eigen::Index> component) {
  if (mix.size() != y.size()) {
    throw LengthMismatch("mll: length mismatch");
  }
  Vector values(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    values[i] = component ? component_log_density(mix, i, *component, y[i])
                          : log_predictive_density(mix, i, y[i]);
  }
  return mean_with_error(values);
}

Vector argmax_component_mean(const PredictiveMixture &mix) {
  Vector out(mix.size());
  for (Eigen::Index i = 0; i < mix.size(); ++i) {
    Eigen::Index k = 0;
    mix.weights.row(i).maxCoeff(&k);
    out[i] = mix.means(i, k);
  }
  return out;
}

DagpModel baseline_gpr(const Dataset &data, ModelSpec spec,
                       const TrainConfig &train_config, std::uint64_t model_seed,
                       TrainResult *result) {
  spec.components = 1;
  if (spec.processes.size() > 1) {
    spec.processes.resize(1);
  }
  DagpModel model = make_model(spec, data, model_seed);
  TrainResult r = train(model, data, train_config);
  if (result != nullptr) {
    *result = std::move(r);
  }
  return model;
}

} // namespace dagp
