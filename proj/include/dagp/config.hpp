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

#include "dagp/experiments.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dagp {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { choicenet, semibimodal, cartpole, custom_csv };

ExperimentKind experiment_kind_from_string(const std::string &s);
std::string to_string(ExperimentKind kind);

struct GridConfig {
  double low = 0.0;
  double high = 1.0;
  Eigen::Index points = 200;
};

struct CartpoleDataConfig {
  Eigen::Index train_default = 500;
  Eigen::Index train_short = 500;
  Eigen::Index test_default = 5000;
  Eigen::Index test_short = 5000;
  CartpoleSampling sampling;
};

struct EvalConfig {
  PredictionSpace space = PredictionSpace::observation;
  int n_mc = 100;
  // Prediction grid for one-dimensional inputs; unused otherwise.
  GridConfig grid;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::custom_csv;
  std::uint64_t seed = 0;
  std::filesystem::path output;
  ModelSpec model;
  TrainConfig train;
  EvalConfig eval;

  ChoicenetOptions choicenet;
  Eigen::Index choicenet_test_points = 1000;

  Eigen::Index semibimodal_n = 350;
  SemibimodalSampling semibimodal_sampling = SemibimodalSampling::rate_weighted;
  double semibimodal_noise_std = 0.005;

  CartpoleDataConfig cartpole;
  // Also fit K = 1 sparse GPs on the mixed data and on each system alone.
  bool baselines = true;

  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
};

/// The defaults of an experiment before any configuration is applied.
ExperimentConfig default_config(ExperimentKind kind);

/// Reads a configuration document. Unknown keys and out-of-range values
/// raise ConfigError. A missing "output" becomes runs/<default_name>.
ExperimentConfig parse_config(const nlohmann::json &doc,
                              const std::string &default_name = "run");

ExperimentConfig load_config(const std::filesystem::path &path);

ProcessSpec process_from_json(const nlohmann::json &j);

} // namespace dagp
