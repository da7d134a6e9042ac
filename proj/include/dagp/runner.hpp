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

#include "dagp/config.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dagp {

/// How a split is scored; stored in every snapshot so that evaluation of a
/// saved model repeats the numbers of the run that produced it.
struct EvalSettings {
  PredictionSpace space = PredictionSpace::observation;
  int n_mc = 100;
  // Score RMSE on the process with the smallest likelihood noise rather than
  // on the most probable process at each point.
  bool signal_component = false;

  nlohmann::json to_json() const;
  static EvalSettings from_json(const nlohmann::json &j);
};

EvalSettings eval_settings(const ExperimentConfig &config);

/// Metrics of one data split: mll with standard error, rmse against the
/// noiseless targets when the split has them (else against y), and the
/// single-component versions when `component` is set.
nlohmann::json evaluate_split(const DagpModel &model, const Dataset &data,
                              const EvalSettings &settings,
                              std::optional<Eigen::Index> component = std::nullopt);

struct ExperimentData {
  Dataset train;
  std::vector<std::pair<std::string, Dataset>> tests;
};

ExperimentData build_data(const ExperimentConfig &config);

using LogFn = std::function<void(const std::string &)>;

/// Generates or loads the data, trains, evaluates and writes metrics.json,
/// predictions.csv, trace.csv, model.json and the data splits under
/// config.output. Returns the metrics document.
nlohmann::json run_experiment(const ExperimentConfig &config, const LogFn &log = {});

/// Writes the `name` split CSV and its metadata sibling.
void write_split(const std::filesystem::path &dir, const std::string &name,
                 const Dataset &data, const nlohmann::json &meta);

} // namespace dagp
