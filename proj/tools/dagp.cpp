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

// Command-line front end: run experiments, evaluate snapshots, generate data.

#include "dagp/io.hpp"
#include "dagp/runner.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

using dagp::ExperimentKind;
using nlohmann::json;

int run_command(const std::string &config_path, std::optional<std::uint64_t> seed, bool quiet) {
  dagp::ExperimentConfig config = dagp::load_config(config_path);
  if (seed) {
    config.seed = *seed;
    config.train.seed = *seed;
  }
  dagp::LogFn log;
  if (!quiet) {
    log = [](const std::string &line) { std::cerr << line << '\n'; };
  }
  const json metrics = dagp::run_experiment(config, log);
  std::cout << metrics.dump(2) << '\n';
  std::cerr << "wrote " << config.output.string() << '\n';
  return 0;
}

int evaluate_command(const std::string &snapshot, const std::string &data_path,
                     std::optional<long> component, const std::string &output) {
  for (const std::string &path : {snapshot, data_path}) {
    if (!std::filesystem::is_regular_file(path)) {
      throw dagp::FormatError("no such file: " + path);
    }
  }
  json extra;
  const dagp::DagpModel model = dagp::load_model(snapshot, &extra);
  const dagp::Dataset data = dagp::load_dataset(data_path);
  if (!extra.contains("eval")) {
    throw dagp::FormatError("snapshot carries no evaluation settings");
  }
  const dagp::EvalSettings settings = dagp::EvalSettings::from_json(extra.at("eval"));
  std::optional<Eigen::Index> k;
  if (component) {
    k = static_cast<Eigen::Index>(*component);
  }
  const json metrics = dagp::evaluate_split(model, data, settings, k);
  const std::string text = metrics.dump(2) + "\n";
  if (!output.empty()) {
    dagp::write_file_atomic(output, text);
  }
  std::cout << text;
  return 0;
}

struct GenerateOptions {
  std::string experiment;
  std::string output;
  std::uint64_t seed = 0;
  long n = -1;
  double outlier_rate = 0.0;
  std::string sampling = "rate_weighted";
  std::string system = "default";
};

int generate_command(const GenerateOptions &o) {
  const ExperimentKind kind = dagp::experiment_kind_from_string(o.experiment);
  dagp::Dataset data;
  json meta = {{"experiment", o.experiment}, {"seed", o.seed}};
  switch (kind) {
  case ExperimentKind::choicenet: {
    dagp::ChoicenetOptions options;
    options.outlier_rate = o.outlier_rate;
    if (o.n > 0) {
      options.n = o.n;
    }
    if (options.outlier_rate < 0.0 || options.outlier_rate > 1.0) {
      throw dagp::ConfigError("--outlier-rate must lie in [0, 1]");
    }
    data = dagp::gen_choicenet(options, o.seed);
    meta["outlier_rate"] = options.outlier_rate;
    meta["n"] = options.n;
    break;
  }
  case ExperimentKind::semibimodal: {
    dagp::SemibimodalSampling sampling{};
    try {
      sampling = dagp::semibimodal_sampling_from_string(o.sampling);
    } catch (const std::exception &e) {
      throw dagp::ConfigError(e.what());
    }
    const long n = o.n > 0 ? o.n : 350;
    if (n < 3) {
      throw dagp::ConfigError("--n must be >= 3");
    }
    data = dagp::gen_semibimodal(n, o.seed, sampling);
    meta["n"] = n;
    meta["sampling"] = o.sampling;
    break;
  }
  case ExperimentKind::cartpole: {
    if (o.system != "default" && o.system != "short") {
      throw dagp::ConfigError("--system must be 'default' or 'short'");
    }
    const long n = o.n > 0 ? o.n : 500;
    if (n % 10 != 0) {
      throw dagp::ConfigError("--n must be a multiple of 10 for cart-pole data");
    }
    const bool is_short = o.system == "short";
    data = dagp::gen_cartpole(is_short ? dagp::CartpoleConfig::short_pole()
                                       : dagp::CartpoleConfig::default_system(),
                              n, o.seed, {}, is_short ? 1 : 0);
    meta["n"] = n;
    meta["system"] = o.system;
    break;
  }
  case ExperimentKind::custom_csv:
    throw dagp::ConfigError("custom_csv data is read, not generated");
  }
  dagp::save_dataset(o.output, data);
  dagp::write_file_atomic(dagp::metadata_path(o.output), meta.dump(1) + "\n");
  std::cerr << "wrote " << data.size() << " rows to " << o.output << '\n';
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Data association with Gaussian processes"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> run_seed;
  bool quiet = false;
  CLI::App *run = app.add_subcommand("run", "Train and evaluate the experiment in a config file");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", run_seed, "Override the config seed");
  run->add_flag("--quiet,-q", quiet, "Suppress progress output");

  std::string snapshot;
  std::string data_path;
  std::optional<long> component;
  std::string eval_output;
  CLI::App *evaluate = app.add_subcommand("evaluate", "Score a saved model on a dataset CSV");
  evaluate->add_option("snapshot", snapshot, "model.json written by run")->required();
  evaluate->add_option("data", data_path, "Dataset CSV")->required();
  evaluate->add_option("--component", component, "Also score this component alone (0-based)");
  evaluate->add_option("--output,-o", eval_output, "Write the metrics here as well");

  GenerateOptions gen;
  CLI::App *generate = app.add_subcommand("generate", "Write a synthetic dataset CSV");
  generate->add_option("experiment", gen.experiment, "choicenet, semibimodal or cartpole")
      ->required();
  generate->add_option("--output,-o", gen.output, "CSV path")->required();
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--n", gen.n, "Number of points");
  generate->add_option("--outlier-rate", gen.outlier_rate, "choicenet outlier rate");
  generate->add_option("--sampling", gen.sampling, "semibimodal: rate_weighted or triplet");
  generate->add_option("--system", gen.system, "cartpole: default or short");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*run) {
      return run_command(config_path, run_seed, quiet);
    }
    if (*evaluate) {
      return evaluate_command(snapshot, data_path, component, eval_output);
    }
    return generate_command(gen);
  } catch (const dagp::NonFiniteGradient &e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const dagp::NotPositiveDefinite &e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const dagp::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const dagp::FormatError &e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument &e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::out_of_range &e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
