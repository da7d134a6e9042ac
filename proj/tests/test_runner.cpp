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

#include "dagp/io.hpp"
#include "dagp/runner.hpp"

#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace dagp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("dagp_runner_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig tiny_choicenet(const fs::path &output) {
  ExperimentConfig config = default_config(ExperimentKind::choicenet);
  config.output = output;
  config.seed = 3;
  config.choicenet.n = 120;
  config.choicenet.outlier_rate = 0.2;
  config.choicenet_test_points = 40;
  config.model.inducing = 6;
  config.train.steps = 60;
  config.train.batch_size = 32;
  config.train.trace_every = 20;
  config.eval.n_mc = 8;
  config.eval.grid.points = 15;
  return config;
}

} // namespace

TEST_CASE("experiment defaults") {
  const ExperimentConfig c = parse_config(json{{"experiment", "choicenet"}}, "demo");
  CHECK(c.output == fs::path("runs") / "demo");
  CHECK(c.model.components == 2);
  CHECK(c.model.inducing == 25);
  REQUIRE(c.model.processes.size() == 2);
  CHECK(c.model.processes[1].kernel == KernelFamily::white_noise);
  CHECK(c.eval.space == PredictionSpace::latent);

  const ExperimentConfig s = parse_config(json{{"experiment", "semibimodal"}});
  CHECK(s.model.components == 4);
  CHECK(s.semibimodal_n == 350);

  const ExperimentConfig p = parse_config(json{{"experiment", "cartpole"}});
  CHECK(p.model.inducing == 100);
  CHECK(p.cartpole.train_default == 500);
  CHECK(p.cartpole.train_short == 500);
}

TEST_CASE("config values are applied") {
  const json doc = json::parse(R"({
    "experiment": "cartpole", "seed": 9, "output": "x/y",
    "model": {"lengthscale": [1, 2, 3, 4, 5], "alpha_lengthscale": 0.5,
              "noise_prior": {"median": 0.1, "log_std": 0.3}},
    "train": {"steps": 11, "learning_rate": 0.02},
    "eval": {"n_mc": 7},
    "data": {"train_default": 20, "train_short": 0}
  })");
  const ExperimentConfig c = parse_config(doc);
  CHECK(c.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.output == fs::path("x/y"));
  CHECK(c.model.lengthscales == std::vector<double>{1, 2, 3, 4, 5});
  CHECK(c.model.alpha_lengthscale == 0.5);
  CHECK(c.model.alpha_lengthscales.empty());
  CHECK(c.model.noise_prior.log_mean == doctest::Approx(std::log(0.1)));
  CHECK(c.train.steps == 11);
  CHECK(c.eval.n_mc == 7);
  CHECK(c.cartpole.train_short == 0);

  json processes = json::parse(R"({"experiment": "choicenet", "model": {"processes": [
      {"kernel": "squared_exponential"}, {"kernel": "squared_exponential"},
      {"kernel": "white_noise", "init_noise": 1.5}]}})");
  const ExperimentConfig three = parse_config(processes);
  CHECK(three.model.components == 3);
  CHECK(three.model.processes[2].init_noise == 1.5);
}

TEST_CASE("bad configs are rejected") {
  auto rejects = [](const std::string &text) {
    CHECK_THROWS_AS(parse_config(json::parse(text)), ConfigError);
  };
  rejects(R"({"experiment": "choicenet", "bogus": 1})");
  rejects(R"({"experiment": "choicenet", "model": {"inducng": 10}})");
  rejects(R"({"experiment": "choicenet", "train": {"seed": 1}})");
  rejects(R"({"experiment": "choicenet", "train": {"steps": "many"}})");
  rejects(R"({"experiment": "choicenet", "data": {"outlier_rate": 1.5}})");
  rejects(R"({"experiment": "choicenet", "model": {"lengthscale": [1, -2]}})");
  rejects(R"({"experiment": "choicenet", "model": {"components": 3, "processes": [{}, {}]}})");
  rejects(R"({"experiment": "choicenet", "eval": {"space": "sideways"}})");
  rejects(R"({"experiment": "cartpole", "data": {"train_default": 15}})");
  rejects(R"({"experiment": "custom_csv"})");
  rejects(R"({"experiment": "weather"})");
  rejects(R"({"seed": 1})");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("per-dimension lengthscales must match the input dimension") {
  RngStream rng(1, 0);
  Dataset data;
  data.x = sample_std_normal(rng, 10, 2);
  data.y = sample_std_normal(rng, 10, 1);
  ModelSpec spec;
  spec.inducing = 4;
  spec.lengthscales = {0.5, 3.0};
  const DagpModel model = make_model(spec, data, 2);
  const Vector ls = model.functions[0][0].kernel.lengthscales();
  CHECK(ls[0] == doctest::Approx(0.5));
  CHECK(ls[1] == doctest::Approx(3.0));
  CHECK(model.alphas[0].kernel.lengthscales()[1] == doctest::Approx(1.0));
  spec.lengthscales = {1.0, 2.0, 3.0};
  CHECK_THROWS(make_model(spec, data, 2));
}

TEST_CASE("a run writes complete, reproducible outputs") {
  const fs::path dir = scratch_dir("run");
  const ExperimentConfig config = tiny_choicenet(dir / "a");
  const json metrics = run_experiment(config);

  for (const char *file : {"metrics.json", "model.json", "trace.csv", "predictions.csv",
                           "data/train.csv", "data/train.meta.json", "data/test.csv"}) {
    CHECK(fs::exists(dir / "a" / file));
  }
  for (const auto &entry : fs::recursive_directory_iterator(dir)) {
    CHECK(entry.path().string().find(".tmp") == std::string::npos);
  }
  for (const char *key : {"rmse", "mll", "mll_stderr", "assignment_mass", "noise_std", "splits"}) {
    CHECK(metrics.contains(key));
  }
  CHECK(metrics.at("splits").at("test").at("n") == 40);
  CHECK(json::parse(slurp(dir / "a" / "metrics.json")) == metrics);

  // predictions.csv: one row per grid point, inputs then a weight, mean and
  // variance column per component.
  std::istringstream rows(slurp(dir / "a" / "predictions.csv"));
  std::string header;
  std::getline(rows, header);
  CHECK(header == "x_1,weight_1,mean_1,variance_1,weight_2,mean_2,variance_2");
  int lines = 0;
  for (std::string line; std::getline(rows, line);) {
    ++lines;
  }
  CHECK(lines == 15);

  ExperimentConfig again = config;
  again.output = dir / "b";
  run_experiment(again);
  CHECK(slurp(dir / "a" / "metrics.json") == slurp(dir / "b" / "metrics.json"));
  CHECK(slurp(dir / "a" / "model.json") == slurp(dir / "b" / "model.json"));
  fs::remove_all(dir);
}

TEST_CASE("evaluating a snapshot repeats the run's metrics") {
  const fs::path dir = scratch_dir("evaluate");
  const json metrics = run_experiment(tiny_choicenet(dir));
  json extra;
  const DagpModel model = load_model(dir / "model.json", &extra);
  const EvalSettings settings = EvalSettings::from_json(extra.at("eval"));
  CHECK(settings.signal_component);
  const Dataset test = load_dataset(dir / "data" / "test.csv");
  CHECK(evaluate_split(model, test, settings) == metrics.at("splits").at("test"));

  const json with_component = evaluate_split(model, test, settings, 1);
  CHECK(with_component.at("component").at("index") == 1);
  CHECK_THROWS_AS(evaluate_split(model, test, settings, 2), std::out_of_range);

  Dataset wide = test;
  wide.x = DenseMatrix::Zero(test.size(), 3);
  CHECK_THROWS_AS(evaluate_split(model, wide, settings), DimensionMismatch);
  fs::remove_all(dir);
}

TEST_CASE("cart-pole data splits") {
  ExperimentConfig config = default_config(ExperimentKind::cartpole);
  config.cartpole.train_default = 30;
  config.cartpole.train_short = 20;
  config.cartpole.test_default = 10;
  config.cartpole.test_short = 40;
  const ExperimentData data = build_data(config);
  CHECK(data.train.size() == 50);
  REQUIRE(data.train.labels.has_value());
  CHECK(std::count(data.train.labels->begin(), data.train.labels->end(), 0) == 30);
  REQUIRE(data.tests.size() == 3);
  CHECK(data.tests[0].first == "test_mixed");
  CHECK(data.tests[0].second.size() == 50);
  CHECK(data.tests[1].second.size() == 10);
  CHECK(data.tests[2].second.size() == 40);
  // Train and test trajectories come from different streams.
  CHECK(data.train.x.row(0) != data.tests[0].second.x.row(0));
}
