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
#include "dagp/training.hpp"

#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

using namespace dagp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string &name) {
  fs::path dir = fs::temp_directory_path() / ("dagp_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Dataset noisy_line(Eigen::Index n, Eigen::Index d) {
  RngStream rng(5, 0);
  Dataset data;
  data.x.resize(n, d);
  data.y.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      data.x(i, j) = rng.normal() * 1e3;
    }
    data.y(i, 0) = data.x(i, 0) / 3.0 + rng.normal();
  }
  return data;
}

bool bit_equal(const Vector &a, const Vector &b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

} // namespace

TEST_CASE("format_double round-trips exactly") {
  const double cases[] = {0.1, 1.0 / 3.0, -2.5e-310, 1e300, std::nextafter(1.0, 2.0), -0.0};
  for (const double v : cases) {
    const std::string s = format_double(v);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(std::memcmp(&v, &back, sizeof v) == 0);
  }
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("dataset csv round trip") {
  Dataset data = noisy_line(17, 3);
  data.labels = std::vector<int>(17, 0);
  (*data.labels)[4] = 2;
  data.noiseless = data.y.col(0) * 0.5;
  const std::string text = dataset_to_csv(data);
  CHECK(text.rfind("x_1,x_2,x_3,y,label,noiseless_y\n", 0) == 0);

  const Dataset back = dataset_from_csv(text);
  CHECK(back.x == data.x);
  CHECK(back.y == data.y);
  REQUIRE(back.labels);
  CHECK(*back.labels == *data.labels);
  REQUIRE(back.noiseless);
  CHECK(*back.noiseless == *data.noiseless);

  const Dataset plain = dataset_from_csv("x_1,y\n1,2\n3,4\n");
  CHECK(plain.size() == 2);
  CHECK_FALSE(plain.labels);
  CHECK(plain.y(1, 0) == 4.0);
}

TEST_CASE("malformed csv is rejected") {
  CHECK_THROWS_AS(dataset_from_csv(""), FormatError);
  CHECK_THROWS_AS(dataset_from_csv("a,b\n1,2\n"), FormatError);
  CHECK_THROWS_AS(dataset_from_csv("x_1,y\n"), FormatError);
  CHECK_THROWS_AS(dataset_from_csv("x_1,y\n1\n"), FormatError);
  CHECK_THROWS_AS(dataset_from_csv("x_1,y\n1,abc\n"), FormatError);
  CHECK_THROWS_AS(dataset_from_csv("x_1,y,extra\n1,2,3\n"), FormatError);
}

TEST_CASE("atomic writes replace whole files and leave no temporaries") {
  const fs::path dir = scratch_dir("atomic");
  const fs::path target = dir / "out.txt";
  write_file_atomic(target, "first");
  write_file_atomic(target, "second");
  CHECK(read_file(target) == "second");
  int entries = 0;
  for ([[maybe_unused]] const auto &e : fs::directory_iterator(dir)) {
    ++entries;
  }
  CHECK(entries == 1);
  CHECK_THROWS(write_file_atomic(dir / "missing" / "x.txt", "x"));
  CHECK_THROWS(read_file(dir / "absent.txt"));
  CHECK(metadata_path("a/b/train.csv") == fs::path("a/b/train.meta.json"));
}

TEST_CASE("model snapshot is bit-exact") {
  const Dataset data = noisy_line(40, 2);
  ModelSpec spec;
  spec.components = 2;
  spec.layers = 2;
  spec.inducing = 5;
  spec.processes = {{KernelFamily::squared_exponential, true, std::nullopt},
                    {KernelFamily::white_noise, false, 1.5}};
  DagpModel model = make_model(spec, data, 9);
  TrainConfig config;
  config.steps = 30;
  config.batch_size = 16;
  config.trace_every = 10;
  train(model, data, config);

  const fs::path dir = scratch_dir("snapshot");
  const nlohmann::json extra = {{"note", "kept"}};
  save_model(dir / "model.json", model, extra);
  nlohmann::json extra_back;
  const DagpModel back = load_model(dir / "model.json", &extra_back);

  CHECK(bit_equal(flatten_parameters(back), flatten_parameters(model)));
  CHECK(parameter_names(back) == parameter_names(model));
  CHECK(back.seed == model.seed);
  CHECK(extra_back == extra);
  REQUIRE(back.noise_priors.size() == 2);
  CHECK(back.noise_priors[0].has_value());
  CHECK_FALSE(back.noise_priors[1].has_value());
  CHECK(back.functions[1].back().kernel.family == KernelFamily::white_noise);
  CHECK(back.functions[0][0].whitened == model.functions[0][0].whitened);

  // Predictions from a reloaded model must match the original exactly.
  RngStream r1(4, 0);
  RngStream r2(4, 0);
  const auto p1 = predict_mixture(model, data.x, 20, r1, PredictionSpace::observation);
  const auto p2 = predict_mixture(back, data.x, 20, r2, PredictionSpace::observation);
  CHECK(p1.means == p2.means);
  CHECK(p1.variances == p2.variances);
  CHECK(p1.weights == p2.weights);
}

TEST_CASE("damaged snapshots are rejected") {
  const Dataset data = noisy_line(10, 1);
  ModelSpec spec;
  spec.inducing = 3;
  const DagpModel model = make_model(spec, data, 1);
  nlohmann::json doc = model_to_json(model);

  auto wrong_version = doc;
  wrong_version["version"] = 99;
  CHECK_THROWS_AS(model_from_json(wrong_version), FormatError);

  auto missing = doc;
  missing.erase("raw_noises");
  CHECK_THROWS_AS(model_from_json(missing), FormatError);

  auto bad_shape = doc;
  bad_shape["belief_logits"]["rows"] = 3;
  CHECK_THROWS_AS(model_from_json(bad_shape), FormatError);

  const fs::path dir = scratch_dir("damaged");
  write_file_atomic(dir / "cut.json", doc.dump().substr(0, 50));
  CHECK_THROWS_AS(load_model(dir / "cut.json"), FormatError);

  DagpModel poisoned = model;
  poisoned.raw_noises[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS(model_to_json(poisoned));
}
