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

#include "dagp/config.hpp"

#include "dagp/io.hpp"

#include <set>

namespace dagp {

using nlohmann::json;

namespace {

// Hands out the members of one JSON object and reports any it never handed
// out, so misspelled keys fail loudly.
class Section {
public:
  Section(const json &j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) {
      throw ConfigError(where_ + ": expected an object");
    }
  }

  const json *find(const std::string &key) {
    used_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T> void read(const std::string &key, T &out) {
    if (const json *v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception &) {
        throw ConfigError(where_ + "." + key + ": wrong type");
      }
    }
  }

  void read_count(const std::string &key, Eigen::Index &out) {
    long long v = static_cast<long long>(out);
    read(key, v);
    out = static_cast<Eigen::Index>(v);
  }

  std::string name(const std::string &key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto &item : j_.items()) {
      if (used_.count(item.key()) == 0) {
        throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
      }
    }
  }

private:
  const json &j_;
  std::string where_;
  std::set<std::string> used_;
};

void check(bool ok, const std::string &message) {
  if (!ok) {
    throw ConfigError(message);
  }
}

// A single value for every input dimension, or a list with one per dimension.
void read_lengthscale(Section &s, const std::string &key, double &scalar,
                      std::vector<double> &per_dim) {
  const json *v = s.find(key);
  if (v == nullptr) {
    return;
  }
  if (v->is_array()) {
    s.read(key, per_dim);
    check(!per_dim.empty(), s.name(key) + ": empty list");
    for (double l : per_dim) {
      check(l > 0.0, s.name(key) + ": lengthscales must be positive");
    }
  } else {
    s.read(key, scalar);
  }
}

KernelFamily kernel_from_config(const std::string &s, const std::string &where) {
  try {
    return kernel_family_from_string(s);
  } catch (const std::exception &) {
    throw ConfigError(where + ": unknown kernel '" + s + "'");
  }
}

PredictionSpace space_from_string(const std::string &s, const std::string &where) {
  if (s == "latent") {
    return PredictionSpace::latent;
  }
  if (s == "observation") {
    return PredictionSpace::observation;
  }
  throw ConfigError(where + ": space must be 'latent' or 'observation'");
}

void read_model(const json &j, ModelSpec &spec) {
  Section s(j, "model");
  s.read("components", spec.components);
  s.read("layers", spec.layers);
  s.read("inducing", spec.inducing);
  s.read("kernel_variance", spec.kernel_variance);
  read_lengthscale(s, "lengthscale", spec.lengthscale, spec.lengthscales);
  s.read("alpha_variance", spec.alpha_variance);
  read_lengthscale(s, "alpha_lengthscale", spec.alpha_lengthscale, spec.alpha_lengthscales);
  s.read("init_noise", spec.init_noise);
  s.read("inducing_jitter", spec.inducing_jitter);
  s.read("belief_init_std", spec.belief_init_std);
  s.read("mean_init_std", spec.mean_init_std);
  s.read("whiten", spec.whiten);
  s.read("deep_s_scale", spec.deep_s_scale);
  if (const json *p = s.find("noise_prior")) {
    Section prior(*p, "model.noise_prior");
    double median = std::exp(spec.noise_prior.log_mean);
    prior.read("median", median);
    prior.read("log_std", spec.noise_prior.log_std);
    prior.finish();
    check(median > 0.0 && spec.noise_prior.log_std > 0.0,
          "model.noise_prior: median and log_std must be positive");
    spec.noise_prior.log_mean = std::log(median);
  }
  if (const json *p = s.find("processes")) {
    check(p->is_array(), "model.processes: expected a list");
    spec.processes.clear();
    for (const auto &item : *p) {
      spec.processes.push_back(process_from_json(item));
    }
    if (!j.contains("components")) {
      spec.components = static_cast<int>(spec.processes.size());
    }
  }
  s.finish();
  check(spec.components >= 1, "model.components must be >= 1");
  check(spec.layers >= 1, "model.layers must be >= 1");
  check(spec.inducing >= 1, "model.inducing must be >= 1");
  check(spec.processes.empty() ||
            static_cast<int>(spec.processes.size()) == spec.components,
        "model.processes must list one entry per component");
  check(spec.kernel_variance > 0.0 && spec.lengthscale > 0.0 &&
            spec.alpha_variance > 0.0 && spec.alpha_lengthscale > 0.0 &&
            spec.init_noise > 0.0 && spec.deep_s_scale > 0.0,
        "model: variances, lengthscales, init_noise and deep_s_scale must be positive");
  check(spec.inducing_jitter >= 0.0 && spec.belief_init_std >= 0.0 &&
            spec.mean_init_std >= 0.0,
        "model: jitter and init spreads must be non-negative");
}

void read_train(const json &j, TrainConfig &config) {
  Section s(j, "train");
  s.read("steps", config.steps);
  s.read("batch_size", config.batch_size);
  s.read("learning_rate", config.learning_rate);
  s.read("adam_beta1", config.adam_beta1);
  s.read("adam_beta2", config.adam_beta2);
  s.read("adam_eps", config.adam_eps);
  s.read("temperature_start", config.temperature_start);
  s.read("temperature_end", config.temperature_end);
  s.read("anneal_fraction", config.anneal_fraction);
  s.read("n_mc_train", config.n_mc_train);
  s.read("trace_every", config.trace_every);
  if (s.find("seed") != nullptr) {
    throw ConfigError("train.seed: set the top-level seed instead");
  }
  s.finish();
  try {
    config.validate();
  } catch (const std::exception &e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
}

void read_eval(const json &j, EvalConfig &eval) {
  Section s(j, "eval");
  std::string space = eval.space == PredictionSpace::latent ? "latent" : "observation";
  s.read("space", space);
  eval.space = space_from_string(space, "eval.space");
  s.read("n_mc", eval.n_mc);
  if (const json *g = s.find("grid")) {
    Section grid(*g, "eval.grid");
    grid.read("low", eval.grid.low);
    grid.read("high", eval.grid.high);
    grid.read_count("points", eval.grid.points);
    grid.finish();
  }
  s.finish();
  check(eval.n_mc >= 1, "eval.n_mc must be >= 1");
  check(eval.grid.points >= 2 && eval.grid.high > eval.grid.low,
        "eval.grid: need points >= 2 and high > low");
}

void read_data(const json &j, ExperimentConfig &config) {
  Section s(j, "data");
  switch (config.experiment) {
  case ExperimentKind::choicenet:
    s.read("outlier_rate", config.choicenet.outlier_rate);
    s.read_count("n", config.choicenet.n);
    s.read("signal_noise_std", config.choicenet.signal_noise_std);
    s.read_count("test_points", config.choicenet_test_points);
    check(config.choicenet.outlier_rate >= 0.0 && config.choicenet.outlier_rate <= 1.0,
          "data.outlier_rate must lie in [0, 1]");
    check(config.choicenet.n >= 1 && config.choicenet_test_points >= 2,
          "data: n must be >= 1 and test_points >= 2");
    check(config.choicenet.signal_noise_std >= 0.0, "data.signal_noise_std must be >= 0");
    break;
  case ExperimentKind::semibimodal: {
    s.read_count("n", config.semibimodal_n);
    std::string sampling = to_string(config.semibimodal_sampling);
    s.read("sampling", sampling);
    try {
      config.semibimodal_sampling = semibimodal_sampling_from_string(sampling);
    } catch (const std::exception &e) {
      throw ConfigError(std::string("data.sampling: ") + e.what());
    }
    s.read("noise_std", config.semibimodal_noise_std);
    check(config.semibimodal_n >= 3, "data.n must be >= 3");
    check(config.semibimodal_noise_std >= 0.0, "data.noise_std must be >= 0");
    break;
  }
  case ExperimentKind::cartpole: {
    auto &c = config.cartpole;
    s.read_count("train_default", c.train_default);
    s.read_count("train_short", c.train_short);
    s.read_count("test_default", c.test_default);
    s.read_count("test_short", c.test_short);
    s.read("actions_per_trajectory", c.sampling.actions_per_trajectory);
    s.read("steps_per_action", c.sampling.steps_per_action);
    s.read("angle_noise_std", c.sampling.angle_noise_std);
    s.read("start_range", c.sampling.start_range);
    const auto per = static_cast<Eigen::Index>(c.sampling.actions_per_trajectory);
    check(per >= 1 && c.sampling.steps_per_action >= 1,
          "data: trajectories need at least one action and step");
    for (const Eigen::Index count : {c.train_default, c.train_short, c.test_default, c.test_short}) {
      check(count >= 0 && count % per == 0,
            "data: cart-pole point counts must be non-negative multiples of "
            "actions_per_trajectory");
    }
    check(c.train_default + c.train_short > 0, "data: no cart-pole training points");
    check(c.test_default + c.test_short > 0, "data: no cart-pole test points");
    check(c.sampling.angle_noise_std >= 0.0 && c.sampling.start_range >= 0.0,
          "data: noise and start range must be >= 0");
    break;
  }
  case ExperimentKind::custom_csv: {
    std::string train;
    std::string test;
    s.read("train", train);
    s.read("test", test);
    check(!train.empty(), "data.train: a training CSV is required");
    config.train_csv = train;
    config.test_csv = test;
    break;
  }
  }
  s.finish();
}

} // namespace

ExperimentKind experiment_kind_from_string(const std::string &s) {
  if (s == "choicenet") {
    return ExperimentKind::choicenet;
  }
  if (s == "semibimodal") {
    return ExperimentKind::semibimodal;
  }
  if (s == "cartpole") {
    return ExperimentKind::cartpole;
  }
  if (s == "custom_csv") {
    return ExperimentKind::custom_csv;
  }
  throw ConfigError("unknown experiment '" + s + "'");
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
  case ExperimentKind::choicenet:
    return "choicenet";
  case ExperimentKind::semibimodal:
    return "semibimodal";
  case ExperimentKind::cartpole:
    return "cartpole";
  case ExperimentKind::custom_csv:
    return "custom_csv";
  }
  return "custom_csv";
}

ProcessSpec process_from_json(const json &j) {
  Section s(j, "model.processes[]");
  ProcessSpec process;
  std::string kernel = to_string(process.kernel);
  s.read("kernel", kernel);
  process.kernel = kernel_from_config(kernel, s.name("kernel"));
  s.read("noise_prior", process.noise_prior);
  double init = 0.0;
  if (s.find("init_noise") != nullptr) {
    s.read("init_noise", init);
    check(init > 0.0, "model.processes[].init_noise must be positive");
    process.init_noise = init;
  }
  s.finish();
  return process;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
  case ExperimentKind::choicenet:
    c.model.components = 2;
    c.model.inducing = 25;
    c.model.processes = {{KernelFamily::squared_exponential, true, 0.2},
                         {KernelFamily::white_noise, false, 2.0}};
    c.train.steps = 40000;
    c.eval.space = PredictionSpace::latent;
    c.eval.grid = {-3.0, 3.0, 1000};
    break;
  case ExperimentKind::semibimodal:
    c.model.components = 4;
    c.model.inducing = 25;
    c.eval.space = PredictionSpace::latent;
    c.eval.grid = {-10.0, 10.0, 500};
    break;
  case ExperimentKind::cartpole:
    c.model.components = 2;
    c.model.inducing = 100;
    c.eval.space = PredictionSpace::observation;
    break;
  case ExperimentKind::custom_csv:
    break;
  }
  return c;
}

ExperimentConfig parse_config(const json &doc, const std::string &default_name) {
  Section s(doc, "config");
  std::string experiment;
  s.read("experiment", experiment);
  check(!experiment.empty(), "config.experiment is required");
  ExperimentConfig config = default_config(experiment_kind_from_string(experiment));

  std::string output = (std::filesystem::path("runs") / default_name).string();
  s.read("output", output);
  check(!output.empty(), "config.output must not be empty");
  config.output = output;
  s.read("seed", config.seed);
  s.read("baselines", config.baselines);
  if (const json *m = s.find("model")) {
    read_model(*m, config.model);
  }
  if (const json *t = s.find("train")) {
    read_train(*t, config.train);
  }
  if (const json *e = s.find("eval")) {
    read_eval(*e, config.eval);
  }
  if (const json *d = s.find("data")) {
    read_data(*d, config);
  } else if (config.experiment == ExperimentKind::custom_csv) {
    throw ConfigError("data.train: a training CSV is required");
  }
  s.finish();
  config.train.seed = config.seed;
  return config;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception &e) {
    throw ConfigError(e.what());
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.stem().string());
}

} // namespace dagp
