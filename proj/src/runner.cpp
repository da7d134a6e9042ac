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

#include "dagp/runner.hpp"

#include "dagp/io.hpp"

#include <filesystem>
#include <numbers>
#include <sstream>

namespace dagp {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEvalStream = 0x6576616cULL;

std::string space_name(PredictionSpace space) {
  return space == PredictionSpace::latent ? "latent" : "observation";
}

json vector_json(const Vector &v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v[i]);
  }
  return out;
}

Eigen::Index quietest_component(const DagpModel &model) {
  Eigen::Index k = 0;
  model.noises().minCoeff(&k);
  return k;
}

DenseMatrix linear_grid(double low, double high, Eigen::Index points) {
  DenseMatrix g(points, 1);
  for (Eigen::Index i = 0; i < points; ++i) {
    g(i, 0) = low + (high - low) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return g;
}

// Midpoint grid, which leaves out both ends of the interval.
DenseMatrix open_grid(double low, double high, Eigen::Index points) {
  DenseMatrix g(points, 1);
  for (Eigen::Index i = 0; i < points; ++i) {
    g(i, 0) = low + (high - low) * (static_cast<double>(i) + 0.5) / static_cast<double>(points);
  }
  return g;
}

Vector mean_weights(const DagpModel &model, const DenseMatrix &x, int n_mc) {
  RngStream rng(model.seed, kEvalStream);
  const DenseMatrix w = predict_assignment_weights(model.alphas, x, rng, n_mc);
  return w.colwise().mean().transpose();
}

std::string predictions_csv(const DagpModel &model, const DenseMatrix &x,
                            const EvalSettings &settings) {
  RngStream rng(model.seed, kEvalStream);
  const PredictiveMixture mix = predict_mixture(model, x, settings.n_mc, rng, settings.space);
  std::string out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    out += "x_" + std::to_string(j + 1) + ",";
  }
  for (Eigen::Index k = 0; k < mix.weights.cols(); ++k) {
    const std::string s = std::to_string(k + 1);
    out += "weight_" + s + ",mean_" + s + ",variance_" + s;
    out += k + 1 < mix.weights.cols() ? "," : "\n";
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      out += format_double(x(i, j)) + ",";
    }
    for (Eigen::Index k = 0; k < mix.weights.cols(); ++k) {
      out += format_double(mix.weights(i, k)) + "," + format_double(mix.means(i, k)) + "," +
             format_double(mix.variances(i, k));
      out += k + 1 < mix.weights.cols() ? "," : "\n";
    }
  }
  return out;
}

std::string trace_csv(const TrainResult &result) {
  std::ostringstream out;
  out << "step,elbo,data_term,assign_term,kl_f,kl_alpha,log_prior,temperature,seconds\n";
  for (const TraceRow &r : result.trace) {
    out << r.step << ',' << format_double(r.elbo.value) << ','
        << format_double(r.elbo.data_term) << ',' << format_double(r.elbo.assign_term) << ','
        << format_double(r.elbo.kl_f) << ',' << format_double(r.elbo.kl_alpha) << ','
        << format_double(r.elbo.log_prior) << ',' << format_double(r.temperature) << ','
        << format_double(r.seconds) << '\n';
  }
  return out.str();
}

json run_meta(const ExperimentConfig &config, const std::string &split) {
  json meta = {{"experiment", to_string(config.experiment)},
               {"seed", config.seed},
               {"split", split}};
  switch (config.experiment) {
  case ExperimentKind::choicenet:
    meta["outlier_rate"] = config.choicenet.outlier_rate;
    meta["n"] = config.choicenet.n;
    meta["signal_noise_std"] = config.choicenet.signal_noise_std;
    break;
  case ExperimentKind::semibimodal:
    meta["n"] = config.semibimodal_n;
    meta["sampling"] = to_string(config.semibimodal_sampling);
    meta["noise_std"] = config.semibimodal_noise_std;
    break;
  case ExperimentKind::cartpole:
    meta["actions_per_trajectory"] = config.cartpole.sampling.actions_per_trajectory;
    meta["steps_per_action"] = config.cartpole.sampling.steps_per_action;
    meta["angle_noise_std"] = config.cartpole.sampling.angle_noise_std;
    meta["start_range"] = config.cartpole.sampling.start_range;
    break;
  case ExperimentKind::custom_csv:
    meta["train"] = config.train_csv.string();
    meta["test"] = config.test_csv.string();
    break;
  }
  return meta;
}

Dataset cartpole_split(const ExperimentConfig &config, Eigen::Index n_default,
                       Eigen::Index n_short, std::uint64_t stream) {
  const RngStream base(config.seed, stream);
  const CartpoleSampling &sampling = config.cartpole.sampling;
  std::optional<Dataset> out;
  if (n_default > 0) {
    out = gen_cartpole(CartpoleConfig::default_system(), n_default,
                       base.derive(0).next_u64(), sampling, 0);
  }
  if (n_short > 0) {
    Dataset s = gen_cartpole(CartpoleConfig::short_pole(), n_short,
                             base.derive(1).next_u64(), sampling, 1);
    out = out ? concatenate(*out, s) : std::move(s);
  }
  return *out;
}

Dataset rows_with_label(const Dataset &data, int label) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    if ((*data.labels)[static_cast<std::size_t>(i)] == label) {
      rows.push_back(i);
    }
  }
  return data.subset(rows);
}

json cartpole_analysis(const ExperimentConfig &config, const DagpModel &model,
                       const ExperimentData &data, const EvalSettings &settings,
                       const LogFn &log) {
  const char *systems[2] = {"default", "short"};
  auto find_test = [&](const std::string &name) -> const Dataset * {
    for (const auto &[split, d] : data.tests) {
      if (split == name) {
        return &d;
      }
    }
    return nullptr;
  };

  json sub_models = json::array();
  const auto k_count = model.num_components();
  for (Eigen::Index k = 0; k < k_count; ++k) {
    json entry = {{"component", k}};
    double mass[2] = {0.0, 0.0};
    for (Eigen::Index n = 0; n < data.train.size(); ++n) {
      mass[(*data.train.labels)[static_cast<std::size_t>(n)]] += model.belief.probabilities(n)[k];
    }
    entry["mass"] = {{"default", mass[0]}, {"short", mass[1]}};
    entry["matched_system"] = mass[0] >= mass[1] ? "default" : "short";
    for (const char *system : systems) {
      if (const Dataset *test = find_test(std::string("test_") + system)) {
        entry["test"][system] = evaluate_split(model, *test, settings, k)["component"];
      }
    }
    sub_models.push_back(std::move(entry));
  }
  json out = {{"sub_models", std::move(sub_models)}};
  if (!config.baselines) {
    return out;
  }

  json baselines = json::object();
  auto fit = [&](const std::string &name, const Dataset &train) {
    if (log) {
      log("training baseline " + name + " on " + std::to_string(train.size()) + " points");
    }
    const DagpModel gpr = baseline_gpr(train, config.model, config.train, config.seed);
    json entry = json::object();
    for (const auto &[split, test] : data.tests) {
      entry[split] = evaluate_split(gpr, test, settings);
    }
    baselines[name] = std::move(entry);
  };
  fit("gpr_mixed", data.train);
  for (int label = 0; label < 2; ++label) {
    Dataset only = rows_with_label(data.train, label);
    if (only.size() > 0) {
      fit(std::string("gpr_") + systems[label], only);
    }
  }
  out["baselines"] = std::move(baselines);
  return out;
}

} // namespace

json EvalSettings::to_json() const {
  return {{"space", space_name(space)}, {"n_mc", n_mc}, {"signal_component", signal_component}};
}

EvalSettings EvalSettings::from_json(const json &j) {
  EvalSettings s;
  const std::string space = j.at("space").get<std::string>();
  if (space != "latent" && space != "observation") {
    throw FormatError("eval settings: unknown space '" + space + "'");
  }
  s.space = space == "latent" ? PredictionSpace::latent : PredictionSpace::observation;
  s.n_mc = j.at("n_mc").get<int>();
  s.signal_component = j.at("signal_component").get<bool>();
  return s;
}

EvalSettings eval_settings(const ExperimentConfig &config) {
  EvalSettings s;
  s.space = config.eval.space;
  s.n_mc = config.eval.n_mc;
  s.signal_component = config.experiment == ExperimentKind::choicenet;
  return s;
}

json evaluate_split(const DagpModel &model, const Dataset &data,
                    const EvalSettings &settings, std::optional<Eigen::Index> component) {
  data.validate();
  require_dims(data.input_dim() == model.input_dim(),
               "evaluate: data has " + std::to_string(data.input_dim()) +
                   " input columns, the model expects " + std::to_string(model.input_dim()));
  if (component && (*component < 0 || *component >= model.num_components())) {
    throw std::out_of_range("evaluate: component " + std::to_string(*component) +
                            " outside [0, " + std::to_string(model.num_components()) + ")");
  }
  RngStream rng(model.seed, kEvalStream);
  const PredictiveMixture mix = predict_mixture(model, data.x, settings.n_mc, rng, settings.space);
  const Vector y = data.y.col(0);
  const Vector truth = data.noiseless ? *data.noiseless : y;

  json out;
  out["n"] = data.size();
  const MeanWithError joint = mll(mix, y);
  out["mll"] = joint.mean;
  out["mll_stderr"] = joint.standard_error;
  if (settings.signal_component) {
    const Eigen::Index k = quietest_component(model);
    out["signal_component"] = k;
    out["rmse"] = rmse(mix.means.col(k), truth);
  } else {
    out["rmse"] = rmse(argmax_component_mean(mix), truth);
  }
  if (component) {
    const MeanWithError single = mll(mix, y, *component);
    out["component"] = {{"index", *component},
                        {"mll", single.mean},
                        {"mll_stderr", single.standard_error},
                        {"rmse", rmse(mix.means.col(*component), truth)}};
  }
  return out;
}

ExperimentData build_data(const ExperimentConfig &config) {
  ExperimentData out;
  switch (config.experiment) {
  case ExperimentKind::choicenet:
    out.train = gen_choicenet(config.choicenet, config.seed);
    out.tests.emplace_back("test",
                           choicenet_test_grid(config.choicenet, config.choicenet_test_points));
    break;
  case ExperimentKind::semibimodal:
    out.train = gen_semibimodal(config.semibimodal_n, config.seed, config.semibimodal_sampling,
                                config.semibimodal_noise_std);
    break;
  case ExperimentKind::cartpole: {
    const auto &c = config.cartpole;
    out.train = cartpole_split(config, c.train_default, c.train_short, 0x747261696eULL);
    const Dataset test = cartpole_split(config, c.test_default, c.test_short, 0x74657374ULL);
    out.tests.emplace_back("test_mixed", test);
    if (c.test_default > 0) {
      out.tests.emplace_back("test_default", rows_with_label(test, 0));
    }
    if (c.test_short > 0) {
      out.tests.emplace_back("test_short", rows_with_label(test, 1));
    }
    break;
  }
  case ExperimentKind::custom_csv:
    out.train = load_dataset(config.train_csv);
    if (!config.test_csv.empty()) {
      out.tests.emplace_back("test", load_dataset(config.test_csv));
    }
    break;
  }
  return out;
}

void write_split(const fs::path &dir, const std::string &name, const Dataset &data,
                 const json &meta) {
  const fs::path csv = dir / (name + ".csv");
  save_dataset(csv, data);
  write_file_atomic(metadata_path(csv), meta.dump(1) + "\n");
}

json run_experiment(const ExperimentConfig &config, const LogFn &log) {
  const ExperimentData data = build_data(config);
  const EvalSettings settings = eval_settings(config);
  fs::create_directories(config.output / "data");
  write_split(config.output / "data", "train", data.train, run_meta(config, "train"));
  for (const auto &[name, test] : data.tests) {
    write_split(config.output / "data", name, test, run_meta(config, name));
  }

  DagpModel model = make_model(config.model, data.train, config.seed);
  if (log) {
    log("training " + to_string(config.experiment) + " on " +
        std::to_string(data.train.size()) + " points, " +
        std::to_string(parameter_count(model)) + " parameters");
  }
  const TrainResult result = train(model, data.train, config.train, [&](const TraceRow &r) {
    if (log) {
      std::ostringstream line;
      line << "step " << r.step << " elbo " << r.elbo.value << " temperature "
           << r.temperature << " (" << r.seconds << " s)";
      log(line.str());
    }
  });

  json metrics;
  metrics["experiment"] = to_string(config.experiment);
  metrics["seed"] = config.seed;
  metrics["training"] = {{"n", data.train.size()},
                         {"steps", config.train.steps},
                         {"final_elbo", result.trace.empty() ? 0.0 : result.trace.back().elbo.value}};
  metrics["noise_std"] = vector_json(model.noises());
  metrics["assignment_mass"] = vector_json(assignment_mass(model));
  metrics["eval"] = settings.to_json();
  json splits;
  splits["train"] = evaluate_split(model, data.train, settings);
  for (const auto &[name, test] : data.tests) {
    splits[name] = evaluate_split(model, test, settings);
  }
  metrics["splits"] = splits;

  switch (config.experiment) {
  case ExperimentKind::choicenet: {
    const json &test = splits["test"];
    metrics["rmse"] = test["rmse"];
    metrics["mll"] = test["mll"];
    metrics["mll_stderr"] = test["mll_stderr"];
    // The same grid scored under the signal process alone and, with the
    // likelihood noise added, in observation space.
    const Dataset &grid = data.tests.front().second;
    const Eigen::Index signal = test["signal_component"].get<Eigen::Index>();
    const json alone = evaluate_split(model, grid, settings, signal)["component"];
    metrics["signal_mll"] = alone["mll"];
    metrics["signal_mll_stderr"] = alone["mll_stderr"];
    EvalSettings observed = settings;
    observed.space = PredictionSpace::observation;
    const json obs = evaluate_split(model, grid, observed);
    metrics["observation_mll"] = obs["mll"];
    metrics["observation_mll_stderr"] = obs["mll_stderr"];
    break;
  }
  case ExperimentKind::semibimodal: {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    DenseMatrix bimodal(200, 1);
    bimodal.topRows(100) = open_grid(-two_pi, 0.0, 100);
    bimodal.bottomRows(100) = open_grid(5.0, two_pi, 100);
    metrics["assignment_weights"] = {
        {"bimodal_region", vector_json(mean_weights(model, bimodal, settings.n_mc))},
        {"trimodal_region",
         vector_json(mean_weights(model, open_grid(0.5, 4.5, 100), settings.n_mc))}};
    break;
  }
  case ExperimentKind::cartpole:
    metrics["cartpole"] = cartpole_analysis(config, model, data, settings, log);
    break;
  case ExperimentKind::custom_csv:
    break;
  }

  const DenseMatrix grid_x =
      data.train.input_dim() == 1
          ? linear_grid(config.eval.grid.low, config.eval.grid.high, config.eval.grid.points)
          : (data.tests.empty() ? data.train.x : data.tests.front().second.x);
  write_file_atomic(config.output / "predictions.csv", predictions_csv(model, grid_x, settings));
  write_file_atomic(config.output / "trace.csv", trace_csv(result));
  save_model(config.output / "model.json", model,
             {{"experiment", to_string(config.experiment)}, {"eval", settings.to_json()}});
  write_file_atomic(config.output / "metrics.json", metrics.dump(2) + "\n");
  return metrics;
}

} // namespace dagp
