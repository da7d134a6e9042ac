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

// Acceptance checks. Each criterion prints one PASS/FAIL line with the
// values it measured; the exit status is nonzero when any selected criterion
// fails.

#include "dagp/runner.hpp"
#include "fd_check.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace dagp;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string &what) {
    notes.push_back(std::string(ok ? "ok " : "FAILED ") + what);
    pass = pass && ok;
  }
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Paths {
  fs::path configs;
  fs::path work;
};

ExperimentConfig config_at(const Paths &paths, const std::string &name) {
  ExperimentConfig config = load_config(paths.configs / (name + ".json"));
  config.output = paths.work / name;
  return config;
}

// ---------------------------------------------------------------------------

Dataset wavy_data(Eigen::Index n, std::uint64_t seed) {
  RngStream rng(seed, 99);
  Dataset data;
  data.x.resize(n, 1);
  data.y.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.x(i, 0) = -2.0 + 4.0 * rng.uniform();
    data.y(i, 0) = (i % 2 == 0 ? std::sin(2.0 * data.x(i, 0)) : -0.5) + 0.1 * rng.normal();
  }
  return data;
}

std::vector<Eigen::Index> all_rows(Eigen::Index n) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return rows;
}

void perturb(DagpModel &model, std::uint64_t seed, double amount) {
  RngStream rng(seed, 7);
  for_each_parameter(model, [&](const std::string &, Eigen::Index, Eigen::Index,
                                double &v) { v += amount * rng.normal(); });
}

// Worst relative error between the pathwise gradient and central differences
// with all Monte Carlo and Gumbel noise held fixed.
testing::GradientReport gradient_report(const DagpModel &model, const Dataset &data,
                                        double temperature, int n_mc,
                                        double &max_abs_diff) {
  const std::vector<Eigen::Index> batch = all_rows(data.size());
  RngStream rng(11, 0);
  const ElboNoise noise = draw_elbo_noise(model, data.size(), n_mc, rng);
  DagpModel grad = zeros_like(model);
  evaluate_elbo(model, data, batch, temperature, noise, &grad);
  const Vector numeric = testing::central_differences(
      flatten_parameters(model),
      [&](const Vector &p) {
        DagpModel probe = model;
        unflatten_parameters(probe, p);
        return evaluate_elbo(probe, data, batch, temperature, noise, nullptr).value;
      },
      1e-5);
  const Vector analytic = flatten_parameters(grad);
  max_abs_diff = (analytic - numeric).cwiseAbs().maxCoeff();
  // Differences below 1e-9 sit at the finite-difference round-off level.
  return testing::compare_gradients(analytic, numeric, 1e-9);
}

Outcome gradient_correctness(const Paths &) {
  Outcome out;
  Stopwatch clock;
  {
    const Dataset data = wavy_data(6, 5);
    ModelSpec spec;
    spec.inducing = 3;
    spec.processes = {{KernelFamily::squared_exponential, true},
                      {KernelFamily::squared_exponential, false}};
    DagpModel model = make_model(spec, data, 7);
    perturb(model, 8, 0.15);
    double diff = 0.0;
    const auto r = gradient_report(model, data, 0.5, 2, diff);
    out.require(r.worst < 1e-4, "shallow K=2 N=6 M=3: " + std::to_string(r.checked) +
                                    " parameters, worst relative error " + fmt(r.worst) +
                                    " (max abs difference " + fmt(diff) + ")");
  }
  {
    const Dataset data = wavy_data(6, 7);
    ModelSpec spec;
    spec.inducing = 3;
    spec.layers = 2;
    DagpModel model = make_model(spec, data, 9);
    for (auto &stack : model.functions) {
      for (auto &layer : stack) {
        layer.set_s_factor(0.3 * DenseMatrix::Identity(3, 3));
      }
    }
    perturb(model, 10, 0.1);
    double diff = 0.0;
    const auto r = gradient_report(model, data, 0.7, 2, diff);
    out.require(r.worst < 1e-4, "deep K=2 L=2: " + std::to_string(r.checked) +
                                    " parameters, worst relative error " + fmt(r.worst) +
                                    " (max abs difference " + fmt(diff) + ")");
  }
  out.require(clock.seconds() < 60.0, "runtime " + fmt(clock.seconds()) + " s < 60 s");
  return out;
}

// ---------------------------------------------------------------------------

Outcome choicenet_reproduction(const Paths &paths) {
  Outcome out;
  for (const std::string rate : {"00", "20", "40"}) {
    Stopwatch clock;
    const ExperimentConfig config = config_at(paths, "choicenet_" + rate);
    const json m = run_experiment(config);
    const double seconds = clock.seconds();
    const double rmse = m.at("rmse").get<double>();
    const double ll = m.at("mll").get<double>();
    const std::string tag = "rate 0." + rate.substr(0, 1) + ": ";
    out.require(rmse <= 0.03, tag + "rmse " + fmt(rmse) + " <= 0.03");
    if (rate != "40") {
      out.require(ll >= 1.0, tag + "mll " + fmt(ll) + " >= 1.0");
    } else {
      out.notes.push_back("info " + tag + "mll " + fmt(ll));
    }
    out.require(seconds <= 900.0, tag + "runtime " + fmt(seconds) + " s <= 900 s");
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> as_vector(const json &j) { return j.get<std::vector<double>>(); }

Outcome multimodal_structure(const Paths &paths) {
  Outcome out;
  Stopwatch clock;
  const ExperimentConfig config = config_at(paths, "semibimodal");
  const json m = run_experiment(config);
  const double seconds = clock.seconds();

  const std::vector<double> mass = as_vector(m.at("assignment_mass"));
  const double n = m.at("training").at("n").get<double>();
  const double smallest = *std::min_element(mass.begin(), mass.end());
  out.require(smallest < 0.02 * n, "(a) smallest component mass " + fmt(smallest) +
                                       " < " + fmt(0.02 * n));

  std::vector<double> outside = as_vector(m.at("assignment_weights").at("bimodal_region"));
  std::sort(outside.rbegin(), outside.rend());
  const double ratio = outside[0] / outside[1];
  out.require(ratio >= 1.6 && ratio <= 2.6,
              "(b) dominant weights " + fmt(outside[0]) + " / " + fmt(outside[1]) +
                  " = " + fmt(ratio) + " within [1.6, 2.6]");

  const std::vector<double> inside = as_vector(m.at("assignment_weights").at("trimodal_region"));
  const auto held = std::count_if(inside.begin(), inside.end(), [](double w) { return w >= 0.2; });
  std::string weights;
  for (double w : inside) {
    weights += " " + fmt(w);
  }
  out.require(held >= 3, "(c) components with weight >= 0.2 on [0.5, 4.5]: " +
                             std::to_string(held) + " (weights" + weights + ")");
  out.require(seconds <= 900.0, "runtime " + fmt(seconds) + " s <= 900 s");
  return out;
}

// ---------------------------------------------------------------------------

double split_mll(const json &j) { return j.at("mll").get<double>(); }

Outcome cartpole_ordering(const Paths &paths) {
  Outcome out;
  Stopwatch clock;
  ExperimentConfig config = config_at(paths, "cartpole");
  config.baselines = true;
  const json m = run_experiment(config);
  const double seconds = clock.seconds();
  const json &cp = m.at("cartpole");
  const json &baselines = cp.at("baselines");

  const double dagp_mixed = split_mll(m.at("splits").at("test_mixed"));
  const double gpr_mixed = split_mll(baselines.at("gpr_mixed").at("test_mixed"));
  out.require(dagp_mixed > gpr_mixed,
              "(a) mixed-test mll " + fmt(dagp_mixed) + " > GPR-mixed " + fmt(gpr_mixed));

  std::vector<std::string> matched;
  for (const json &sub : cp.at("sub_models")) {
    const std::string own = sub.at("matched_system").get<std::string>();
    const std::string other = own == "default" ? "short" : "default";
    matched.push_back(own);
    const double on_own = split_mll(sub.at("test").at(own));
    const double on_other = split_mll(sub.at("test").at(other));
    const std::string tag = "component " + std::to_string(sub.at("component").get<int>());
    out.require(on_own - on_other > 0.5, "(b) " + tag + " on " + own + " " + fmt(on_own) +
                                             " vs " + other + " " + fmt(on_other) +
                                             ", gap > 0.5");
    const double specialist = split_mll(baselines.at("gpr_" + own).at("test_" + own));
    out.require(specialist > on_own - 0.15, "(c) GPR-" + own + " " + fmt(specialist) +
                                                " > " + tag + " " + fmt(on_own) + " - 0.15");
  }
  out.require(matched.size() == 2 && matched[0] != matched[1],
              "(b) the two components are matched to different systems");
  out.require(seconds <= 2700.0, "runtime " + fmt(seconds) + " s <= 2700 s");
  return out;
}

// ---------------------------------------------------------------------------

SvgpLayer random_layer(RngStream &rng, Eigen::Index m, Eigen::Index d) {
  SvgpLayer layer = SvgpLayer::make(KernelSpec::squared_exponential(d, 1.2, 0.9),
                                    MeanFunction::zero, sample_std_normal(rng, m, d), 1, 1.0);
  layer.kernel.raw_lengthscales += 0.3 * sample_std_normal(rng, d);
  layer.m += 0.5 * sample_std_normal(rng, m, 1);
  DenseMatrix lower = 0.3 * sample_std_normal(rng, m, m);
  lower = lower.triangularView<Eigen::StrictlyLower>();
  lower.diagonal() = 0.4 + 0.5 * sample_std_normal(rng, m).array().abs();
  layer.set_s_factor(lower);
  return layer;
}

std::string read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// The trace ends with a wall-clock column, which naturally differs.
std::string without_last_column(const std::string &csv) {
  std::istringstream in(csv);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    out += line.substr(0, line.rfind(',')) + '\n';
  }
  return out;
}

Outcome property_suite(const Paths &paths) {
  Outcome out;
  Stopwatch clock;

  {
    RngStream rng(6, 0);
    double worst = 1e300;
    for (int trial = 0; trial < 200; ++trial) {
      worst = std::min(worst, kl_to_prior(random_layer(rng, 1 + trial % 8, 1 + trial % 3)));
    }
    out.require(worst >= -1e-12, "KL >= 0 over 200 random layers (min " + fmt(worst) + ")");

    double largest = 0.0;
    for (bool whitened : {false, true}) {
      for (int trial = 0; trial < 20; ++trial) {
        SvgpLayer layer = random_layer(rng, 2 + trial % 5, 1 + trial % 2);
        layer.whitened = whitened;
        layer.m.setZero();
        layer.inducing_jitter = 0.0;
        const InducingPrior prior = prepare_inducing(layer);
        layer.set_s_factor(whitened ? DenseMatrix::Identity(layer.num_inducing(),
                                                            layer.num_inducing())
                                    : DenseMatrix(prior.chol.lower));
        largest = std::max(largest, std::abs(kl_to_prior(layer)));
      }
    }
    out.require(largest < 1e-9, "KL of q = p is zero (max |KL| " + fmt(largest) + ")");
  }

  {
    RngStream rng(3, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index k = 2 + trial % 3;
      PredictiveMixture mix;
      mix.weights = sample_std_normal(rng, 1, k).array().exp();
      mix.weights /= mix.weights.sum();
      mix.means = 3.0 * sample_std_normal(rng, 1, k);
      mix.variances = (0.01 + 2.0 * sample_std_normal(rng, 1, k).array().abs()).matrix();
      const double sd = std::sqrt(mix.variances.maxCoeff());
      const double lo = mix.means.minCoeff() - 10.0 * sd;
      const double hi = mix.means.maxCoeff() + 10.0 * sd;
      const int n = 20000;
      const double h = (hi - lo) / n;
      double total = 0.0;
      for (int i = 0; i <= n; ++i) {
        total += (i == 0 || i == n ? 0.5 : 1.0) *
                 std::exp(log_predictive_density(mix, 0, lo + i * h));
      }
      worst = std::max(worst, std::abs(total * h - 1.0));
    }
    out.require(worst < 1e-3, "mixture density quadrature error " + fmt(worst) + " < 1e-3");
  }

  {
    RngStream rng(2, 0);
    Vector probs(3);
    probs << 0.5, 0.3, 0.2;
    const Vector logits = probs.array().log();
    const int n = 100000;
    Vector counts = Vector::Zero(3);
    for (int i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      sample_concrete(logits, 0.01, rng).weights.maxCoeff(&best);
      counts[best] += 1.0;
    }
    double worst_sigma = 0.0;
    for (Eigen::Index k = 0; k < 3; ++k) {
      const double sd = std::sqrt(probs[k] * (1.0 - probs[k]) / n);
      worst_sigma = std::max(worst_sigma, std::abs(counts[k] / n - probs[k]) / sd);
    }
    out.require(worst_sigma < 3.0, "concrete argmax frequencies at temperature 0.01: worst " +
                                       fmt(worst_sigma) + " sigma < 3");
  }

  {
    RngStream rng(4, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index d = 1 + trial % 3;
      SvgpLayer layer = random_layer(rng, 5, d);
      layer.whitened = trial % 2 == 1;
      const double sigma2 = layer.kernel.variance();
      const double ell = layer.kernel.lengthscales().maxCoeff();
      DenseMatrix x = DenseMatrix::Zero(1, d);
      x(0, 0) = layer.z.rowwise().norm().maxCoeff() + 10.5 * ell;
      const MarginalGaussians marg = marginal(layer, x);
      worst = std::max({worst, std::abs(marg.mean(0, 0)) / std::sqrt(sigma2),
                        std::abs(marg.variance(0, 0) - sigma2) / sigma2});
    }
    out.require(worst < 1e-4, "far from the inducing inputs q(f) reverts to the prior (error " +
                                  fmt(worst) + ")");
  }

  {
    ExperimentConfig config = default_config(ExperimentKind::choicenet);
    config.seed = 5;
    config.choicenet.n = 200;
    config.choicenet.outlier_rate = 0.3;
    config.choicenet_test_points = 50;
    config.model.inducing = 8;
    config.train.steps = 300;
    config.train.batch_size = 32;
    config.eval.n_mc = 10;
    config.eval.grid.points = 20;
    for (const char *name : {"repro_a", "repro_b"}) {
      config.output = paths.work / name;
      run_experiment(config);
    }
    bool same = true;
    for (const char *file : {"metrics.json", "model.json", "predictions.csv"}) {
      const std::string a = read_file(paths.work / "repro_a" / file);
      same = same && !a.empty() && a == read_file(paths.work / "repro_b" / file);
    }
    out.require(same, "two identical seeded runs write byte-identical metrics, model and predictions");
    const std::string trace = without_last_column(read_file(paths.work / "repro_a" / "trace.csv"));
    out.require(!trace.empty() &&
                    trace == without_last_column(read_file(paths.work / "repro_b" / "trace.csv")),
                "their traces agree bitwise apart from wall-clock seconds");
  }

  out.require(clock.seconds() < 300.0, "runtime " + fmt(clock.seconds()) + " s < 300 s");
  return out;
}

// ---------------------------------------------------------------------------

Dataset flat_data(Eigen::Index n) {
  RngStream rng(17, 0);
  Dataset data;
  data.x = 2.0 * sample_std_normal(rng, n, 1);
  data.y = sample_std_normal(rng, n, 1);
  return data;
}

// Median wall time of one bound evaluation with its gradient.
double time_bound(const DagpModel &model, const Dataset &data, Eigen::Index batch_size) {
  const std::vector<Eigen::Index> batch = all_rows(batch_size);
  RngStream rng(11, 0);
  const ElboNoise noise = draw_elbo_noise(model, batch_size, 1, rng);
  std::vector<double> times;
  for (int rep = 0; rep < 15; ++rep) {
    DagpModel grad = zeros_like(model);
    Stopwatch clock;
    evaluate_elbo(model, data, batch, 0.5, noise, &grad);
    times.push_back(clock.seconds());
  }
  std::nth_element(times.begin(), times.begin() + 7, times.end());
  return times[7];
}

Outcome complexity_check(const Paths &) {
  Outcome out;
  const Dataset data = flat_data(4096);
  ModelSpec spec;
  spec.inducing = 25;

  spec.components = 2;
  const DagpModel k2 = make_model(spec, data, 1);
  spec.components = 4;
  const DagpModel k4 = make_model(spec, data, 1);
  const double t2 = time_bound(k2, data, 1024);
  const double t4 = time_bound(k4, data, 1024);
  const double k_ratio = t4 / t2;
  out.require(k_ratio >= 1.5 && k_ratio <= 3.0,
              "K 2 -> 4 at |B| = 1024: time ratio " + fmt(k_ratio) + " within [1.5, 3.0]");

  const double b1 = time_bound(k2, data, 1024);
  const double b2 = time_bound(k2, data, 2048);
  const double b_ratio = b2 / b1;
  out.require(b_ratio >= 1.5 && b_ratio <= 3.0,
              "|B| 1024 -> 2048 at K = 2, M = 25: time ratio " + fmt(b_ratio) +
                  " within [1.5, 3.0]");
  return out;
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char *title;
  std::function<Outcome(const Paths &)> check;
};

const std::vector<Criterion> &criteria() {
  static const std::vector<Criterion> list = {
      {1, "gradient correctness", gradient_correctness},
      {2, "ChoiceNet noise separation", choicenet_reproduction},
      {3, "multimodal structure recovery", multimodal_structure},
      {4, "cart-pole ordering", cartpole_ordering},
      {5, "property suite", property_suite},
      {6, "complexity", complexity_check},
  };
  return list;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> selected;
  Paths paths;
  app.add_option("--criterion,-c", selected, "Criteria to run (default: all)")
      ->check(CLI::Range(1, 6));
  app.add_option("--configs", paths.configs, "Directory of experiment configs")->required();
  app.add_option("--work", paths.work, "Scratch directory for run outputs")->required();
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (const Criterion &c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    Outcome outcome;
    try {
      outcome = c.check(paths);
    } catch (const std::exception &e) {
      outcome.require(false, std::string("exception: ") + e.what());
    }
    for (const std::string &note : outcome.notes) {
      std::cout << "  [" << c.id << "] " << note << '\n';
    }
    std::cout << "criterion " << c.id << " (" << c.title << "): "
              << (outcome.pass ? "PASS" : "FAIL") << std::endl;
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
