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

#include "dagp/assignment.hpp"
#include "dagp/dataset.hpp"
#include "dagp/gp_layer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dagp {

/// Log-normal prior on a likelihood noise standard deviation.
struct NoisePrior {
  double log_mean = -2.995732273553991; // log 0.05
  double log_std = 0.5;

  double log_density(double sigma) const;
  double d_log_density(double sigma) const;
};

/// K function processes (each an L-layer stack, L = 1 is shallow), K
/// assignment processes over the input space, K likelihood noise levels and
/// the per-point assignment beliefs.
struct DagpModel {
  std::vector<DeepStack> functions;
  std::vector<SvgpLayer> alphas;
  Vector raw_noises;
  AssignmentBelief belief;
  std::vector<std::optional<NoisePrior>> noise_priors;
  std::uint64_t seed = 0;

  Eigen::Index num_components() const {
    return static_cast<Eigen::Index>(functions.size());
  }
  Eigen::Index input_dim() const;
  Eigen::Index num_points() const { return belief.num_points(); }
  Vector noises() const;
  void validate() const;
};

struct ElboEstimate {
  double value = 0.0;
  double data_term = 0.0;
  double assign_term = 0.0;
  double kl_f = 0.0;
  double kl_alpha = 0.0;
  double log_prior = 0.0;
};

/// sum_k a_k log N(y | f_k, sigma_k^2).
double likelihood_term(double y, const Vector &f_samples, const Vector &a_weights,
                       const Vector &noises);

/// All standard normal and Gumbel draws one bound estimate consumes. Holding
/// them fixed makes the estimate a deterministic function of the parameters.
struct ElboNoise {
  // [mc sample][component][layer], each |B| x D_out(layer).
  std::vector<std::vector<std::vector<DenseMatrix>>> function_noise;
  // [mc sample], |B| x K.
  std::vector<DenseMatrix> alpha_noise;
  std::vector<DenseMatrix> gumbel;

  int num_samples() const { return static_cast<int>(gumbel.size()); }
};

ElboNoise draw_elbo_noise(const DagpModel &model, Eigen::Index batch_size,
                          int n_mc, RngStream &rng);

/// Bound estimate for fixed noise. When `grad` is non-null it must have the
/// shape of `model` (see zeros_like) and receives d value / d parameter.
ElboEstimate evaluate_elbo(const DagpModel &model, const Dataset &data,
                           std::span<const Eigen::Index> batch,
                           double temperature, const ElboNoise &noise,
                           DagpModel *grad);

ElboEstimate elbo_minibatch(const DagpModel &model, const Dataset &data,
                            std::span<const Eigen::Index> batch, int n_mc,
                            double temperature, RngStream &rng);

enum class PredictionSpace { latent, observation };

/// Per test point a mixture of K Gaussians; all matrices are N* x K.
struct PredictiveMixture {
  DenseMatrix weights;
  DenseMatrix means;
  DenseMatrix variances;

  Eigen::Index size() const { return weights.rows(); }
};

PredictiveMixture predict_mixture(const DagpModel &model,
                                  const DenseMatrix &x_star, int n_mc,
                                  RngStream &rng, PredictionSpace space);

/// log sum_k w_k N(y | mean_k, var_k) at test point `row`.
double log_predictive_density(const PredictiveMixture &mix, Eigen::Index row,
                              double y_star);
/// Log density of component `k` alone at test point `row`.
double component_log_density(const PredictiveMixture &mix, Eigen::Index row,
                             Eigen::Index k, double y_star);

/// Summed softmax(belief) mass per component.
Vector assignment_mass(const DagpModel &model);

// ---------------------------------------------------------------------------
// Construction.

struct ProcessSpec {
  KernelFamily kernel = KernelFamily::squared_exponential;
  bool noise_prior = false;
  std::optional<double> init_noise; // overrides ModelSpec::init_noise
};

struct ModelSpec {
  int components = 2;
  int layers = 1;
  int inducing = 25;
  std::vector<ProcessSpec> processes; // empty: all squared exponential
  double kernel_variance = 1.0;
  double lengthscale = 1.0;
  double alpha_variance = 1.0;
  double alpha_lengthscale = 1.0;
  // Per input dimension; when set they replace the scalar initial values.
  std::vector<double> lengthscales;
  std::vector<double> alpha_lengthscales;
  double init_noise = 0.1;
  double inducing_jitter = 1e-6;
  double belief_init_std = 0.0;
  // Output layers of the function processes draw q(u) means from the prior
  // scaled by this factor, so components start as distinct functions.
  double mean_init_std = 0.0;
  bool whiten = true;
  // Stacks with more than one layer start with q(u) covariance shrunk by
  // this factor squared relative to the prior.
  double deep_s_scale = 1e-3;
  NoisePrior noise_prior;
};

/// Inducing inputs are a random subset of the training inputs, drawn
/// separately for every GP. Every q(u) starts at the prior of u (shrunk for
/// deep stacks) with zero-mean residual.
DagpModel make_model(const ModelSpec &spec, const Dataset &data,
                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Parameter traversal. Visits every unconstrained parameter in a fixed order;
// s_factor visits its lower triangle only.

template <class Model, class Fn> void for_each_parameter(Model &model, Fn &&fn);

std::size_t parameter_count(const DagpModel &model);
std::vector<std::string> parameter_names(const DagpModel &model);
Vector flatten_parameters(const DagpModel &model);
void unflatten_parameters(DagpModel &model, const Vector &values);
/// Same structure as `model`, every parameter zero.
DagpModel zeros_like(const DagpModel &model);
void add_gradient(SvgpLayer &target, const LayerGradient &grad);

// ---------------------------------------------------------------------------

template <class Layer, class Fn>
void visit_layer(Layer &layer, const std::string &prefix, Fn &&fn) {
  const std::string variance_name = prefix + ".kernel.raw_variance";
  const std::string lengthscale_name = prefix + ".kernel.raw_lengthscales";
  const std::string z_name = prefix + ".z";
  const std::string m_name = prefix + ".m";
  const std::string s_name = prefix + ".s_factor";
  fn(variance_name, 0, 0, layer.kernel.raw_variance);
  for (Eigen::Index i = 0; i < layer.kernel.raw_lengthscales.size(); ++i) {
    fn(lengthscale_name, i, 0, layer.kernel.raw_lengthscales[i]);
  }
  for (Eigen::Index j = 0; j < layer.z.cols(); ++j) {
    for (Eigen::Index i = 0; i < layer.z.rows(); ++i) {
      fn(z_name, i, j, layer.z(i, j));
    }
  }
  for (Eigen::Index j = 0; j < layer.m.cols(); ++j) {
    for (Eigen::Index i = 0; i < layer.m.rows(); ++i) {
      fn(m_name, i, j, layer.m(i, j));
    }
  }
  for (Eigen::Index j = 0; j < layer.s_factor_raw.cols(); ++j) {
    for (Eigen::Index i = j; i < layer.s_factor_raw.rows(); ++i) {
      fn(s_name, i, j, layer.s_factor_raw(i, j));
    }
  }
}

template <class Model, class Fn> void for_each_parameter(Model &model, Fn &&fn) {
  for (std::size_t k = 0; k < model.functions.size(); ++k) {
    for (std::size_t l = 0; l < model.functions[k].size(); ++l) {
      visit_layer(model.functions[k][l],
                  "f" + std::to_string(k) + ".layer" + std::to_string(l), fn);
    }
  }
  for (std::size_t k = 0; k < model.alphas.size(); ++k) {
    visit_layer(model.alphas[k], "alpha" + std::to_string(k), fn);
  }
  const std::string noise_name = "raw_noise";
  for (Eigen::Index k = 0; k < model.raw_noises.size(); ++k) {
    fn(noise_name, k, 0, model.raw_noises[k]);
  }
  const std::string belief_name = "belief.logits";
  auto &logits = model.belief.logits;
  for (Eigen::Index k = 0; k < logits.cols(); ++k) {
    for (Eigen::Index n = 0; n < logits.rows(); ++n) {
      fn(belief_name, n, k, logits(n, k));
    }
  }
}

} // namespace dagp
