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

#include "dagp/model.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace dagp {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double gaussian_log_density(double y, double mean, double variance) {
  const double r = y - mean;
  return -kHalfLog2Pi - 0.5 * std::log(variance) - 0.5 * r * r / variance;
}

enum StreamTag : std::uint64_t {
  kFunctionNoise = 1,
  kAlphaNoise = 2,
  kGumbelNoise = 3,
  kPredictWeights = 4,
  kPredictDeep = 5,
};

std::vector<Eigen::Index> random_subset(Eigen::Index population,
                                        Eigen::Index count, RngStream &rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(population));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto j =
        i + static_cast<Eigen::Index>(rng.next_u64() %
                                      static_cast<std::uint64_t>(population - i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(count));
  return idx;
}

DenseMatrix rows_of(const DenseMatrix &x, const std::vector<Eigen::Index> &rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  }
  return out;
}

// q(u) covariance set to scale^2 times the prior covariance of u.
void start_near_prior(SvgpLayer &layer, double scale) {
  if (!layer.whitened) {
    layer.set_s_factor(scale * prepare_inducing(layer).chol.lower);
  }
}

// Sets the initial lengthscales one input dimension at a time.
void set_lengthscales(KernelSpec &kernel, const std::vector<double> &values) {
  if (values.empty() || kernel.family != KernelFamily::squared_exponential) {
    return;
  }
  require(static_cast<Eigen::Index>(values.size()) == kernel.raw_lengthscales.size(),
          "make_model: one initial lengthscale per input dimension expected");
  for (std::size_t j = 0; j < values.size(); ++j) {
    require(values[j] > 0.0, "make_model: lengthscales must be positive");
    kernel.raw_lengthscales[static_cast<Eigen::Index>(j)] = inverse_positive_transform(values[j]);
  }
}

} // namespace

double NoisePrior::log_density(double sigma) const {
  const double z = (std::log(sigma) - log_mean) / log_std;
  return -kHalfLog2Pi - std::log(log_std) - std::log(sigma) - 0.5 * z * z;
}

double NoisePrior::d_log_density(double sigma) const {
  return -1.0 / sigma -
         (std::log(sigma) - log_mean) / (log_std * log_std * sigma);
}

Eigen::Index DagpModel::input_dim() const {
  return functions.empty() || functions.front().empty()
             ? 0
             : functions.front().front().input_dim();
}

Vector DagpModel::noises() const {
  return raw_noises.unaryExpr([](double r) { return positive_transform(r); });
}

void DagpModel::validate() const {
  const Eigen::Index k = num_components();
  require(k >= 1, "DagpModel: needs at least one process");
  require_dims(static_cast<Eigen::Index>(alphas.size()) == k,
               "DagpModel: assignment process count differs from K");
  require_dims(raw_noises.size() == k, "DagpModel: noise count differs from K");
  require_dims(belief.num_components() == k,
               "DagpModel: belief columns differ from K");
  require_dims(static_cast<Eigen::Index>(noise_priors.size()) == k,
               "DagpModel: noise prior count differs from K");
  const Eigen::Index d = input_dim();
  for (const auto &stack : functions) {
    validate_stack(stack);
    require_dims(stack.front().input_dim() == d,
                 "DagpModel: function processes disagree on input dimension");
    require_dims(stack.back().output_dim() == 1,
                 "DagpModel: function processes must have scalar output");
  }
  for (const auto &alpha : alphas) {
    alpha.validate();
    require_dims(alpha.input_dim() == d && alpha.output_dim() == 1,
                 "DagpModel: assignment processes must map inputs to scalars");
  }
}

double likelihood_term(double y, const Vector &f_samples, const Vector &a_weights,
                       const Vector &noises) {
  require_dims(f_samples.size() == a_weights.size() &&
                   noises.size() == a_weights.size(),
               "likelihood_term: length mismatch");
  double total = 0.0;
  for (Eigen::Index k = 0; k < a_weights.size(); ++k) {
    if (a_weights[k] != 0.0) {
      total += a_weights[k] *
               gaussian_log_density(y, f_samples[k], noises[k] * noises[k]);
    }
  }
  return total;
}

ElboNoise draw_elbo_noise(const DagpModel &model, Eigen::Index batch_size,
                          int n_mc, RngStream &rng) {
  require(n_mc >= 1, "draw_elbo_noise: n_mc must be >= 1");
  const RngStream call = rng.derive(rng.next_u64());
  RngStream f_rng = call.derive(kFunctionNoise);
  RngStream a_rng = call.derive(kAlphaNoise);
  RngStream g_rng = call.derive(kGumbelNoise);
  const Eigen::Index k_count = model.num_components();
  ElboNoise noise;
  for (int s = 0; s < n_mc; ++s) {
    std::vector<std::vector<DenseMatrix>> per_process;
    for (const auto &stack : model.functions) {
      per_process.push_back(draw_stack_noise(stack, batch_size, f_rng));
    }
    noise.function_noise.push_back(std::move(per_process));
    noise.alpha_noise.push_back(sample_std_normal(a_rng, batch_size, k_count));
    DenseMatrix g(batch_size, k_count);
    for (Eigen::Index i = 0; i < batch_size; ++i) {
      g.row(i) = sample_gumbel(g_rng, k_count).transpose();
    }
    noise.gumbel.push_back(std::move(g));
  }
  return noise;
}

ElboEstimate evaluate_elbo(const DagpModel &model, const Dataset &data,
                           std::span<const Eigen::Index> batch,
                           double temperature, const ElboNoise &noise,
                           DagpModel *grad) {
  const Eigen::Index k_count = model.num_components();
  const auto b_count = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index n_total = data.size();
  const int n_mc = noise.num_samples();
  require(b_count > 0, "elbo: empty batch");
  require(n_mc >= 1, "elbo: no Monte Carlo samples");
  require_dims(model.num_points() == n_total,
               "elbo: belief rows differ from dataset size");
  require_dims(data.input_dim() == model.input_dim(),
               "elbo: dataset dimension differs from model");

  DenseMatrix xb(b_count, data.input_dim());
  Vector yb(b_count);
  for (Eigen::Index i = 0; i < b_count; ++i) {
    const Eigen::Index n = batch[static_cast<std::size_t>(i)];
    require(n >= 0 && n < n_total, "elbo: batch index out of range");
    xb.row(i) = data.x.row(n);
    yb[i] = data.y(n, 0);
  }
  const double scale = static_cast<double>(n_total) /
                       static_cast<double>(b_count) / static_cast<double>(n_mc);
  const Vector sigma = model.noises();
  const Vector sigma2 = sigma.cwiseProduct(sigma);

  std::vector<std::vector<InducingPrior>> f_priors(model.functions.size());
  for (std::size_t k = 0; k < model.functions.size(); ++k) {
    for (const auto &layer : model.functions[k]) {
      f_priors[k].push_back(prepare_inducing(layer));
    }
  }
  std::vector<InducingPrior> a_priors;
  std::vector<LayerPass> a_passes;
  DenseMatrix alpha_mean(b_count, k_count);
  DenseMatrix alpha_sd(b_count, k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto &alpha = model.alphas[static_cast<std::size_t>(k)];
    a_priors.push_back(prepare_inducing(alpha));
    a_passes.push_back(forward(alpha, a_priors.back(), xb));
    alpha_mean.col(k) = a_passes.back().out.mean.col(0);
    alpha_sd.col(k) = a_passes.back().out.variance.col(0).cwiseSqrt();
  }

  const bool want_grad = grad != nullptr;
  std::vector<std::vector<LayerAdjoint>> f_adj;
  std::vector<LayerAdjoint> a_adj;
  if (want_grad) {
    for (const auto &stack : model.functions) {
      f_adj.emplace_back();
      for (const auto &layer : stack) {
        f_adj.back().emplace_back(layer);
      }
    }
    for (const auto &alpha : model.alphas) {
      a_adj.emplace_back(alpha);
    }
  }
  DenseMatrix d_alpha_mean = DenseMatrix::Zero(b_count, k_count);
  DenseMatrix d_alpha_var = DenseMatrix::Zero(b_count, k_count);
  Vector d_sigma = Vector::Zero(k_count);
  DenseMatrix d_logits = DenseMatrix::Zero(b_count, k_count);

  ElboEstimate est;
  for (int s = 0; s < n_mc; ++s) {
    std::vector<StackPass> f_passes;
    DenseMatrix f_hat(b_count, k_count);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      f_passes.push_back(forward_stack(model.functions[ku], f_priors[ku], xb,
                                       noise.function_noise[static_cast<std::size_t>(s)][ku]));
      f_hat.col(k) = f_passes.back().output.col(0);
    }
    const DenseMatrix &eps = noise.alpha_noise[static_cast<std::size_t>(s)];
    const DenseMatrix &gumbel = noise.gumbel[static_cast<std::size_t>(s)];
    DenseMatrix d_f_hat = DenseMatrix::Zero(b_count, k_count);

    Vector log_lik(k_count);
    for (Eigen::Index i = 0; i < b_count; ++i) {
      const Eigen::Index n = batch[static_cast<std::size_t>(i)];
      const ConcreteSample a = concrete_from_noise(
          model.belief.logits.row(n).transpose(), gumbel.row(i).transpose(),
          temperature);
      const Vector alpha = (alpha_mean.row(i) +
                            alpha_sd.row(i).cwiseProduct(eps.row(i)))
                               .transpose();
      const Vector log_assign = log_softmax(alpha);
      for (Eigen::Index k = 0; k < k_count; ++k) {
        log_lik[k] = gaussian_log_density(yb[i], f_hat(i, k), sigma2[k]);
      }
      est.data_term += scale * a.weights.dot(log_lik);
      est.assign_term += scale * a.weights.dot(log_assign);

      if (!want_grad) {
        continue;
      }
      d_logits.row(i) +=
          concrete_backward(a, scale * (log_lik + log_assign)).transpose();
      const Vector p = softmax(alpha);
      const double mass = a.weights.sum();
      for (Eigen::Index k = 0; k < k_count; ++k) {
        const double r = yb[i] - f_hat(i, k);
        const double w = scale * a.weights[k];
        d_f_hat(i, k) = w * r / sigma2[k];
        d_sigma[k] += w * (r * r / (sigma2[k] * sigma[k]) - 1.0 / sigma[k]);
        const double d_alpha = scale * (a.weights[k] - mass * p[k]);
        d_alpha_mean(i, k) += d_alpha;
        d_alpha_var(i, k) += d_alpha * eps(i, k) / (2.0 * alpha_sd(i, k));
      }
    }

    if (want_grad) {
      for (Eigen::Index k = 0; k < k_count; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        backward_stack(model.functions[ku], f_priors[ku], f_passes[ku],
                       noise.function_noise[static_cast<std::size_t>(s)][ku],
                       d_f_hat.col(k), f_adj[ku]);
      }
    }
  }

  for (std::size_t k = 0; k < model.functions.size(); ++k) {
    for (std::size_t l = 0; l < model.functions[k].size(); ++l) {
      est.kl_f += kl_to_prior(model.functions[k][l], f_priors[k][l]);
      if (want_grad) {
        kl_backward(model.functions[k][l], f_priors[k][l], -1.0, f_adj[k][l]);
      }
    }
  }
  for (std::size_t k = 0; k < model.alphas.size(); ++k) {
    est.kl_alpha += kl_to_prior(model.alphas[k], a_priors[k]);
    if (want_grad) {
      kl_backward(model.alphas[k], a_priors[k], -1.0, a_adj[k]);
    }
  }
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto &prior = model.noise_priors[static_cast<std::size_t>(k)];
    if (prior) {
      est.log_prior += prior->log_density(sigma[k]);
      d_sigma[k] += prior->d_log_density(sigma[k]);
    }
  }
  est.value =
      est.data_term + est.assign_term - est.kl_f - est.kl_alpha + est.log_prior;

  if (!want_grad) {
    return est;
  }
  for (std::size_t k = 0; k < model.functions.size(); ++k) {
    for (std::size_t l = 0; l < model.functions[k].size(); ++l) {
      add_gradient(grad->functions[k][l],
                   finalize(model.functions[k][l], f_priors[k][l],
                            std::move(f_adj[k][l])));
    }
  }
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    backward(model.alphas[ku], a_priors[ku], a_passes[ku], d_alpha_mean.col(k),
             d_alpha_var.col(k), a_adj[ku], nullptr);
    add_gradient(grad->alphas[ku],
                 finalize(model.alphas[ku], a_priors[ku], std::move(a_adj[ku])));
    grad->raw_noises[k] +=
        d_sigma[k] * positive_transform_derivative(model.raw_noises[k]);
  }
  for (Eigen::Index i = 0; i < b_count; ++i) {
    grad->belief.logits.row(batch[static_cast<std::size_t>(i)]) +=
        d_logits.row(i);
  }
  return est;
}

ElboEstimate elbo_minibatch(const DagpModel &model, const Dataset &data,
                            std::span<const Eigen::Index> batch, int n_mc,
                            double temperature, RngStream &rng) {
  const ElboNoise noise = draw_elbo_noise(
      model, static_cast<Eigen::Index>(batch.size()), n_mc, rng);
  return evaluate_elbo(model, data, batch, temperature, noise, nullptr);
}

PredictiveMixture predict_mixture(const DagpModel &model,
                                  const DenseMatrix &x_star, int n_mc,
                                  RngStream &rng, PredictionSpace space) {
  require(n_mc >= 1, "predict_mixture: n_mc must be >= 1");
  const RngStream call = rng.derive(rng.next_u64());
  RngStream w_rng = call.derive(kPredictWeights);
  RngStream deep_rng = call.derive(kPredictDeep);
  const Eigen::Index k_count = model.num_components();
  const Eigen::Index n = x_star.rows();

  PredictiveMixture mix;
  mix.weights = predict_assignment_weights(model.alphas, x_star, w_rng, n_mc);
  mix.means.resize(n, k_count);
  mix.variances.resize(n, k_count);
  const Vector sigma = model.noises();
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const DeepStack &stack = model.functions[static_cast<std::size_t>(k)];
    if (stack.size() == 1) {
      const MarginalGaussians marg = marginal(stack.front(), x_star);
      mix.means.col(k) = marg.mean.col(0);
      mix.variances.col(k) = marg.variance.col(0);
    } else {
      // Sample the hidden layers, then combine the last layer's Gaussian
      // marginals by the law of total variance.
      const DeepStack hidden(stack.begin(), stack.end() - 1);
      std::vector<InducingPrior> priors;
      for (const auto &layer : hidden) {
        priors.push_back(prepare_inducing(layer));
      }
      const InducingPrior last_prior = prepare_inducing(stack.back());
      Vector sum_mean = Vector::Zero(n);
      Vector sum_sq = Vector::Zero(n);
      Vector sum_var = Vector::Zero(n);
      for (int s = 0; s < n_mc; ++s) {
        const DenseMatrix h =
            forward_stack(hidden, priors, x_star,
                          draw_stack_noise(hidden, n, deep_rng))
                .output;
        const LayerPass last = forward(stack.back(), last_prior, h);
        sum_mean += last.out.mean.col(0);
        sum_sq += last.out.mean.col(0).cwiseAbs2();
        sum_var += last.out.variance.col(0);
      }
      const double inv = 1.0 / static_cast<double>(n_mc);
      const Vector mean = sum_mean * inv;
      mix.means.col(k) = mean;
      mix.variances.col(k) =
          (sum_var * inv + (sum_sq * inv - mean.cwiseAbs2()).cwiseMax(0.0))
              .cwiseMax(kVarianceFloor);
    }
    if (space == PredictionSpace::observation) {
      mix.variances.col(k).array() += sigma[k] * sigma[k];
    }
  }
  return mix;
}

double log_predictive_density(const PredictiveMixture &mix, Eigen::Index row,
                              double y_star) {
  const Eigen::Index k_count = mix.weights.cols();
  Vector terms(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const double w = mix.weights(row, k);
    terms[k] = w > 0.0 ? std::log(w) + gaussian_log_density(
                                           y_star, mix.means(row, k),
                                           mix.variances(row, k))
                       : -std::numeric_limits<double>::infinity();
  }
  const double max = terms.maxCoeff();
  if (!std::isfinite(max)) {
    return max;
  }
  return max + std::log((terms.array() - max).exp().sum());
}

double component_log_density(const PredictiveMixture &mix, Eigen::Index row,
                             Eigen::Index k, double y_star) {
  return gaussian_log_density(y_star, mix.means(row, k), mix.variances(row, k));
}

Vector assignment_mass(const DagpModel &model) {
  Vector mass = Vector::Zero(model.num_components());
  for (Eigen::Index n = 0; n < model.num_points(); ++n) {
    mass += model.belief.probabilities(n);
  }
  return mass;
}

DagpModel make_model(const ModelSpec &spec, const Dataset &data,
                     std::uint64_t seed) {
  data.validate();
  require(spec.components >= 1, "make_model: components must be >= 1");
  require(spec.layers >= 1, "make_model: layers must be >= 1");
  require(spec.inducing >= 1, "make_model: inducing must be >= 1");
  require(spec.processes.empty() ||
              static_cast<int>(spec.processes.size()) == spec.components,
          "make_model: process list length differs from components");
  RngStream rng(seed, 0x6d6f64656cULL);
  const Eigen::Index n = data.size();
  const Eigen::Index d = data.input_dim();
  const Eigen::Index m = std::min<Eigen::Index>(spec.inducing, n);
  const auto k_count = static_cast<Eigen::Index>(spec.components);

  DagpModel model;
  model.seed = seed;
  for (int k = 0; k < spec.components; ++k) {
    const ProcessSpec process = spec.processes.empty()
                                    ? ProcessSpec{}
                                    : spec.processes[static_cast<std::size_t>(k)];
    DeepStack stack;
    const double s_scale = spec.layers > 1 ? spec.deep_s_scale : 1.0;
    for (int l = 0; l < spec.layers; ++l) {
      const bool last = l + 1 == spec.layers;
      DenseMatrix z = rows_of(data.x, random_subset(n, m, rng));
      KernelSpec kernel =
          last && process.kernel == KernelFamily::white_noise
              ? KernelSpec::white_noise(spec.kernel_variance)
              : KernelSpec::squared_exponential(d, spec.kernel_variance,
                                                spec.lengthscale);
      set_lengthscales(kernel, spec.lengthscales);
      SvgpLayer layer = SvgpLayer::make(
          std::move(kernel), last ? MeanFunction::zero : MeanFunction::identity,
          std::move(z), last ? 1 : d, s_scale, spec.whiten);
      layer.inducing_jitter = spec.inducing_jitter;
      start_near_prior(layer, s_scale);
      if (last && spec.mean_init_std > 0.0 &&
          process.kernel != KernelFamily::white_noise) {
        RngStream mean_rng = rng.derive(0x6d65616eULL + static_cast<std::uint64_t>(k));
        const DenseMatrix draw =
            spec.mean_init_std * sample_std_normal(mean_rng, layer.m.rows(), layer.m.cols());
        layer.m = layer.whitened ? draw : DenseMatrix(prepare_inducing(layer).chol.lower * draw);
      }
      stack.push_back(std::move(layer));
    }
    model.functions.push_back(std::move(stack));
    model.noise_priors.push_back(process.noise_prior
                                     ? std::optional<NoisePrior>(spec.noise_prior)
                                     : std::nullopt);
  }
  for (int k = 0; k < spec.components; ++k) {
    DenseMatrix z = rows_of(data.x, random_subset(n, m, rng));
    KernelSpec kernel =
        KernelSpec::squared_exponential(d, spec.alpha_variance, spec.alpha_lengthscale);
    set_lengthscales(kernel, spec.alpha_lengthscales);
    SvgpLayer alpha = SvgpLayer::make(std::move(kernel), MeanFunction::zero,
                                      std::move(z), 1, 1.0, spec.whiten);
    alpha.inducing_jitter = spec.inducing_jitter;
    start_near_prior(alpha, 1.0);
    model.alphas.push_back(std::move(alpha));
  }
  model.raw_noises.resize(k_count);
  for (int k = 0; k < spec.components; ++k) {
    const auto &init = spec.processes.empty()
                           ? std::nullopt
                           : spec.processes[static_cast<std::size_t>(k)].init_noise;
    require(init.value_or(spec.init_noise) > 0.0,
            "make_model: init_noise must be positive");
    model.raw_noises[k] = inverse_positive_transform(init.value_or(spec.init_noise));
  }
  model.belief.logits = DenseMatrix::Zero(n, k_count);
  if (spec.belief_init_std > 0.0) {
    RngStream belief_rng = rng.derive(0x62656c696566ULL);
    model.belief.logits =
        spec.belief_init_std * sample_std_normal(belief_rng, n, k_count);
  }
  model.validate();
  return model;
}

std::size_t parameter_count(const DagpModel &model) {
  std::size_t count = 0;
  for_each_parameter(model,
                     [&](const std::string &, Eigen::Index, Eigen::Index,
                         const double &) { ++count; });
  return count;
}

std::vector<std::string> parameter_names(const DagpModel &model) {
  std::vector<std::string> names;
  for_each_parameter(model, [&](const std::string &block,
                                        Eigen::Index i, Eigen::Index j,
                                        const double &) {
    names.push_back(block + "[" + std::to_string(i) + "," + std::to_string(j) +
                    "]");
  });
  return names;
}

Vector flatten_parameters(const DagpModel &model) {
  Vector out(static_cast<Eigen::Index>(parameter_count(model)));
  Eigen::Index pos = 0;
  for_each_parameter(model,
                     [&](const std::string &, Eigen::Index, Eigen::Index,
                         const double &v) { out[pos++] = v; });
  return out;
}

void unflatten_parameters(DagpModel &model, const Vector &values) {
  require_dims(static_cast<std::size_t>(values.size()) == parameter_count(model),
               "unflatten_parameters: length mismatch");
  Eigen::Index pos = 0;
  for_each_parameter(model, [&](const std::string &, Eigen::Index,
                                Eigen::Index, double &v) { v = values[pos++]; });
}

DagpModel zeros_like(const DagpModel &model) {
  DagpModel out = model;
  for_each_parameter(out, [](const std::string &, Eigen::Index, Eigen::Index,
                             double &v) { v = 0.0; });
  return out;
}

void add_gradient(SvgpLayer &target, const LayerGradient &grad) {
  target.kernel.raw_variance += grad.kernel.raw_variance;
  target.kernel.raw_lengthscales += grad.kernel.raw_lengthscales;
  target.z += grad.z;
  target.m += grad.m;
  target.s_factor_raw += grad.s_factor_raw.triangularView<Eigen::Lower>().toDenseMatrix();
}

} // namespace dagp
