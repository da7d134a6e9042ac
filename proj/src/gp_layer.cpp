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

#include "dagp/gp_layer.hpp"

#include <cmath>

namespace dagp {

SvgpLayer SvgpLayer::make(KernelSpec kernel, MeanFunction mean_fn,
                          DenseMatrix z, Eigen::Index output_dim,
                          double s_scale, bool whitened) {
  SvgpLayer layer;
  layer.kernel = std::move(kernel);
  layer.mean_fn = mean_fn;
  layer.whitened = whitened;
  layer.z = std::move(z);
  if (mean_fn == MeanFunction::zero || whitened) {
    layer.m = DenseMatrix::Zero(layer.z.rows(), output_dim);
  } else {
    layer.m = layer.mean_at(layer.z);
  }
  layer.set_s_factor(s_scale *
                     DenseMatrix::Identity(layer.z.rows(), layer.z.rows()));
  layer.validate();
  return layer;
}

DenseMatrix SvgpLayer::s_factor() const {
  DenseMatrix lower = s_factor_raw.triangularView<Eigen::StrictlyLower>();
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    lower(i, i) = positive_transform(s_factor_raw(i, i));
  }
  return lower;
}

void SvgpLayer::set_s_factor(const DenseMatrix &lower) {
  s_factor_raw = lower.triangularView<Eigen::StrictlyLower>();
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    s_factor_raw(i, i) = inverse_positive_transform(lower(i, i));
  }
}

DenseMatrix SvgpLayer::mean_at(const DenseMatrix &x) const {
  if (mean_fn == MeanFunction::identity) {
    return x;
  }
  return DenseMatrix::Zero(x.rows(), m.cols());
}

void SvgpLayer::validate() const {
  require(z.rows() >= 1, "SvgpLayer: needs at least one inducing point");
  require_dims(m.rows() == z.rows(), "SvgpLayer: m rows differ from z rows");
  require_dims(s_factor_raw.rows() == z.rows() &&
                   s_factor_raw.cols() == z.rows(),
               "SvgpLayer: s_factor must be M x M");
  if (kernel.family == KernelFamily::squared_exponential) {
    require_dims(kernel.raw_lengthscales.size() == z.cols(),
                 "SvgpLayer: lengthscale count differs from input dimension");
  }
  if (mean_fn == MeanFunction::identity) {
    require_dims(z.cols() == m.cols(),
                 "SvgpLayer: identity mean needs equal input/output dimension");
  }
}

void validate_stack(const DeepStack &stack) {
  require(!stack.empty(), "DeepStack: no layers");
  for (std::size_t l = 0; l < stack.size(); ++l) {
    stack[l].validate();
    if (l > 0) {
      require_dims(stack[l].input_dim() == stack[l - 1].output_dim(),
                   "DeepStack: layer " + std::to_string(l) +
                       " input dimension does not match previous output");
    }
  }
}

InducingPrior prepare_inducing(const SvgpLayer &layer) {
  InducingPrior prior;
  prior.kzz_kernel = gram(layer.kernel, layer.z);
  DenseMatrix kzz = prior.kzz_kernel;
  kzz.diagonal().array() += layer.inducing_jitter * layer.kernel.variance();
  prior.chol = cholesky_with_jitter(kzz);
  prior.s_lower = layer.s_factor();
  prior.s = prior.s_lower * prior.s_lower.transpose();
  prior.delta = layer.whitened ? layer.m : layer.m - layer.mean_at(layer.z);
  return prior;
}

LayerPass forward(const SvgpLayer &layer, const InducingPrior &prior,
                  const DenseMatrix &x) {
  require_dims(x.cols() == layer.input_dim(),
               "marginal: inputs have " + std::to_string(x.cols()) +
                   " columns, layer expects " +
                   std::to_string(layer.input_dim()));
  LayerPass pass;
  pass.x = x;
  pass.kzx = gram(layer.kernel, layer.z, x);
  const Vector kxx = gram_diag(layer.kernel, x);
  Vector explained;
  if (layer.whitened) {
    pass.proj = tri_solve(prior.chol, pass.kzx, TriSide::lower);
    explained = pass.proj.cwiseAbs2().colwise().sum().transpose();
  } else {
    pass.proj = chol_solve(prior.chol, pass.kzx);
    explained = pass.kzx.cwiseProduct(pass.proj).colwise().sum().transpose();
  }
  const DenseMatrix sp = prior.s * pass.proj;
  pass.unclamped_variance =
      kxx - explained + pass.proj.cwiseProduct(sp).colwise().sum().transpose();

  pass.out.mean = layer.mean_at(x) + pass.proj.transpose() * prior.delta;
  const Vector var = pass.unclamped_variance.cwiseMax(kVarianceFloor);
  pass.out.variance = var.replicate(1, layer.output_dim());
  return pass;
}

MarginalGaussians marginal(const SvgpLayer &layer, const DenseMatrix &x) {
  return forward(layer, prepare_inducing(layer), x).out;
}

double kl_to_prior(const SvgpLayer &layer, const InducingPrior &prior) {
  const double dims = static_cast<double>(layer.output_dim());
  const double m = static_cast<double>(layer.num_inducing());
  if (layer.whitened) {
    const double logdet_s = 2.0 * prior.s_lower.diagonal().array().log().sum();
    return 0.5 * (dims * prior.s_lower.squaredNorm() + prior.delta.squaredNorm() -
                  dims * m - dims * logdet_s);
  }
  // tr(K^{-1} S) = ||L_K^{-1} L_S||_F^2.
  const double trace_term =
      tri_solve(prior.chol, prior.s_lower, TriSide::lower).squaredNorm();
  const double mahalanobis =
      tri_solve(prior.chol, prior.delta, TriSide::lower).squaredNorm();
  const double logdet_k = log_det_from_factor(prior.chol);
  const double logdet_s =
      2.0 * prior.s_lower.diagonal().array().log().sum();
  return 0.5 * (dims * trace_term + mahalanobis - dims * m +
                dims * logdet_k - dims * logdet_s);
}

double kl_to_prior(const SvgpLayer &layer) {
  return kl_to_prior(layer, prepare_inducing(layer));
}

DenseMatrix reparametrize(const MarginalGaussians &marg,
                          const DenseMatrix &noise) {
  require_dims(noise.rows() == marg.mean.rows() &&
                   noise.cols() == marg.mean.cols(),
               "reparametrize: noise shape differs from marginal");
  return marg.mean + marg.variance.cwiseSqrt().cwiseProduct(noise);
}

DenseMatrix sample(const SvgpLayer &layer, const DenseMatrix &x,
                   RngStream &rng) {
  const MarginalGaussians marg = marginal(layer, x);
  return reparametrize(marg, sample_std_normal(rng, x.rows(), layer.output_dim()));
}

std::vector<DenseMatrix> draw_stack_noise(const DeepStack &stack,
                                          Eigen::Index n, RngStream &rng) {
  std::vector<DenseMatrix> noise;
  noise.reserve(stack.size());
  for (const auto &layer : stack) {
    noise.push_back(sample_std_normal(rng, n, layer.output_dim()));
  }
  return noise;
}

DenseMatrix sample_deep(const DeepStack &stack, const DenseMatrix &x,
                        RngStream &rng) {
  validate_stack(stack);
  std::vector<InducingPrior> priors;
  for (const auto &layer : stack) {
    priors.push_back(prepare_inducing(layer));
  }
  return forward_stack(stack, priors, x, draw_stack_noise(stack, x.rows(), rng))
      .output;
}

LayerGradient::LayerGradient(const SvgpLayer &layer)
    : kernel(layer.kernel), z(DenseMatrix::Zero(layer.z.rows(), layer.z.cols())),
      m(DenseMatrix::Zero(layer.m.rows(), layer.m.cols())),
      s_factor_raw(DenseMatrix::Zero(layer.num_inducing(), layer.num_inducing())) {}

LayerGradient &LayerGradient::operator+=(const LayerGradient &other) {
  kernel += other.kernel;
  z += other.z;
  m += other.m;
  s_factor_raw += other.s_factor_raw;
  return *this;
}

LayerAdjoint::LayerAdjoint(const SvgpLayer &layer)
    : grad(layer),
      d_kzz(DenseMatrix::Zero(layer.num_inducing(), layer.num_inducing())),
      d_chol(DenseMatrix::Zero(layer.num_inducing(), layer.num_inducing())),
      d_s(DenseMatrix::Zero(layer.num_inducing(), layer.num_inducing())),
      d_s_diag(Vector::Zero(layer.num_inducing())),
      d_delta(DenseMatrix::Zero(layer.m.rows(), layer.m.cols())) {}

void backward(const SvgpLayer &layer, const InducingPrior &prior,
              const LayerPass &pass, const DenseMatrix &d_mean,
              const DenseMatrix &d_variance, LayerAdjoint &adj,
              DenseMatrix *dx) {
  // The variance column is shared by all outputs; clamped entries are flat.
  Vector c = d_variance.rowwise().sum();
  for (Eigen::Index n = 0; n < c.size(); ++n) {
    if (pass.unclamped_variance[n] <= kVarianceFloor) {
      c[n] = 0.0;
    }
  }

  gram_diag_backward(layer.kernel, c, adj.grad.kernel);

  if (layer.mean_fn == MeanFunction::identity && dx != nullptr) {
    *dx += d_mean;
  }

  if (layer.kernel.family == KernelFamily::white_noise) {
    // K_zx is identically zero so nothing flows into q(u) or z.
    return;
  }

  const DenseMatrix proj_c = pass.proj * c.asDiagonal();
  adj.d_delta += pass.proj * d_mean;
  const DenseMatrix outer_c = proj_c * pass.proj.transpose();
  adj.d_s += outer_c;

  DenseMatrix d_kzx;
  if (layer.whitened) {
    // proj = L^{-1} K_zx with L = chol(K_zz).
    const DenseMatrix d_proj = prior.delta * d_mean.transpose() +
                               2.0 * prior.s * proj_c - 2.0 * proj_c;
    d_kzx = tri_solve(prior.chol, d_proj, TriSide::lower_transposed);
    adj.d_chol -= d_kzx * pass.proj.transpose();
  } else {
    const DenseMatrix d_proj =
        prior.delta * d_mean.transpose() + 2.0 * prior.s * proj_c;
    const DenseMatrix kinv_dproj = chol_solve(prior.chol, d_proj);
    d_kzx = kinv_dproj - 2.0 * proj_c;
    adj.d_kzz += outer_c - kinv_dproj * pass.proj.transpose();
  }

  gram_backward(layer.kernel, layer.z, pass.x, pass.kzx, d_kzx, false,
                adj.grad.kernel, &adj.grad.z, dx);
}

void kl_backward(const SvgpLayer &layer, const InducingPrior &prior,
                 double scale, LayerAdjoint &adj) {
  const double dims = static_cast<double>(layer.output_dim());
  const Eigen::Index m = layer.num_inducing();
  if (layer.whitened) {
    adj.d_s.diagonal().array() += scale * 0.5 * dims;
    adj.d_s_diag -= scale * dims * prior.s_lower.diagonal().cwiseInverse();
    adj.d_delta += scale * prior.delta;
    return;
  }
  const DenseMatrix kinv = chol_solve(prior.chol, DenseMatrix::Identity(m, m));
  const DenseMatrix kinv_delta = kinv * prior.delta;
  const DenseMatrix kinv_s_kinv = kinv * prior.s * kinv;
  adj.d_kzz += scale * 0.5 *
               (-dims * kinv_s_kinv - kinv_delta * kinv_delta.transpose() +
                dims * kinv);
  adj.d_s += scale * 0.5 * dims * kinv;
  adj.d_s_diag -= scale * dims * prior.s_lower.diagonal().cwiseInverse();
  adj.d_delta += scale * kinv_delta;
}

LayerGradient finalize(const SvgpLayer &layer, const InducingPrior &prior,
                       LayerAdjoint adj) {
  LayerGradient grad = std::move(adj.grad);

  // K_zz = k(z, z) + jitter * variance * I.
  DenseMatrix d_kzz = adj.d_kzz;
  if (layer.whitened) {
    d_kzz += cholesky_backward(prior.chol.lower, adj.d_chol);
  }
  grad.kernel.raw_variance += layer.inducing_jitter * d_kzz.trace() *
                              positive_transform_derivative(
                                  layer.kernel.raw_variance);
  gram_backward(layer.kernel, layer.z, layer.z, prior.kzz_kernel, d_kzz, true,
                grad.kernel, &grad.z, &grad.z);

  grad.m += adj.d_delta;
  if (layer.mean_fn == MeanFunction::identity && !layer.whitened) {
    grad.z -= adj.d_delta;
  }

  // S = L L^T  =>  dL = (dS + dS^T) L, restricted to the lower triangle.
  DenseMatrix d_lower = (adj.d_s + adj.d_s.transpose()) * prior.s_lower;
  d_lower.diagonal() += adj.d_s_diag;
  grad.s_factor_raw = d_lower.triangularView<Eigen::StrictlyLower>();
  for (Eigen::Index i = 0; i < d_lower.rows(); ++i) {
    grad.s_factor_raw(i, i) =
        d_lower(i, i) * positive_transform_derivative(layer.s_factor_raw(i, i));
  }
  return grad;
}

StackPass forward_stack(const DeepStack &stack,
                        const std::vector<InducingPrior> &priors,
                        const DenseMatrix &x,
                        const std::vector<DenseMatrix> &noise) {
  require_dims(priors.size() == stack.size() && noise.size() == stack.size(),
               "forward_stack: per-layer inputs do not match stack depth");
  StackPass pass;
  DenseMatrix input = x;
  for (std::size_t l = 0; l < stack.size(); ++l) {
    pass.layers.push_back(forward(stack[l], priors[l], input));
    input = reparametrize(pass.layers.back().out, noise[l]);
  }
  pass.output = std::move(input);
  return pass;
}

void backward_stack(const DeepStack &stack,
                    const std::vector<InducingPrior> &priors,
                    const StackPass &pass,
                    const std::vector<DenseMatrix> &noise,
                    const DenseMatrix &d_output,
                    std::vector<LayerAdjoint> &adjoints) {
  DenseMatrix d_sample = d_output;
  for (std::size_t l = stack.size(); l-- > 0;) {
    const LayerPass &lp = pass.layers[l];
    const DenseMatrix sd = lp.out.variance.cwiseSqrt();
    // sample = mean + sqrt(var) * eps.
    const DenseMatrix d_var =
        d_sample.cwiseProduct(noise[l]).cwiseQuotient(2.0 * sd);
    if (l == 0) {
      backward(stack[l], priors[l], lp, d_sample, d_var, adjoints[l], nullptr);
    } else {
      DenseMatrix dx = DenseMatrix::Zero(lp.x.rows(), lp.x.cols());
      backward(stack[l], priors[l], lp, d_sample, d_var, adjoints[l], &dx);
      d_sample = std::move(dx);
    }
  }
}

} // namespace dagp
