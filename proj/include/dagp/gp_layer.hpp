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

#include "dagp/kernels.hpp"
#include "dagp/math_core.hpp"

#include <vector>

namespace dagp {

inline constexpr double kVarianceFloor = 1e-12;

/// One sparse variational GP: q(u) = N(m, S) over the function values at the
/// inducing inputs z, with S = L L^T shared by all output columns.
///
/// All fields are unconstrained parameters. `s_factor_raw` is lower
/// triangular; its diagonal holds softplus-inverse values so that L has a
/// strictly positive diagonal. The prior covariance K_zz receives an extra
/// `inducing_jitter * kernel variance` on its diagonal.
///
/// With `whitened` set, (m, S) describe v instead, where
/// u = mu(z) + chol(K_zz) v and v has a standard normal prior.
struct SvgpLayer {
  KernelSpec kernel;
  MeanFunction mean_fn = MeanFunction::zero;
  DenseMatrix z;
  DenseMatrix m;
  DenseMatrix s_factor_raw;
  double inducing_jitter = 1e-6;
  bool whitened = false;

  /// Posterior mean equal to the prior mean, L = s_scale * I.
  static SvgpLayer make(KernelSpec kernel, MeanFunction mean_fn, DenseMatrix z,
                        Eigen::Index output_dim, double s_scale,
                        bool whitened = false);

  Eigen::Index num_inducing() const { return z.rows(); }
  Eigen::Index input_dim() const { return z.cols(); }
  Eigen::Index output_dim() const { return m.cols(); }

  DenseMatrix s_factor() const;
  void set_s_factor(const DenseMatrix &lower);
  DenseMatrix mean_at(const DenseMatrix &x) const;
  void validate() const;
};

using DeepStack = std::vector<SvgpLayer>;

void validate_stack(const DeepStack &stack);

struct MarginalGaussians {
  DenseMatrix mean;
  DenseMatrix variance;
};

/// Quantities of q(u) and p(u) that every evaluation of a layer reuses.
struct InducingPrior {
  DenseMatrix kzz_kernel; // k(z, z) without jitter
  CholeskyFactor chol;    // of k(z, z) + jitter
  DenseMatrix s_lower;
  DenseMatrix s;
  DenseMatrix delta; // m - mu(z), or m when whitened
};

InducingPrior prepare_inducing(const SvgpLayer &layer);

/// Intermediates of one marginal evaluation, kept for the backward pass.
struct LayerPass {
  DenseMatrix x;
  DenseMatrix kzx;  // M x N
  DenseMatrix proj; // K_zz^{-1} K_zx, or chol(K_zz)^{-1} K_zx when whitened
  Vector unclamped_variance;
  MarginalGaussians out;
};

LayerPass forward(const SvgpLayer &layer, const InducingPrior &prior,
                  const DenseMatrix &x);

MarginalGaussians marginal(const SvgpLayer &layer, const DenseMatrix &x);

double kl_to_prior(const SvgpLayer &layer, const InducingPrior &prior);
double kl_to_prior(const SvgpLayer &layer);

/// mean + sqrt(variance) .* noise.
DenseMatrix reparametrize(const MarginalGaussians &marg, const DenseMatrix &noise);

DenseMatrix sample(const SvgpLayer &layer, const DenseMatrix &x, RngStream &rng);

/// Draws the layer-by-layer standard normal noise for `n` points.
std::vector<DenseMatrix> draw_stack_noise(const DeepStack &stack, Eigen::Index n,
                                          RngStream &rng);

DenseMatrix sample_deep(const DeepStack &stack, const DenseMatrix &x,
                        RngStream &rng);

// ---------------------------------------------------------------------------
// Reverse-mode adjoints.

struct LayerGradient {
  KernelGradient kernel;
  DenseMatrix z;
  DenseMatrix m;
  DenseMatrix s_factor_raw;

  explicit LayerGradient(const SvgpLayer &layer);
  LayerGradient &operator+=(const LayerGradient &other);
};

/// Accumulates dObjective/d(intermediate) across all passes through a layer
/// in one objective evaluation; `finalize` pushes them into parameters.
struct LayerAdjoint {
  LayerGradient grad;
  DenseMatrix d_kzz;
  DenseMatrix d_chol; // adjoint of chol(K_zz), whitened layers only
  DenseMatrix d_s;
  Vector d_s_diag; // direct adjoint of diag(L), from log|S|
  DenseMatrix d_delta;

  explicit LayerAdjoint(const SvgpLayer &layer);
};

/// Given dObjective/dmean and dObjective/dvariance of `pass`, accumulates
/// parameter adjoints and, when `dx` is non-null, adds the input adjoint.
void backward(const SvgpLayer &layer, const InducingPrior &prior,
              const LayerPass &pass, const DenseMatrix &d_mean,
              const DenseMatrix &d_variance, LayerAdjoint &adj,
              DenseMatrix *dx);

/// Adds scale * dKL/d(.) to the adjoint.
void kl_backward(const SvgpLayer &layer, const InducingPrior &prior,
                 double scale, LayerAdjoint &adj);

LayerGradient finalize(const SvgpLayer &layer, const InducingPrior &prior,
                       LayerAdjoint adj);

struct StackPass {
  std::vector<LayerPass> layers;
  DenseMatrix output;
};

StackPass forward_stack(const DeepStack &stack,
                        const std::vector<InducingPrior> &priors,
                        const DenseMatrix &x,
                        const std::vector<DenseMatrix> &noise);

void backward_stack(const DeepStack &stack,
                    const std::vector<InducingPrior> &priors,
                    const StackPass &pass,
                    const std::vector<DenseMatrix> &noise,
                    const DenseMatrix &d_output,
                    std::vector<LayerAdjoint> &adjoints);

} // namespace dagp
