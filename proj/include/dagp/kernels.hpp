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

#include "dagp/math_core.hpp"

#include <string>

namespace dagp {

enum class KernelFamily { squared_exponential, white_noise };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string &name);

/// softplus(raw) = log(1 + exp(raw)); linear above 30, exp below -30.
double positive_transform(double raw);
double inverse_positive_transform(double value);
/// d softplus / d raw, i.e. the logistic sigmoid.
double positive_transform_derivative(double raw);

/// Covariance family with unconstrained hyperparameters. White noise carries no
/// lengthscales.
struct KernelSpec {
  KernelFamily family = KernelFamily::squared_exponential;
  double raw_variance = 0.0;
  Vector raw_lengthscales;

  static KernelSpec squared_exponential(Eigen::Index input_dim,
                                        double variance = 1.0,
                                        double lengthscale = 1.0);
  static KernelSpec white_noise(double variance = 1.0);

  double variance() const { return positive_transform(raw_variance); }
  Vector lengthscales() const;
  /// Input dimension the lengthscales are defined for; -1 for white noise.
  Eigen::Index input_dim() const;
};

enum class MeanFunction { zero, identity };

std::string to_string(MeanFunction kind);
MeanFunction mean_function_from_string(const std::string &name);

/// Cross covariance k(x1_i, x2_j). For white noise the result is nonzero only
/// when `x1` and `x2` are the same object (one point set), see `gram(spec, x)`.
DenseMatrix gram(const KernelSpec &spec, const DenseMatrix &x1,
                 const DenseMatrix &x2);
/// Covariance of a point set with itself.
DenseMatrix gram(const KernelSpec &spec, const DenseMatrix &x);
Vector gram_diag(const KernelSpec &spec, const DenseMatrix &x);

/// Gradients of a scalar objective with respect to the unconstrained kernel
/// parameters.
struct KernelGradient {
  double raw_variance = 0.0;
  Vector raw_lengthscales;

  explicit KernelGradient(const KernelSpec &spec)
      : raw_lengthscales(Vector::Zero(spec.raw_lengthscales.size())) {}
  KernelGradient &operator+=(const KernelGradient &other);
};

/// Back-propagates `adjoint` (dObjective/dK, same shape as k = gram(spec, x1,
/// x2)) into the kernel parameters and, when non-null, both input sets.
/// `same_set` selects the self-covariance semantics of white noise.
void gram_backward(const KernelSpec &spec, const DenseMatrix &x1,
                   const DenseMatrix &x2, const DenseMatrix &k,
                   const DenseMatrix &adjoint, bool same_set,
                   KernelGradient &grad, DenseMatrix *dx1, DenseMatrix *dx2);

/// Adjoint of gram_diag; the diagonal depends on the variance only.
void gram_diag_backward(const KernelSpec &spec, const Vector &adjoint,
                        KernelGradient &grad);

} // namespace dagp
