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

#include "dagp/kernels.hpp"

#include <cmath>

namespace dagp {

std::string to_string(KernelFamily family) {
  switch (family) {
  case KernelFamily::squared_exponential:
    return "squared_exponential";
  case KernelFamily::white_noise:
    return "white_noise";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string &name) {
  if (name == "squared_exponential" || name == "se") {
    return KernelFamily::squared_exponential;
  }
  if (name == "white_noise" || name == "white") {
    return KernelFamily::white_noise;
  }
  throw std::invalid_argument("unknown kernel family '" + name + "'");
}

std::string to_string(MeanFunction kind) {
  return kind == MeanFunction::zero ? "zero" : "identity";
}

MeanFunction mean_function_from_string(const std::string &name) {
  if (name == "zero") {
    return MeanFunction::zero;
  }
  if (name == "identity") {
    return MeanFunction::identity;
  }
  throw std::invalid_argument("unknown mean function '" + name + "'");
}

double positive_transform(double raw) {
  if (raw > 30.0) {
    return raw + std::log1p(std::exp(-raw));
  }
  if (raw < -30.0) {
    return std::exp(raw);
  }
  return std::log1p(std::exp(raw));
}

double inverse_positive_transform(double value) {
  require(value > 0.0, "inverse_positive_transform: value must be positive");
  if (value > 30.0) {
    return value + std::log(-std::expm1(-value));
  }
  if (value < 1e-13) {
    return std::log(value);
  }
  return std::log(std::expm1(value));
}

double positive_transform_derivative(double raw) {
  if (raw >= 0.0) {
    return 1.0 / (1.0 + std::exp(-raw));
  }
  const double e = std::exp(raw);
  return e / (1.0 + e);
}

KernelSpec KernelSpec::squared_exponential(Eigen::Index input_dim,
                                           double variance,
                                           double lengthscale) {
  KernelSpec spec;
  spec.family = KernelFamily::squared_exponential;
  spec.raw_variance = inverse_positive_transform(variance);
  spec.raw_lengthscales =
      Vector::Constant(input_dim, inverse_positive_transform(lengthscale));
  return spec;
}

KernelSpec KernelSpec::white_noise(double variance) {
  KernelSpec spec;
  spec.family = KernelFamily::white_noise;
  spec.raw_variance = inverse_positive_transform(variance);
  return spec;
}

Vector KernelSpec::lengthscales() const {
  return raw_lengthscales.unaryExpr([](double r) { return positive_transform(r); });
}

Eigen::Index KernelSpec::input_dim() const {
  return family == KernelFamily::white_noise ? -1 : raw_lengthscales.size();
}

namespace {

void check_inputs(const KernelSpec &spec, const DenseMatrix &x1,
                  const DenseMatrix &x2) {
  require_dims(x1.cols() == x2.cols(), "gram: inputs have " +
                                           std::to_string(x1.cols()) + " and " +
                                           std::to_string(x2.cols()) +
                                           " columns");
  if (spec.family == KernelFamily::squared_exponential) {
    require_dims(spec.raw_lengthscales.size() == x1.cols(),
                 "gram: kernel has " +
                     std::to_string(spec.raw_lengthscales.size()) +
                     " lengthscales for " + std::to_string(x1.cols()) +
                     "-dimensional inputs");
  }
}

DenseMatrix se_gram(const KernelSpec &spec, const DenseMatrix &x1,
                    const DenseMatrix &x2) {
  const Vector inv_ls = spec.lengthscales().cwiseInverse();
  const DenseMatrix a = x1 * inv_ls.asDiagonal();
  const DenseMatrix b = x2 * inv_ls.asDiagonal();
  const double variance = spec.variance();
  DenseMatrix k(x1.rows(), x2.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      k(i, j) = variance * std::exp(-0.5 * (a.row(i) - b.row(j)).squaredNorm());
    }
  }
  return k;
}

} // namespace

DenseMatrix gram(const KernelSpec &spec, const DenseMatrix &x1,
                 const DenseMatrix &x2) {
  if (&x1 == &x2) {
    return gram(spec, x1);
  }
  check_inputs(spec, x1, x2);
  if (spec.family == KernelFamily::white_noise) {
    return DenseMatrix::Zero(x1.rows(), x2.rows());
  }
  return se_gram(spec, x1, x2);
}

DenseMatrix gram(const KernelSpec &spec, const DenseMatrix &x) {
  check_inputs(spec, x, x);
  if (spec.family == KernelFamily::white_noise) {
    return spec.variance() * DenseMatrix::Identity(x.rows(), x.rows());
  }
  DenseMatrix k = se_gram(spec, x, x);
  // Exact symmetry, the factorization checks it.
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = j + 1; i < k.rows(); ++i) {
      k(j, i) = k(i, j);
    }
  }
  return k;
}

Vector gram_diag(const KernelSpec &spec, const DenseMatrix &x) {
  check_inputs(spec, x, x);
  return Vector::Constant(x.rows(), spec.variance());
}

KernelGradient &KernelGradient::operator+=(const KernelGradient &other) {
  raw_variance += other.raw_variance;
  raw_lengthscales += other.raw_lengthscales;
  return *this;
}

void gram_backward(const KernelSpec &spec, const DenseMatrix &x1,
                   const DenseMatrix &x2, const DenseMatrix &k,
                   const DenseMatrix &adjoint, bool same_set,
                   KernelGradient &grad, DenseMatrix *dx1, DenseMatrix *dx2) {
  require_dims(k.rows() == adjoint.rows() && k.cols() == adjoint.cols(),
               "gram_backward: adjoint shape differs from the gram matrix");
  const double dvar_draw = positive_transform_derivative(spec.raw_variance);
  if (spec.family == KernelFamily::white_noise) {
    if (same_set) {
      grad.raw_variance += adjoint.trace() * dvar_draw;
    }
    return;
  }

  const double variance = spec.variance();
  // dK_ij/dvariance = K_ij / variance.
  const DenseMatrix weighted = adjoint.cwiseProduct(k);
  grad.raw_variance += weighted.sum() / variance * dvar_draw;

  const Vector ls = spec.lengthscales();
  const Eigen::Index dims = x1.cols();
  for (Eigen::Index d = 0; d < dims; ++d) {
    const double inv_ls2 = 1.0 / (ls[d] * ls[d]);
    double dls = 0.0;
    for (Eigen::Index j = 0; j < x2.rows(); ++j) {
      const double x2d = x2(j, d);
      for (Eigen::Index i = 0; i < x1.rows(); ++i) {
        const double w = weighted(i, j);
        if (w == 0.0) {
          continue;
        }
        const double diff = x1(i, d) - x2d;
        dls += w * diff * diff;
        const double dpos = -w * diff * inv_ls2;
        if (dx1 != nullptr) {
          (*dx1)(i, d) += dpos;
        }
        if (dx2 != nullptr) {
          (*dx2)(j, d) -= dpos;
        }
      }
    }
    grad.raw_lengthscales[d] += dls * inv_ls2 / ls[d] *
                                positive_transform_derivative(
                                    spec.raw_lengthscales[d]);
  }
}

void gram_diag_backward(const KernelSpec &spec, const Vector &adjoint,
                        KernelGradient &grad) {
  grad.raw_variance +=
      adjoint.sum() * positive_transform_derivative(spec.raw_variance);
}

} // namespace dagp
