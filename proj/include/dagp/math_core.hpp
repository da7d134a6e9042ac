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

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagp {

using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class NotPositiveDefinite : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Lower Cholesky factor of a symmetric positive definite matrix, plus the
/// diagonal jitter that had to be added for the factorization to succeed.
struct CholeskyFactor {
  DenseMatrix lower;
  double jitter_used = 0.0;

  Eigen::Index size() const { return lower.rows(); }
};

/// Factorizes `a`, escalating diagonal jitter through
/// {0, 1e-8, 1e-6, 1e-4} * mean(diag(a)). At most `max_attempts` entries
/// of that schedule are tried.
CholeskyFactor cholesky_with_jitter(const DenseMatrix &a, int max_attempts = 4);

enum class TriSide { lower, lower_transposed };

/// Solves L x = b or L^T x = b.
DenseMatrix tri_solve(const CholeskyFactor &factor, const DenseMatrix &b,
                      TriSide side);

/// (L L^T)^{-1} b via two triangular solves.
DenseMatrix chol_solve(const CholeskyFactor &factor, const DenseMatrix &b);

double log_det_from_factor(const CholeskyFactor &factor);

/// Given L = chol(A) and the adjoint of L (lower triangle read), returns the
/// symmetric adjoint of A.
DenseMatrix cholesky_backward(const DenseMatrix &lower, const DenseMatrix &d_lower);

/// Counter-based random stream. The n-th raw draw is a pure function of
/// (seed, stream_id, n), so two streams with equal keys produce bitwise
/// equal sequences and sampling sites on separate streams never interact.
class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  /// A new stream keyed by this stream's seed and a hash of (stream_id, tag).
  RngStream derive(std::uint64_t tag) const;

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

Vector sample_std_normal(RngStream &rng, Eigen::Index n);
DenseMatrix sample_std_normal(RngStream &rng, Eigen::Index rows,
                              Eigen::Index cols);
Vector sample_gumbel(RngStream &rng, Eigen::Index n);
/// -log(-log(u)); exposed for deterministic checks of the transform.
double gumbel_from_uniform(double u);

void require(bool condition, const std::string &what);
void require_dims(bool condition, const std::string &what);

} // namespace dagp
