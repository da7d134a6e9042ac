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

#include "dagp/math_core.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace dagp {

namespace {

constexpr std::array<double, 4> kJitterSchedule{0.0, 1e-8, 1e-6, 1e-4};

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

} // namespace

void require(bool condition, const std::string &what) {
  if (!condition) {
    throw std::invalid_argument(what);
  }
}

void require_dims(bool condition, const std::string &what) {
  if (!condition) {
    throw DimensionMismatch(what);
  }
}

CholeskyFactor cholesky_with_jitter(const DenseMatrix &a, int max_attempts) {
  require_dims(a.rows() == a.cols(), "cholesky_with_jitter: matrix not square");
  const Eigen::Index n = a.rows();
  if (n == 0) {
    return CholeskyFactor{DenseMatrix(0, 0), 0.0};
  }
  const double scale = a.cwiseAbs().maxCoeff();
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  require(asym <= 1e-10 * std::max(scale, 1e-300),
          "cholesky_with_jitter: matrix not symmetric");

  const double mean_diag = a.diagonal().mean();
  const int attempts =
      std::min<int>(max_attempts, static_cast<int>(kJitterSchedule.size()));
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const double jitter = kJitterSchedule[attempt] * mean_diag;
    DenseMatrix shifted = a;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<DenseMatrix> llt(shifted);
    if (llt.info() != Eigen::Success) {
      continue;
    }
    DenseMatrix lower = llt.matrixL();
    if ((lower.diagonal().array() > 0.0).all() && lower.allFinite()) {
      return CholeskyFactor{std::move(lower), jitter};
    }
  }
  throw NotPositiveDefinite("cholesky_with_jitter: factorization failed after " +
                            std::to_string(attempts) + " jitter attempts");
}

DenseMatrix tri_solve(const CholeskyFactor &factor, const DenseMatrix &b,
                      TriSide side) {
  require_dims(factor.lower.rows() == b.rows(),
               "tri_solve: factor has " + std::to_string(factor.lower.rows()) +
                   " rows, rhs has " + std::to_string(b.rows()));
  if (side == TriSide::lower) {
    return factor.lower.triangularView<Eigen::Lower>().solve(b);
  }
  return factor.lower.transpose().triangularView<Eigen::Upper>().solve(b);
}

DenseMatrix chol_solve(const CholeskyFactor &factor, const DenseMatrix &b) {
  return tri_solve(factor, tri_solve(factor, b, TriSide::lower),
                   TriSide::lower_transposed);
}

double log_det_from_factor(const CholeskyFactor &factor) {
  return 2.0 * factor.lower.diagonal().array().log().sum();
}

DenseMatrix cholesky_backward(const DenseMatrix &lower, const DenseMatrix &d_lower) {
  require_dims(lower.rows() == lower.cols() && d_lower.rows() == lower.rows() &&
                   d_lower.cols() == lower.cols(),
               "cholesky_backward: shape mismatch");
  const auto l = lower.triangularView<Eigen::Lower>();
  DenseMatrix phi = lower.transpose() *
                    d_lower.triangularView<Eigen::Lower>().toDenseMatrix();
  phi = phi.triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  // L^{-T} phi L^{-1}
  DenseMatrix left = l.transpose().solve(phi);
  DenseMatrix out = l.transpose().solve(left.transpose()).transpose();
  return 0.5 * (out + out.transpose());
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id),
      key_(splitmix64(splitmix64(seed) ^ splitmix64(~stream_id))) {}

RngStream RngStream::derive(std::uint64_t tag) const {
  return RngStream(seed_, splitmix64(stream_id_ * 0x9e3779b97f4a7c15ULL ^
                                     splitmix64(tag)));
}

std::uint64_t RngStream::next_u64() {
  // SplitMix64 output function applied to the (key, counter) pair.
  const std::uint64_t x = key_ + (++counter_) * 0xd1342543de82ef95ULL;
  return splitmix64(x ^ (key_ >> 17));
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; uniform() never returns 0 so the log is finite.
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Vector sample_std_normal(RngStream &rng, Eigen::Index n) {
  require(n >= 0, "sample_std_normal: negative count");
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = rng.normal();
  }
  return out;
}

DenseMatrix sample_std_normal(RngStream &rng, Eigen::Index rows,
                              Eigen::Index cols) {
  DenseMatrix out(rows, cols);
  // Filled row by row so a row's noise does not depend on the column count of
  // later rows.
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      out(i, j) = rng.normal();
    }
  }
  return out;
}

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

Vector sample_gumbel(RngStream &rng, Eigen::Index n) {
  require(n >= 0, "sample_gumbel: negative count");
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out[i] = gumbel_from_uniform(rng.uniform());
  }
  return out;
}

} // namespace dagp
