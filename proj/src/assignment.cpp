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

#include "dagp/assignment.hpp"

#include <cmath>

namespace dagp {

Vector AssignmentBelief::probabilities(Eigen::Index n) const {
  return softmax(logits.row(n).transpose());
}

Vector softmax(const Vector &logits) {
  require(logits.size() > 0, "softmax: empty input");
  const Vector shifted = logits.array() - logits.maxCoeff();
  const Vector e = shifted.array().exp();
  return e / e.sum();
}

Vector log_softmax(const Vector &logits) {
  require(logits.size() > 0, "log_softmax: empty input");
  const double max = logits.maxCoeff();
  const double lse =
      max + std::log((logits.array() - max).exp().sum());
  return logits.array() - lse;
}

ConcreteSample concrete_from_noise(const Vector &logits, const Vector &gumbel,
                                   double temperature) {
  require(temperature > 0.0, "concrete: temperature must be positive");
  require_dims(logits.size() == gumbel.size(),
               "concrete: noise length differs from logits");
  return ConcreteSample{softmax((logits + gumbel) / temperature), temperature};
}

ConcreteSample sample_concrete(const Vector &logits, double temperature,
                               RngStream &rng) {
  return concrete_from_noise(logits, sample_gumbel(rng, logits.size()),
                             temperature);
}

Vector concrete_backward(const ConcreteSample &sample, const Vector &d_weights) {
  const Vector &w = sample.weights;
  const double inner = w.dot(d_weights);
  return w.cwiseProduct(d_weights.array().matrix() -
                        Vector::Constant(w.size(), inner)) /
         sample.temperature;
}

double assignment_log_prob(const Vector &alpha_sample, const Vector &a_weights) {
  require_dims(alpha_sample.size() == a_weights.size(),
               "assignment_log_prob: length mismatch");
  const Vector ls = log_softmax(alpha_sample);
  double total = 0.0;
  for (Eigen::Index k = 0; k < ls.size(); ++k) {
    // 0 * log 0 contributes nothing.
    if (a_weights[k] != 0.0) {
      total += a_weights[k] * ls[k];
    }
  }
  return total;
}

AssignmentLogProbGradient assignment_log_prob_gradient(const Vector &alpha_sample,
                                                       const Vector &a_weights) {
  const Vector p = softmax(alpha_sample);
  return AssignmentLogProbGradient{a_weights - a_weights.sum() * p,
                                   log_softmax(alpha_sample)};
}

DenseMatrix predict_assignment_weights(const std::vector<SvgpLayer> &alpha_layers,
                                       const DenseMatrix &x_star, RngStream &rng,
                                       int n_samples) {
  require(n_samples >= 1, "predict_assignment_weights: n_samples must be >= 1");
  require(!alpha_layers.empty(), "predict_assignment_weights: no processes");
  const auto k_count = static_cast<Eigen::Index>(alpha_layers.size());
  const Eigen::Index n = x_star.rows();
  DenseMatrix means(n, k_count);
  DenseMatrix sds(n, k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const MarginalGaussians marg = marginal(alpha_layers[k], x_star);
    means.col(k) = marg.mean.col(0);
    sds.col(k) = marg.variance.col(0).cwiseSqrt();
  }
  DenseMatrix weights = DenseMatrix::Zero(n, k_count);
  for (int s = 0; s < n_samples; ++s) {
    const DenseMatrix eps = sample_std_normal(rng, n, k_count);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector alpha =
          (means.row(i) + sds.row(i).cwiseProduct(eps.row(i))).transpose();
      weights.row(i) += softmax(alpha).transpose();
    }
  }
  weights /= static_cast<double>(n_samples);
  // Renormalize away accumulated rounding.
  for (Eigen::Index i = 0; i < n; ++i) {
    weights.row(i) /= weights.row(i).sum();
  }
  return weights;
}

std::vector<int> hard_assignments(const AssignmentBelief &belief) {
  std::vector<int> out(static_cast<std::size_t>(belief.num_points()));
  for (Eigen::Index n = 0; n < belief.num_points(); ++n) {
    int best = 0;
    for (Eigen::Index k = 1; k < belief.num_components(); ++k) {
      if (belief.logits(n, k) > belief.logits(n, best)) {
        best = static_cast<int>(k);
      }
    }
    out[static_cast<std::size_t>(n)] = best;
  }
  return out;
}

} // namespace dagp
