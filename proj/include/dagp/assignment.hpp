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

#include "dagp/gp_layer.hpp"
#include "dagp/math_core.hpp"

#include <vector>

namespace dagp {

/// Unconstrained logits of q(a_n), one row per training point in dataset
/// order.
struct AssignmentBelief {
  DenseMatrix logits;

  Eigen::Index num_points() const { return logits.rows(); }
  Eigen::Index num_components() const { return logits.cols(); }
  Vector probabilities(Eigen::Index n) const;
};

struct ConcreteSample {
  Vector weights;
  double temperature = 1.0;
};

Vector softmax(const Vector &logits);
Vector log_softmax(const Vector &logits);

/// softmax((logits + gumbel) / temperature) with the Gumbel noise supplied.
ConcreteSample concrete_from_noise(const Vector &logits, const Vector &gumbel,
                                   double temperature);
ConcreteSample sample_concrete(const Vector &logits, double temperature,
                               RngStream &rng);
/// Adjoint of concrete_from_noise with respect to the logits.
Vector concrete_backward(const ConcreteSample &sample, const Vector &d_weights);

/// sum_k a_k log softmax(alpha)_k.
double assignment_log_prob(const Vector &alpha_sample, const Vector &a_weights);

struct AssignmentLogProbGradient {
  Vector d_alpha;
  Vector d_weights;
};
AssignmentLogProbGradient assignment_log_prob_gradient(const Vector &alpha_sample,
                                                       const Vector &a_weights);

/// Monte Carlo average over `n_samples` of softmax over the K sampled
/// assignment-process values at each test input. Rows sum to one.
DenseMatrix predict_assignment_weights(const std::vector<SvgpLayer> &alpha_layers,
                                       const DenseMatrix &x_star, RngStream &rng,
                                       int n_samples);

/// Row-wise argmax, ties resolved toward the lowest index (0-based).
std::vector<int> hard_assignments(const AssignmentBelief &belief);

} // namespace dagp
