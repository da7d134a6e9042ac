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
#include "fd_check.hpp"

#include "doctest.h"

#include <cmath>

using namespace dagp;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector out(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) {
    out[i++] = v;
  }
  return out;
}

SvgpLayer constant_alpha(double mean, double s_scale) {
  DenseMatrix z(1, 1);
  z << 0.0;
  SvgpLayer layer = SvgpLayer::make(KernelSpec::squared_exponential(1, 1.0, 1.0),
                                    MeanFunction::zero, z, 1, s_scale);
  layer.m(0, 0) = mean;
  return layer;
}

} // namespace

TEST_CASE("softmax") {
  const Vector uniform = softmax(Vector::Zero(3));
  CHECK((uniform.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
  const Vector saturated = softmax(vec({1000.0, 0.0}));
  CHECK(saturated.allFinite());
  CHECK(saturated[0] == doctest::Approx(1.0));
  CHECK(saturated[1] == doctest::Approx(0.0));
  const Vector two_thirds = softmax(vec({std::log(2.0), 0.0}));
  CHECK(two_thirds[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(two_thirds[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("concrete samples") {
  RngStream rng(1, 0);
  const Vector logits = vec({0.3, -1.2, 0.9, 0.0});
  for (int trial = 0; trial < 200; ++trial) {
    const Vector g = sample_gumbel(rng, 4);
    const ConcreteSample cold = concrete_from_noise(logits, g, 1e-6);
    Eigen::Index best = 0;
    (logits + g).maxCoeff(&best);
    CHECK(std::abs(cold.weights[best] - 1.0) < 1e-6);
    const ConcreteSample warm = sample_concrete(logits, 0.7, rng);
    CHECK(std::abs(warm.weights.sum() - 1.0) < 1e-10);
    CHECK((warm.weights.array() >= 0.0).all());
  }
}

TEST_CASE("concrete argmax frequencies follow the categorical") {
  RngStream rng(2, 0);
  const Vector logits = vec({std::log(0.7), std::log(0.3)});
  const int n = 100000;
  int first = 0;
  for (int i = 0; i < n; ++i) {
    const ConcreteSample s = sample_concrete(logits, 0.01, rng);
    first += s.weights[0] > s.weights[1] ? 1 : 0;
  }
  const double freq = static_cast<double>(first) / n;
  CHECK(std::abs(freq - 0.7) < 3.0 * std::sqrt(0.7 * 0.3 / n));
}

TEST_CASE("concrete samples are permutation equivariant") {
  const Vector logits = vec({0.5, -0.2, 1.1});
  const std::vector<Eigen::Index> perm{2, 0, 1};
  RngStream rng(3, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector g = sample_gumbel(rng, 3);
    Vector lp(3), gp(3);
    for (Eigen::Index i = 0; i < 3; ++i) {
      lp[i] = logits[perm[static_cast<std::size_t>(i)]];
      gp[i] = g[perm[static_cast<std::size_t>(i)]];
    }
    const Vector w = concrete_from_noise(logits, g, 0.4).weights;
    const Vector wp = concrete_from_noise(lp, gp, 0.4).weights;
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK(std::abs(wp[i] - w[perm[static_cast<std::size_t>(i)]]) < 1e-15);
    }
  }
}

TEST_CASE("concrete gradient matches finite differences") {
  RngStream rng(4, 0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector logits = sample_std_normal(rng, 4);
    const Vector g = sample_gumbel(rng, 4);
    const Vector upstream = sample_std_normal(rng, 4);
    const double temperature = 0.2 + 0.2 * trial;
    const ConcreteSample s = concrete_from_noise(logits, g, temperature);
    const Vector analytic = concrete_backward(s, upstream);
    const Vector numeric = dagp::testing::central_differences(
        logits,
        [&](const Vector &l) {
          return concrete_from_noise(l, g, temperature).weights.dot(upstream);
        },
        1e-5);
    CHECK(dagp::testing::compare_gradients(analytic, numeric).worst < 1e-4);
  }
}

TEST_CASE("mean max weight decreases with temperature") {
  const Vector logits = vec({0.4, -0.3, 0.1});
  double previous = 1.1;
  for (double temperature : {0.01, 0.1, 0.5, 1.0}) {
    RngStream rng(5, 0);
    double total = 0.0;
    for (int i = 0; i < 10000; ++i) {
      total += sample_concrete(logits, temperature, rng).weights.maxCoeff();
    }
    const double mean_max = total / 10000.0;
    CHECK(mean_max <= previous);
    previous = mean_max;
  }
}

TEST_CASE("assignment log probability") {
  Vector one_hot = Vector::Zero(4);
  one_hot[2] = 1.0;
  CHECK(assignment_log_prob(Vector::Zero(4), one_hot) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-14));
  CHECK(assignment_log_prob(Vector::Zero(2), Vector::Constant(2, 0.5)) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(assignment_log_prob(vec({std::log(2.0), 0.0}), vec({1.0, 0.0})) ==
        doctest::Approx(-0.405465).epsilon(1e-6));

  RngStream rng(6, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector alpha = 3.0 * sample_std_normal(rng, 3);
    const Vector a = softmax(sample_std_normal(rng, 3));
    CHECK(assignment_log_prob(alpha, a) <= 0.0);

    const auto grad = assignment_log_prob_gradient(alpha, a);
    const Vector numeric = dagp::testing::central_differences(
        alpha, [&](const Vector &x) { return assignment_log_prob(x, a); }, 1e-5);
    CHECK(dagp::testing::compare_gradients(grad.d_alpha, numeric).worst < 1e-4);
  }
  // Saturated softmax approaches zero.
  CHECK(assignment_log_prob(vec({800.0, 0.0}), vec({1.0, 0.0})) == 0.0);
}

TEST_CASE("predictive assignment weights") {
  DenseMatrix far(2, 1);
  far << 200.0, -150.0;
  SUBCASE("prior processes away from data give uniform weights") {
    const std::vector<SvgpLayer> alphas{constant_alpha(0.0, 1.0),
                                        constant_alpha(0.0, 1.0),
                                        constant_alpha(0.0, 1.0)};
    RngStream rng(7, 0);
    const DenseMatrix w = predict_assignment_weights(alphas, far, rng, 20000);
    CHECK((w.array() - 1.0 / 3.0).abs().maxCoeff() < 0.01);
  }
  SUBCASE("a dominant process takes all weight") {
    std::vector<SvgpLayer> alphas{constant_alpha(10.0, 1e-3),
                                  constant_alpha(-10.0, 1e-3),
                                  constant_alpha(-10.0, 1e-3)};
    DenseMatrix at(1, 1);
    at << 0.0;
    RngStream rng(8, 0);
    const DenseMatrix w = predict_assignment_weights(alphas, at, rng, 50);
    CHECK(w(0, 0) > 0.999999);
  }
  SUBCASE("rows sum to one") {
    RngStream rng(9, 0);
    std::vector<SvgpLayer> alphas{constant_alpha(0.7, 0.5), constant_alpha(-0.2, 0.9)};
    const DenseMatrix x = 2.0 * sample_std_normal(rng, 30, 1);
    const DenseMatrix w = predict_assignment_weights(alphas, x, rng, 7);
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK_THROWS(predict_assignment_weights(alphas, x, rng, 0));
  }
}

TEST_CASE("hard assignments") {
  AssignmentBelief belief;
  belief.logits.resize(2, 3);
  belief.logits << 0, 1, -1, 5, 5, 2;
  const std::vector<int> hard = hard_assignments(belief);
  CHECK(hard[0] == 1);
  CHECK(hard[1] == 0);

  RngStream rng(10, 0);
  belief.logits = DenseMatrix(50, 4);
  for (Eigen::Index i = 0; i < belief.logits.size(); ++i) {
    // Coarse values force ties.
    belief.logits(i) = std::round(2.0 * rng.normal());
  }
  const std::vector<int> got = hard_assignments(belief);
  for (Eigen::Index n = 0; n < 50; ++n) {
    int best = 0;
    double best_value = -1e300;
    for (int k = 0; k < 4; ++k) {
      if (belief.logits(n, k) > best_value) {
        best_value = belief.logits(n, k);
        best = k;
      }
    }
    CHECK(got[static_cast<std::size_t>(n)] == best);
  }
}
