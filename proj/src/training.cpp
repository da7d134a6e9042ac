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

#include "dagp/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace dagp {

void TrainConfig::validate() const {
  require(steps >= 0, "steps must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(adam_beta1 > 0.0 && adam_beta1 < 1.0, "adam_beta1 must lie in (0, 1)");
  require(adam_beta2 > 0.0 && adam_beta2 < 1.0, "adam_beta2 must lie in (0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(temperature_end > 0.0 && temperature_end <= temperature_start,
          "temperatures must satisfy 0 < end <= start");
  require(anneal_fraction > 0.0 && anneal_fraction <= 1.0,
          "anneal_fraction must lie in (0, 1]");
  require(n_mc_train >= 1, "n_mc_train must be >= 1");
  require(trace_every >= 1, "trace_every must be >= 1");
}

GradientResult gradient(const DagpModel &model, const Dataset &data,
                        std::span<const Eigen::Index> batch, int n_mc,
                        double temperature, RngStream &rng) {
  const ElboNoise noise = draw_elbo_noise(
      model, static_cast<Eigen::Index>(batch.size()), n_mc, rng);
  DagpModel grad = zeros_like(model);
  GradientResult out;
  out.estimate = evaluate_elbo(model, data, batch, temperature, noise, &grad);
  out.gradient.values = flatten_parameters(grad);
  const Vector &g = out.gradient.values;
  if (!g.allFinite()) {
    Eigen::Index bad = 0;
    while (std::isfinite(g[bad])) {
      ++bad;
    }
    throw NonFiniteGradient(parameter_names(model)[static_cast<std::size_t>(bad)]);
  }
  return out;
}

void adam_step(AdamState &state, Vector &params, const Vector &grad,
               const TrainConfig &config) {
  require_dims(state.first.size() == params.size() && grad.size() == params.size(),
               "adam_step: size mismatch");
  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  state.first = b1 * state.first + (1.0 - b1) * grad;
  state.second = b2 * state.second + (1.0 - b2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  params.array() += config.learning_rate * (state.first.array() / c1) /
                    ((state.second.array() / c2).sqrt() + config.adam_eps);
}

double temperature_at(const TrainConfig &config, int step) {
  const double anneal_steps = config.anneal_fraction * config.steps;
  if (step >= anneal_steps) {
    return config.temperature_end;
  }
  const double t = step / anneal_steps;
  return config.temperature_start *
         std::pow(config.temperature_end / config.temperature_start, t);
}

namespace {

class EpochBatches {
public:
  EpochBatches(Eigen::Index n, Eigen::Index batch, RngStream rng)
      : order_(static_cast<std::size_t>(n)), batch_(std::min(batch, n)),
        rng_(rng) {
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    shuffle();
  }

  // Drops the tail of an epoch so every batch has the same size.
  std::span<const Eigen::Index> next() {
    if (pos_ + static_cast<std::size_t>(batch_) > order_.size()) {
      shuffle();
    }
    std::span<const Eigen::Index> out(order_.data() + pos_,
                                      static_cast<std::size_t>(batch_));
    pos_ += static_cast<std::size_t>(batch_);
    return out;
  }

private:
  void shuffle() {
    for (std::size_t i = order_.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng_.next_u64() % i);
      std::swap(order_[i - 1], order_[j]);
    }
    pos_ = 0;
  }

  std::vector<Eigen::Index> order_;
  Eigen::Index batch_;
  RngStream rng_;
  std::size_t pos_ = 0;
};

} // namespace

TrainResult train(DagpModel &model, const Dataset &data,
                  const TrainConfig &config, const TraceCallback &on_trace) {
  config.validate();
  model.validate();
  const RngStream root(config.seed, 0x747261696eULL);
  EpochBatches batches(data.size(), config.batch_size, root.derive(1));
  RngStream noise_rng = root.derive(2);

  Vector params = flatten_parameters(model);
  AdamState adam(params.size());
  TrainResult result;
  result.step_elbo.reserve(static_cast<std::size_t>(config.steps));
  const auto start = std::chrono::steady_clock::now();
  int failures = 0;
  for (int step = 0; step < config.steps; ++step) {
    const double temperature = temperature_at(config, step);
    const auto batch = batches.next();
    GradientResult g;
    try {
      g = gradient(model, data, batch, config.n_mc_train, temperature, noise_rng);
      if (!std::isfinite(g.estimate.value)) {
        throw NonFiniteGradient("elbo");
      }
      failures = 0;
    } catch (const NonFiniteGradient &) {
      if (++failures >= 3) {
        throw;
      }
      result.step_elbo.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    result.step_elbo.push_back(g.estimate.value);
    adam_step(adam, params, g.gradient.values, config);
    unflatten_parameters(model, params);

    if (step % config.trace_every == 0 || step + 1 == config.steps) {
      TraceRow row;
      row.step = step;
      row.elbo = g.estimate;
      row.temperature = temperature;
      row.seconds = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      result.trace.push_back(row);
      if (on_trace) {
        on_trace(row);
      }
    }
  }
  return result;
}

std::vector<double> smooth(const std::vector<double> &values, std::size_t window) {
  require(window >= 1, "smooth: window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) {
      sum -= values[i - window];
    }
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

} // namespace dagp
