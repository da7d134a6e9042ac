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

#include <optional>
#include <vector>

namespace dagp {

/// Inputs x (N x D), scalar targets y (N x 1), and optional generator
/// metadata aligned by row.
struct Dataset {
  DenseMatrix x;
  DenseMatrix y;
  std::optional<std::vector<int>> labels;
  std::optional<Vector> noiseless;

  Eigen::Index size() const { return x.rows(); }
  Eigen::Index input_dim() const { return x.cols(); }
  void validate() const;
  Dataset subset(const std::vector<Eigen::Index> &rows) const;
};

Dataset concatenate(const Dataset &a, const Dataset &b);

} // namespace dagp
