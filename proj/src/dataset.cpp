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

#include "dagp/dataset.hpp"

namespace dagp {

void Dataset::validate() const {
  require_dims(x.rows() == y.rows(), "Dataset: x and y row counts differ");
  require_dims(y.cols() == 1, "Dataset: y must have one column");
  if (labels) {
    require_dims(static_cast<Eigen::Index>(labels->size()) == x.rows(),
                 "Dataset: label count differs from row count");
  }
  if (noiseless) {
    require_dims(noiseless->size() == x.rows(),
                 "Dataset: noiseless count differs from row count");
  }
  require(x.allFinite() && y.allFinite(), "Dataset: non-finite entries");
}

Dataset Dataset::subset(const std::vector<Eigen::Index> &rows) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()), 1);
  if (labels) {
    out.labels.emplace();
  }
  if (noiseless) {
    out.noiseless.emplace(static_cast<Eigen::Index>(rows.size()));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    const auto row = static_cast<Eigen::Index>(i);
    out.x.row(row) = x.row(r);
    out.y(row, 0) = y(r, 0);
    if (labels) {
      out.labels->push_back((*labels)[static_cast<std::size_t>(r)]);
    }
    if (noiseless) {
      (*out.noiseless)[row] = (*noiseless)[r];
    }
  }
  return out;
}

Dataset concatenate(const Dataset &a, const Dataset &b) {
  require_dims(a.input_dim() == b.input_dim(),
               "concatenate: input dimensions differ");
  Dataset out;
  out.x.resize(a.size() + b.size(), a.input_dim());
  out.x << a.x, b.x;
  out.y.resize(a.size() + b.size(), 1);
  out.y << a.y, b.y;
  if (a.labels && b.labels) {
    out.labels = *a.labels;
    out.labels->insert(out.labels->end(), b.labels->begin(), b.labels->end());
  }
  if (a.noiseless && b.noiseless) {
    out.noiseless.emplace(a.size() + b.size());
    *out.noiseless << *a.noiseless, *b.noiseless;
  }
  return out;
}

} // namespace dagp
