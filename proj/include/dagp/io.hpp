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

#include "dagp/model.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

namespace dagp {

class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Writes to a temporary file in the same directory, then renames over `path`.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);
std::string read_file(const std::filesystem::path &path);

/// Columns x_1..x_D, y, then label and noiseless_y when present.
std::string dataset_to_csv(const Dataset &data);
Dataset dataset_from_csv(const std::string &text);
void save_dataset(const std::filesystem::path &path, const Dataset &data);
Dataset load_dataset(const std::filesystem::path &path);

/// The sibling document holding a dataset's generator settings and seeds.
std::filesystem::path metadata_path(const std::filesystem::path &csv_path);

nlohmann::json model_to_json(const DagpModel &model);
DagpModel model_from_json(const nlohmann::json &doc);

/// `extra` is stored verbatim next to the model and returned on load.
void save_model(const std::filesystem::path &path, const DagpModel &model,
                const nlohmann::json &extra = nlohmann::json::object());
DagpModel load_model(const std::filesystem::path &path,
                     nlohmann::json *extra = nullptr);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

} // namespace dagp
