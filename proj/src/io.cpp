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

#include "dagp/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace dagp {

using nlohmann::json;

namespace {

constexpr const char *kFormat = "dagp-model";
constexpr int kVersion = 1;

json matrix_to_json(const DenseMatrix &m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      require(std::isfinite(m(i, j)), "snapshot: refusing to store a non-finite value");
      data.push_back(m(i, j));
    }
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

DenseMatrix matrix_from_json(const json &j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const json &data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
    throw FormatError("snapshot: matrix data length differs from its shape");
  }
  DenseMatrix m(rows, cols);
  std::size_t pos = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) {
      m(i, j2) = data[pos++].get<double>();
    }
  }
  return m;
}

json vector_to_json(const Vector &v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    require(std::isfinite(v[i]), "snapshot: refusing to store a non-finite value");
    out.push_back(v[i]);
  }
  return out;
}

Vector vector_from_json(const json &j) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

json layer_to_json(const SvgpLayer &layer) {
  return {
      {"kernel",
       {{"family", to_string(layer.kernel.family)},
        {"raw_variance", layer.kernel.raw_variance},
        {"raw_lengthscales", vector_to_json(layer.kernel.raw_lengthscales)}}},
      {"mean_function", to_string(layer.mean_fn)},
      {"inducing_jitter", layer.inducing_jitter},
      {"whitened", layer.whitened},
      {"z", matrix_to_json(layer.z)},
      {"m", matrix_to_json(layer.m)},
      {"s_factor_raw", matrix_to_json(layer.s_factor_raw)},
  };
}

SvgpLayer layer_from_json(const json &j) {
  SvgpLayer layer;
  const json &k = j.at("kernel");
  layer.kernel.family = kernel_family_from_string(k.at("family").get<std::string>());
  layer.kernel.raw_variance = k.at("raw_variance").get<double>();
  layer.kernel.raw_lengthscales = vector_from_json(k.at("raw_lengthscales"));
  layer.mean_fn = mean_function_from_string(j.at("mean_function").get<std::string>());
  layer.inducing_jitter = j.at("inducing_jitter").get<double>();
  layer.whitened = j.at("whitened").get<bool>();
  layer.z = matrix_from_json(j.at("z"));
  layer.m = matrix_from_json(j.at("m"));
  layer.s_factor_raw = matrix_from_json(j.at("s_factor_raw"));
  return layer;
}

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_double(const std::string &s, std::size_t line) {
  // strtod accepts the shortest round-trip form format_double emits.
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw FormatError("csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

} // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path &path, const std::string &content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    }
    out << content;
    out.flush();
    if (!out) {
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_to_csv(const Dataset &data) {
  data.validate();
  std::string out;
  for (Eigen::Index j = 0; j < data.input_dim(); ++j) {
    out += "x_" + std::to_string(j + 1) + ",";
  }
  out += "y";
  if (data.labels) {
    out += ",label";
  }
  if (data.noiseless) {
    out += ",noiseless_y";
  }
  out += "\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.input_dim(); ++j) {
      out += format_double(data.x(i, j)) + ",";
    }
    out += format_double(data.y(i, 0));
    if (data.labels) {
      out += "," + std::to_string((*data.labels)[static_cast<std::size_t>(i)]);
    }
    if (data.noiseless) {
      out += "," + format_double((*data.noiseless)[i]);
    }
    out += "\n";
  }
  return out;
}

Dataset dataset_from_csv(const std::string &text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("csv: empty input");
  }
  const std::vector<std::string> header = split_csv_line(line);
  Eigen::Index d = 0;
  while (static_cast<std::size_t>(d) < header.size() &&
         header[static_cast<std::size_t>(d)] == "x_" + std::to_string(d + 1)) {
    ++d;
  }
  std::size_t col = static_cast<std::size_t>(d);
  if (d == 0 || col >= header.size() || header[col] != "y") {
    throw FormatError("csv: header must be x_1..x_D,y[,label][,noiseless_y]");
  }
  ++col;
  const bool has_label = col < header.size() && header[col] == "label";
  col += has_label ? 1 : 0;
  const bool has_noiseless = col < header.size() && header[col] == "noiseless_y";
  col += has_noiseless ? 1 : 0;
  if (col != header.size()) {
    throw FormatError("csv: unexpected column '" + header[col] + "'");
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw FormatError("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
    std::vector<double> row;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (has_label && f == static_cast<std::size_t>(d) + 1) {
        labels.push_back(static_cast<int>(parse_double(fields[f], line_no)));
      } else {
        row.push_back(parse_double(fields[f], line_no));
      }
    }
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  if (n == 0) {
    throw FormatError("csv: no data rows");
  }
  Dataset data;
  data.x.resize(n, d);
  data.y.resize(n, 1);
  if (has_noiseless) {
    data.noiseless = Vector(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &row = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) {
      data.x(i, j) = row[static_cast<std::size_t>(j)];
    }
    data.y(i, 0) = row[static_cast<std::size_t>(d)];
    if (has_noiseless) {
      (*data.noiseless)[i] = row[static_cast<std::size_t>(d) + 1];
    }
  }
  if (has_label) {
    data.labels = std::move(labels);
  }
  data.validate();
  return data;
}

void save_dataset(const std::filesystem::path &path, const Dataset &data) {
  write_file_atomic(path, dataset_to_csv(data));
}

Dataset load_dataset(const std::filesystem::path &path) {
  return dataset_from_csv(read_file(path));
}

std::filesystem::path metadata_path(const std::filesystem::path &csv_path) {
  std::filesystem::path out = csv_path;
  out.replace_extension(".meta.json");
  return out;
}

json model_to_json(const DagpModel &model) {
  model.validate();
  json functions = json::array();
  for (const auto &stack : model.functions) {
    json layers = json::array();
    for (const auto &layer : stack) {
      layers.push_back(layer_to_json(layer));
    }
    functions.push_back(std::move(layers));
  }
  json alphas = json::array();
  for (const auto &alpha : model.alphas) {
    alphas.push_back(layer_to_json(alpha));
  }
  json priors = json::array();
  for (const auto &prior : model.noise_priors) {
    priors.push_back(prior ? json{{"log_mean", prior->log_mean}, {"log_std", prior->log_std}}
                           : json(nullptr));
  }
  return {
      {"format", kFormat},
      {"version", kVersion},
      {"seed", model.seed},
      {"functions", std::move(functions)},
      {"alphas", std::move(alphas)},
      {"raw_noises", vector_to_json(model.raw_noises)},
      {"noise_priors", std::move(priors)},
      {"belief_logits", matrix_to_json(model.belief.logits)},
  };
}

DagpModel model_from_json(const json &doc) {
  try {
    if (doc.at("format") != kFormat || doc.at("version") != kVersion) {
      throw FormatError("snapshot: unsupported format or version");
    }
    DagpModel model;
    model.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto &stack : doc.at("functions")) {
      DeepStack layers;
      for (const auto &layer : stack) {
        layers.push_back(layer_from_json(layer));
      }
      model.functions.push_back(std::move(layers));
    }
    for (const auto &alpha : doc.at("alphas")) {
      model.alphas.push_back(layer_from_json(alpha));
    }
    model.raw_noises = vector_from_json(doc.at("raw_noises"));
    for (const auto &prior : doc.at("noise_priors")) {
      if (prior.is_null()) {
        model.noise_priors.emplace_back();
      } else {
        model.noise_priors.push_back(NoisePrior{prior.at("log_mean").get<double>(),
                                                prior.at("log_std").get<double>()});
      }
    }
    model.belief.logits = matrix_from_json(doc.at("belief_logits"));
    model.validate();
    return model;
  } catch (const json::exception &e) {
    throw FormatError(std::string("snapshot: ") + e.what());
  }
}

void save_model(const std::filesystem::path &path, const DagpModel &model,
                const json &extra) {
  json doc = model_to_json(model);
  doc["extra"] = extra;
  write_file_atomic(path, doc.dump(1) + "\n");
}

DagpModel load_model(const std::filesystem::path &path, json *extra) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error &e) {
    throw FormatError(std::string("snapshot: ") + e.what());
  }
  DagpModel model = model_from_json(doc);
  if (extra != nullptr) {
    *extra = doc.value("extra", json::object());
  }
  return model;
}

} // namespace dagp
