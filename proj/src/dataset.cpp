// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "dbae/tensor_file.hpp"

namespace dbae {

namespace {

constexpr const char* kToys[] = {"two_moons", "circles", "eight_gaussians", "checkerboard", "shapes"};

void shuffle_rows(Dataset& d, RandomStream& rng) {
  const std::size_t n = d.x.rows();
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
  d.x = d.x.gather_rows(perm);
  if (d.labels) {
    Tensor<float> l({n});
    for (std::size_t i = 0; i < n; ++i) l[i] = (*d.labels)[perm[i]];
    d.labels = std::move(l);
  }
}

void draw_shape(std::span<float> img, bool square, std::size_t size, std::size_t r0, std::size_t c0) {
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      const bool on = square ? (i == 0 || j == 0 || i + 1 == size || j + 1 == size)
                             : (i == size / 2 || j == size / 2);
      if (on) img[(r0 + i) * 8 + c0 + j] = 1.0f;
    }
  }
}

}  // namespace

bool is_toy_name(const std::string& name) {
  for (const char* t : kToys)
    if (name == t) return true;
  return false;
}

Dataset make_toy(const std::string& name, std::size_t n, RandomStream& rng, double noise) {
  if (n == 0) throw ConfigError("make_toy: n must be positive");
  Dataset d;
  Tensor<float> labels({n});
  const double pi = std::numbers::pi;
  if (name == "shapes") {
    const double sd = noise < 0 ? 0.0 : noise;
    d.x = Tensor<float>::matrix(n, 64);
    for (std::size_t i = 0; i < n; ++i) {
      const bool square = rng.uniform() < 0.5;
      const std::size_t size = 3 + 2 * rng.index(2);  // 3 or 5
      const std::size_t r0 = rng.index(8 - size + 1), c0 = rng.index(8 - size + 1);
      draw_shape(d.x.row(i), square, size, r0, c0);
      if (sd > 0)
        for (float& v : d.x.row(i)) v = static_cast<float>(v + sd * rng.normal());
      labels[i] = square ? 1.0f : 0.0f;
    }
    d.labels = std::move(labels);
    return d;
  }
  d.x = Tensor<float>::matrix(n, 2);
  const double sd = noise < 0 ? 0.05 : noise;
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0, y = 0, label = 0;
    if (name == "two_moons") {
      const bool upper = i < (n + 1) / 2;
      const double th = pi * rng.uniform();
      if (upper) x = std::cos(th), y = std::sin(th);
      else x = 1.0 - std::cos(th), y = 0.5 - std::sin(th);
      x -= 0.5;
      y -= 0.25;
      label = upper ? 0.0 : 1.0;
    } else if (name == "circles") {
      const bool inner = i % 2 == 1;
      const double th = 2 * pi * rng.uniform();
      const double r = inner ? 0.5 : 1.0;
      x = r * std::cos(th), y = r * std::sin(th);
      label = inner ? 1.0 : 0.0;
    } else if (name == "eight_gaussians") {
      const std::size_t k = rng.index(8);
      const double th = 2 * pi * static_cast<double>(k) / 8.0;
      x = std::cos(th), y = std::sin(th);
      label = static_cast<double>(k % 2);
    } else if (name == "checkerboard") {
      const double u = rng.uniform(-2.0, 2.0);
      const double v = rng.uniform() - 2.0 * static_cast<double>(rng.index(2));
      const double shift = static_cast<double>(static_cast<long>(std::floor(u)) & 1);
      x = u / 2.0, y = (v + shift) / 2.0;
      label = static_cast<double>((static_cast<long>(std::floor(u)) + static_cast<long>(std::floor(v + shift))) & 1);
    } else {
      throw ConfigError("unknown toy dataset '" + name + "'");
    }
    d.x(i, 0) = static_cast<float>(x + sd * rng.normal());
    d.x(i, 1) = static_cast<float>(y + sd * rng.normal());
    labels[i] = static_cast<float>(label);
  }
  d.labels = std::move(labels);
  shuffle_rows(d, rng);
  return d;
}

std::string labels_path_for(const std::string& path) {
  const std::filesystem::path p(path);
  return (p.parent_path() / (p.stem().string() + ".labels" + p.extension().string())).string();
}

Tensor<double> parse_csv(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::istringstream fields(line);
    std::string field;
    bool numeric = true;
    while (std::getline(fields, field, ',')) {
      // Accept a Unicode minus as used in hand-written data.
      for (std::size_t pos; (pos = field.find("\xe2\x88\x92")) != std::string::npos;) field.replace(pos, 3, "-");
      std::size_t used = 0;
      try {
        row.push_back(std::stod(field, &used));
        if (field.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!line.empty() && line.back() == ',') numeric = false;
    if (!numeric) {
      if (rows == 0 && values.empty() && line_no == 1) continue;  // header
      throw DataError(what + ": line " + std::to_string(line_no) + " is not numeric");
    }
    if (rows == 0) cols = row.size();
    else if (row.size() != cols)
      throw RaggedCsvError(what + ": line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                           " fields, expected " + std::to_string(cols));
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw DataError(what + ": no data rows");
  return Tensor<double>({rows, cols}, std::move(values));
}

Dataset load_dataset(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("dataset not found: " + path);
  Dataset d;
  const bool csv = std::filesystem::path(path).extension() == ".csv";
  auto load_one = [&](const std::string& p) -> Tensor<float> {
    if (csv) {
      const std::vector<std::uint8_t> bytes = read_file_bytes(p);
      return parse_csv(std::string(bytes.begin(), bytes.end()), p).cast<float>();
    }
    return read_tensor_file(p).as<float>();
  };
  d.x = load_one(path).as_matrix();
  const std::string lp = labels_path_for(path);
  if (std::filesystem::exists(lp)) {
    Tensor<float> l = load_one(lp);
    if (l.size() != d.x.rows())
      throw DataError(lp + ": " + std::to_string(l.size()) + " labels for " + std::to_string(d.x.rows()) + " rows");
    d.labels = l.reshaped({l.size()});
  }
  return d;
}

void save_dataset(const std::string& path, const Dataset& data) {
  write_tensor_file(path, data.x);
  if (data.labels) write_tensor_file(labels_path_for(path), *data.labels);
}

void write_csv(const std::string& path, const Tensor<double>& x, const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  const Tensor<double> m = x.as_matrix();
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  if (!header.empty()) out << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t k = 0; k < m.cols(); ++k) out << (k ? "," : "") << m(i, k);
    out << '\n';
  }
}

void write_pgm_grid(const std::string& path, const Tensor<double>& images, std::size_t side, std::size_t per_row) {
  const Tensor<double> m = images.as_matrix();
  if (m.cols() != side * side) throw ShapeError("write_pgm_grid: rows must hold side*side pixels");
  const std::size_t n = m.rows();
  const std::size_t tiles_x = std::min(per_row, n), tiles_y = (n + per_row - 1) / per_row;
  const std::size_t width = tiles_x * (side + 1) + 1, height = tiles_y * (side + 1) + 1;
  std::vector<std::uint8_t> pixels(width * height, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t oy = (k / per_row) * (side + 1) + 1, ox = (k % per_row) * (side + 1) + 1;
    for (std::size_t i = 0; i < side; ++i)
      for (std::size_t j = 0; j < side; ++j) {
        const double v = std::clamp(m(k, i * side + j), 0.0, 1.0);
        pixels[(oy + i) * width + ox + j] = static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

}  // namespace dbae
