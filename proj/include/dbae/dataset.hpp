// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>

#include "dbae/random.hpp"
#include "dbae/tensor.hpp"

namespace dbae {

struct Dataset {
  Tensor<float> x;                     // n x d
  std::optional<Tensor<float>> labels;  // n
};

/// two_moons, circles, eight_gaussians, checkerboard (2-D point clouds) and
/// shapes (8x8 grids, label 1 = square outline, 0 = plus sign).
Dataset make_toy(const std::string& name, std::size_t n, RandomStream& rng, double noise = -1.0);
bool is_toy_name(const std::string& name);

/// Sibling labels path: "dir/foo.dbt" -> "dir/foo.labels.dbt".
std::string labels_path_for(const std::string& path);

/// TensorFile (any extension) or, for ".csv", comma-separated rows. Labels
/// are read from the sibling path when it exists.
Dataset load_dataset(const std::string& path);
Tensor<double> parse_csv(const std::string& text, const std::string& what = "csv");
/// Writes data (and labels to the sibling path) as TensorFiles.
void save_dataset(const std::string& path, const Dataset& data);

void write_csv(const std::string& path, const Tensor<double>& x, const std::vector<std::string>& header = {});

/// Tiles side x side images (rows of `images`) into one binary PGM with
/// `per_row` tiles per row and a one-pixel gap; values clamped to [0, 1].
void write_pgm_grid(const std::string& path, const Tensor<double>& images, std::size_t side = 8,
                    std::size_t per_row = 16);

}  // namespace dbae
