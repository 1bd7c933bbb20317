// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dr3d/tensor.hpp"

namespace dr3d {

// 8-bit RGB PNG. Values are clamped to [0,1] and rounded to 0..255.
void write_png(const std::string& path, const Tensor& image);
Tensor read_png(const std::string& path);  // back to [0,1] doubles

// NPY v1.0, dtype <f4, C order. Depth maps save as shape (rows, cols);
// a Tensor saves as (channels, rows, cols).
void write_npy(const std::string& path, const Mat& m);
void write_npy(const std::string& path, const Tensor& t);
Mat read_npy_mat(const std::string& path);

// Writes to "<path>.tmp.<pid>" then renames, so readers never see a torn file.
void atomic_write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace dr3d
