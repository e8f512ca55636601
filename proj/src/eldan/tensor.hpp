// Copyright 2026 The ELDAN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace eldan {

using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool empty() const { return data.empty(); }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// out = W x + b
inline void affine(const Matrix& w, std::span<const double> x, std::span<const double> b,
                   std::span<double> out) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double* wr = w.data.data() + r * w.cols;
    double acc = b[r];
    for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// out += W^T g
inline void add_transposed_product(const Matrix& w, std::span<const double> g,
                                   std::span<double> out) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double gr = g[r];
    if (gr == 0.0) continue;
    const double* wr = w.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) out[c] += gr * wr[c];
  }
}

// W += scale * g x^T
inline void add_outer(Matrix& w, std::span<const double> g, std::span<const double> x,
                      double scale = 1.0) {
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double gr = scale * g[r];
    if (gr == 0.0) continue;
    double* wr = w.data.data() + r * w.cols;
    for (std::size_t c = 0; c < w.cols; ++c) wr[c] += gr * x[c];
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace eldan
