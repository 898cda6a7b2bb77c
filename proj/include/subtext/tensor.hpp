#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "subtext/common.hpp"

namespace subtext {

// Dense row-major 2-D tensor of doubles. Everything the LM needs is a
// matrix; vectors are 1xN.
struct Tensor {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols)
      : n_rows(rows), n_cols(cols), data(rows * cols, 0.0) {}
  Tensor(std::size_t rows, std::size_t cols, std::initializer_list<double> v)
      : n_rows(rows), n_cols(cols), data(v) {
    if (data.size() != rows * cols) throw Error("tensor literal size mismatch");
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor(rows, cols);
  }

  std::size_t numel() const { return data.size(); }
  bool same_shape(const Tensor& o) const {
    return n_rows == o.n_rows && n_cols == o.n_cols;
  }
  std::string shape_str() const {
    return std::to_string(n_rows) + "x" + std::to_string(n_cols);
  }

  double& at(std::size_t r, std::size_t c) { return data[r * n_cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * n_cols + c]; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Seeded Xavier-uniform fill: U(-sqrt(6/(fan_in+fan_out)), +...).
void xavier_fill(Tensor& t, Rng& rng);

// Row-wise softmax / log-softmax (max-subtracted, numerically safe).
Tensor softmax_rows(const Tensor& logits);
Tensor log_softmax_rows(const Tensor& logits);

double global_norm(const std::vector<const Tensor*>& grads);

}  // namespace subtext
