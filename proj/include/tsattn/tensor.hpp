// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The tsattn Authors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tsattn/errors.hpp"

namespace tsattn {

/// Dense row-major 2-D matrix. `Tensor2` (float) is the storage type used
/// for files and public results; `Matrix<double>` carries the dense
/// bias/reinforcement terms and high-precision attention.
template <class T>
class Matrix {
  static_assert(std::is_floating_point_v<T>);

 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }

  /// Row-major nested initializer, handy in tests.
  static Matrix from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged matrix initializer");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  /// Rows [begin, end) as a new matrix.
  Matrix row_block(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows_) throw ShapeError("row block out of range");
    return Matrix(end - begin, cols_,
                  std::vector<T>(data_.begin() + begin * cols_, data_.begin() + end * cols_));
  }

  template <class U>
  Matrix<U> cast() const {
    return Matrix<U>(rows_, cols_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Tensor2 = Matrix<float>;

enum class Reduce { kMax, kMin, kMean };

namespace detail {

/// Numerically stable softmax of one row; sums accumulate in double.
template <class In, class Out>
void softmax_row(std::span<const In> in, std::span<Out> out) {
  const In peak = *std::max_element(in.begin(), in.end());
  double total = 0.0;
  for (std::size_t y = 0; y < in.size(); ++y) {
    total += std::exp(static_cast<double>(in[y]) - static_cast<double>(peak));
  }
  for (std::size_t y = 0; y < in.size(); ++y) {
    out[y] = static_cast<Out>(
        std::exp(static_cast<double>(in[y]) - static_cast<double>(peak)) / total);
  }
}

template <class T>
double reduce_row(std::span<const T> row, Reduce kind) {
  switch (kind) {
    case Reduce::kMax:
      return static_cast<double>(*std::max_element(row.begin(), row.end()));
    case Reduce::kMin:
      return static_cast<double>(*std::min_element(row.begin(), row.end()));
    case Reduce::kMean: {
      double sum = 0.0;
      for (T v : row) sum += static_cast<double>(v);
      return sum / static_cast<double>(row.size());
    }
  }
  return 0.0;
}

}  // namespace detail

/// Unscaled attention logits: result[x, y] = <Q[x], K[y]>.
inline Tensor2 matmul_qk(const Tensor2& q, const Tensor2& k) {
  if (q.cols() != k.cols()) {
    throw ShapeError("matmul_qk: Q has " + std::to_string(q.cols()) + " columns, K has " +
                     std::to_string(k.cols()));
  }
  const std::size_t n = q.rows();
  const std::size_t m = k.rows();
  const std::size_t d = q.cols();
  Tensor2 out(n, m);
  for (std::size_t x = 0; x < n; ++x) {
    const float* qrow = q.row(x).data();
    float* orow = out.row(x).data();
    for (std::size_t y = 0; y < m; ++y) {
      const float* krow = k.row(y).data();
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        acc += static_cast<double>(qrow[c]) * static_cast<double>(krow[c]);
      }
      orow[y] = static_cast<float>(acc);
    }
  }
  return out;
}

template <class T>
Matrix<T> row_softmax(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows(), logits.cols());
  if (logits.cols() == 0) return out;
  for (std::size_t x = 0; x < logits.rows(); ++x) {
    detail::softmax_row<T, T>(logits.row(x), out.row(x));
  }
  return out;
}

/// Per-row max, min or mean over all columns.
template <class T>
std::vector<double> row_reduce(const Matrix<T>& m, Reduce kind) {
  if (m.cols() == 0) throw ShapeError("row_reduce: matrix has no columns");
  std::vector<double> out(m.rows());
  for (std::size_t x = 0; x < m.rows(); ++x) out[x] = detail::reduce_row(m.row(x), kind);
  return out;
}

/// softmax(QK^T / sqrt(d)) accumulated in double.
template <class Out = float>
Matrix<Out> vanilla_attention(const Tensor2& q, const Tensor2& k) {
  const Tensor2 logits = matmul_qk(q, k);
  const double sqrt_d = std::sqrt(static_cast<double>(q.cols()));
  Matrix<Out> out(logits.rows(), logits.cols());
  std::vector<double> z(logits.cols());
  if (logits.cols() == 0) return out;
  for (std::size_t x = 0; x < logits.rows(); ++x) {
    const auto row = logits.row(x);
    for (std::size_t y = 0; y < row.size(); ++y) z[y] = static_cast<double>(row[y]) / sqrt_d;
    detail::softmax_row<double, Out>(z, out.row(x));
  }
  return out;
}

template <class T>
double max_abs_diff(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  }
  return worst;
}

}  // namespace tsattn
