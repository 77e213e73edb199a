#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mcp/common.hpp"

namespace mcp::nn {

/// Dense row-major matrix. Every tensor in the library is 2-d; sequences of
/// vectors are packed row-wise and described by a separate layout.
template <typename T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  std::string shape_string() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }

  template <typename U>
  Matrix<U> cast() const {
    Matrix<U> out(rows, cols);
    std::transform(data.begin(), data.end(), out.data.begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  static Matrix from_rows(const std::vector<std::vector<T>>& rows_in) {
    Matrix m(rows_in.size(), rows_in.empty() ? 0 : rows_in.front().size());
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (rows_in[r].size() != m.cols) throw NumericError("ragged rows in Matrix::from_rows");
      std::copy(rows_in[r].begin(), rows_in[r].end(), m.row(r).begin());
    }
    return m;
  }
};

inline void require_shape(bool ok, const char* op, const std::string& a, const std::string& b) {
  if (!ok) throw NumericError(std::string("shape mismatch in ") + op + ": " + a + " vs " + b);
}

/// C (+)= op(A) * op(B) where op transposes when the flag is set.
template <typename T>
void gemm(const Matrix<T>& a, bool trans_a, const Matrix<T>& b, bool trans_b, Matrix<T>& c, bool accumulate) {
  const std::size_t m = trans_a ? a.cols : a.rows;
  const std::size_t k = trans_a ? a.rows : a.cols;
  const std::size_t kb = trans_b ? b.cols : b.rows;
  const std::size_t n = trans_b ? b.rows : b.cols;
  require_shape(k == kb, "gemm", a.shape_string(), b.shape_string());
  if (!accumulate || c.rows != m || c.cols != n) {
    if (accumulate && !c.empty()) require_shape(false, "gemm(out)", c.shape_string(), a.shape_string());
    c = Matrix<T>(m, n);
  }
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      T* ci = c.data.data() + i * n;
      const T* ai = a.data.data() + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = ai[p];
        const T* bp = b.data.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (std::size_t i = 0; i < m; ++i) {
      const T* ai = a.data.data() + i * k;
      T* ci = c.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const T* bj = b.data.data() + j * k;
        T acc = T(0);
        for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
        ci[j] += acc;
      }
    }
  } else if (trans_a && !trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const T* ap = a.data.data() + p * m;
      const T* bp = b.data.data() + p * n;
      for (std::size_t i = 0; i < m; ++i) {
        const T av = ap[i];
        T* ci = c.data.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        T acc = T(0);
        for (std::size_t p = 0; p < k; ++p) acc += a(p, i) * b(j, p);
        c(i, j) += acc;
      }
  }
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c;
  gemm(a, false, b, false, c, false);
  return c;
}

template <typename T>
void add_inplace(Matrix<T>& dst, const Matrix<T>& src) {
  require_shape(dst.same_shape(src), "add_inplace", dst.shape_string(), src.shape_string());
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
bool all_finite(const Matrix<T>& m) {
  return std::all_of(m.data.begin(), m.data.end(), [](T v) { return std::isfinite(v); });
}

/// Row-wise softmax, used for inference-only probability outputs.
template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& logits) {
  Matrix<T> out(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T total = T(0);
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (auto& v : o) v /= total;
  }
  return out;
}

}  // namespace mcp::nn
