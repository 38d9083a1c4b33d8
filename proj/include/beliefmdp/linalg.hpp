#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace beliefmdp {

// Small dense row-major matrix. Everything in this project is tiny
// (stochastic kernels, 1-2 dimensional filter covariances), so a plain
// vector-backed type beats pulling in a full linear-algebra dependency.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) {
      throw SchemaError("Matrix: data size does not match rows*cols");
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * cols, cols};
  }

  bool operator==(const Matrix&) const = default;
};

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw SchemaError("Matrix multiply: shape mismatch");
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw SchemaError("Matrix add: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
  return out;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw SchemaError("Matrix subtract: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

inline Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data) v *= s;
  return out;
}

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

inline std::vector<double> operator*(const Matrix& a, std::span<const double> x) {
  if (a.cols != x.size()) throw SchemaError("Matrix-vector multiply: shape mismatch");
  std::vector<double> out(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out[i] += a(i, j) * x[j];
  return out;
}

// Solve a X = b by LU with partial pivoting. Throws NumericalError when a is
// (numerically) singular.
inline Matrix solve(Matrix a, Matrix b) {
  if (a.rows != a.cols || a.rows != b.rows) throw SchemaError("solve: shape mismatch");
  const std::size_t n = a.rows;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::fabs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::fabs(a(i, k)) > best) {
        best = std::fabs(a(i, k));
        pivot = i;
      }
    }
    if (!(best > 1e-300)) throw NumericalError("solve: singular matrix");
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
      for (std::size_t j = 0; j < b.cols; ++j) std::swap(b(k, j), b(pivot, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < b.cols; ++j) b(i, j) -= f * b(k, j);
    }
  }
  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = b(kk, j);
      for (std::size_t i = kk + 1; i < n; ++i) s -= a(kk, i) * b(i, j);
      b(kk, j) = s / a(kk, kk);
    }
  }
  return b;
}

inline Matrix inverse(const Matrix& a) { return solve(a, Matrix::identity(a.rows)); }

// Lower-triangular Cholesky factor of a symmetric PSD matrix. Tolerates
// zero diagonal blocks (degenerate covariances) but rejects indefiniteness.
inline Matrix cholesky(const Matrix& a) {
  if (a.rows != a.cols) throw SchemaError("cholesky: matrix not square");
  const std::size_t n = a.rows;
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s < -1e-10) throw NumericalError("cholesky: matrix not PSD");
        l(i, i) = std::sqrt(std::max(s, 0.0));
      } else {
        l(i, j) = l(j, j) > 0.0 ? s / l(j, j) : 0.0;
      }
    }
  }
  return l;
}

inline void symmetrize(Matrix& a) {
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = i + 1; j < a.cols; ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
  const std::size_t n = a.rows;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  return eig;
}

}  // namespace beliefmdp
