#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

#include "slfc/core/errors.hpp"

namespace slfc {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Shape metadata is carried with the
/// storage and checked on every operation.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix row_vector(const Vector& v) {
    Matrix m(1, v.size());
    m.data_ = v;
    return m;
  }

  static Matrix col_vector(const Vector& v) {
    Matrix m(v.size(), 1);
    m.data_ = v;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double& at(std::size_t i, std::size_t j) {
    if (i >= rows_ || j >= cols_) throw IndexError("Matrix::at out of range");
    return data_[i * cols_ + j];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  Vector row(std::size_t i) const {
    if (i >= rows_) throw IndexError("Matrix::row out of range");
    return Vector(data_.begin() + i * cols_, data_.begin() + (i + 1) * cols_);
  }

  void set_row(std::size_t i, const Vector& v) {
    if (i >= rows_ || v.size() != cols_) throw ShapeError("Matrix::set_row shape");
    std::copy(v.begin(), v.end(), data_.begin() + i * cols_);
  }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {
using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EigenMap = Eigen::Map<EigenRowMajor>;
using EigenConstMap = Eigen::Map<const EigenRowMajor>;

inline EigenConstMap as_eigen(const Matrix& m) {
  return EigenConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                       static_cast<Eigen::Index>(m.cols()));
}
inline EigenMap as_eigen(Matrix& m) {
  return EigenMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                  static_cast<Eigen::Index>(m.cols()));
}
}  // namespace detail

/// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  detail::as_eigen(c).noalias() = detail::as_eigen(a) * detail::as_eigen(b);
  return c;
}

/// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: inner dimensions differ");
  Matrix c(a.rows(), b.rows());
  detail::as_eigen(c).noalias() = detail::as_eigen(a) * detail::as_eigen(b).transpose();
  return c;
}

/// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: inner dimensions differ");
  Matrix c(a.cols(), b.cols());
  detail::as_eigen(c).noalias() = detail::as_eigen(a).transpose() * detail::as_eigen(b);
  return c;
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) throw ShapeError("matvec: dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
    y[i] = acc;
  }
  return y;
}

inline Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

inline double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) acc += m.data()[i] * m.data()[i];
  return std::sqrt(acc);
}

inline Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("vector add: length mismatch");
  Vector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

inline Vector sub(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("vector sub: length mismatch");
  Vector c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

inline double norm2(const Vector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double dist2(const Vector& a, const Vector& b) { return norm2(sub(a, b)); }

}  // namespace slfc
