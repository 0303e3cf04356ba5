#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "slfc/core/errors.hpp"
#include "slfc/core/matrix.hpp"

namespace slfc {

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// tol * sigma_max are treated as zero.
inline Matrix pinv(const Matrix& m, double tol = 1e-10) {
  if (m.rows() == 0 || m.cols() == 0) return transpose(m);
  Eigen::JacobiSVD<detail::EigenRowMajor> svd(
      detail::as_eigen(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double cutoff = tol * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::VectorXd inv_sv(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    inv_sv(i) = sv(i) > cutoff && sv(i) > 0.0 ? 1.0 / sv(i) : 0.0;
  Matrix out(m.cols(), m.rows());
  detail::as_eigen(out) =
      svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
  return out;
}

/// All eigenvalues of a square real matrix, with multiplicity.
inline std::vector<std::complex<double>> eigvals(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("eigvals: matrix must be square");
  std::vector<std::complex<double>> out;
  if (m.rows() == 0) return out;
  Eigen::EigenSolver<detail::EigenRowMajor> solver(detail::as_eigen(m), false);
  const auto& ev = solver.eigenvalues();
  out.reserve(static_cast<std::size_t>(ev.size()));
  for (Eigen::Index i = 0; i < ev.size(); ++i) out.push_back(ev(i));
  return out;
}

/// Spectral radius.
inline double spectral_radius(const Matrix& m) {
  double r = 0.0;
  for (const auto& ev : eigvals(m)) r = std::max(r, std::abs(ev));
  return r;
}

/// Minimum-norm least-squares solution of X * Theta = Y.
inline Matrix lstsq(const Matrix& x, const Matrix& y, double tol = 1e-10) {
  if (x.rows() != y.rows()) throw ShapeError("lstsq: row counts differ");
  return matmul(pinv(x, tol), y);
}

}  // namespace slfc
