#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "biortho/error.hpp"

namespace biortho {

using Matrix = Eigen::MatrixXd;

/// In-place LU factorization with partial pivoting, P m = L U.
struct LuFactors {
  Matrix lu;
  std::vector<Eigen::Index> perm;
  int sign = 1;
  /// Index of the first pivot below tolerance, or -1 when every pivot passed.
  Eigen::Index weak_pivot = -1;
};

namespace detail {

inline LuFactors lu_factor(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) throw DomainError("LU: matrix must be square");
  const Eigen::Index n = m.rows();
  LuFactors f{m, std::vector<Eigen::Index>(static_cast<std::size_t>(n)), 1, -1};
  Eigen::VectorXd row_norm(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    f.perm[static_cast<std::size_t>(i)] = i;
    row_norm(i) = m.row(i).cwiseAbs().maxCoeff();
  }
  Matrix& a = f.lu;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index p = k;
    for (Eigen::Index i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (p != k) {
      a.row(p).swap(a.row(k));
      std::swap(f.perm[static_cast<std::size_t>(p)], f.perm[static_cast<std::size_t>(k)]);
      std::swap(row_norm(p), row_norm(k));
      f.sign = -f.sign;
    }
    const double pivot = a(k, k);
    if (f.weak_pivot < 0 && !(std::abs(pivot) >= rel_tol * row_norm(k))) f.weak_pivot = k;
    if (pivot == 0.0) continue;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double l = a(i, k) / pivot;
      a(i, k) = l;
      if (l != 0.0) a.row(i).tail(n - k - 1) -= l * a.row(k).tail(n - k - 1);
    }
  }
  return f;
}

}  // namespace detail

inline constexpr double kPivotTolerance = 1e-13;

/// Signed determinant by LU with partial pivoting. Singular input yields 0 (or
/// a value at rounding level), never an error.
inline double det(const Matrix& m) {
  if (m.rows() != m.cols()) throw DomainError("det: matrix must be square");
  if (m.rows() == 0) return 1.0;
  const LuFactors f = detail::lu_factor(m, 0.0);
  double d = f.sign;
  for (Eigen::Index k = 0; k < m.rows(); ++k) d *= f.lu(k, k);
  return d;
}

/// log|det m| and its sign; sign is 0 for an exactly singular matrix.
struct LogDet {
  double log_abs;
  int sign;
};

inline LogDet log_det(const Matrix& m) {
  const LuFactors f = detail::lu_factor(m, 0.0);
  LogDet out{0.0, f.sign};
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    const double p = f.lu(k, k);
    if (p == 0.0) return {-std::numeric_limits<double>::infinity(), 0};
    out.log_abs += std::log(std::abs(p));
    if (p < 0) out.sign = -out.sign;
  }
  return out;
}

/// Solves m X = rhs. Throws SingularityError when a pivot drops below
/// 1e-13 times the norm of its row.
inline Matrix solve(const Matrix& m, const Matrix& rhs) {
  if (m.rows() != m.cols()) throw DomainError("solve: matrix must be square");
  if (rhs.rows() != m.rows()) throw DomainError("solve: dimension mismatch");
  const LuFactors f = detail::lu_factor(m, kPivotTolerance);
  if (f.weak_pivot >= 0)
    throw SingularityError("solve: matrix is singular to working precision",
                           static_cast<std::size_t>(f.weak_pivot));
  const Eigen::Index n = m.rows();
  Matrix x(n, rhs.cols());
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = rhs.row(f.perm[static_cast<std::size_t>(i)]);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) x.row(i) -= f.lu(i, j) * x.row(j);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index j = i + 1; j < n; ++j) x.row(i) -= f.lu(i, j) * x.row(j);
    x.row(i) /= f.lu(i, i);
  }
  return x;
}

inline Matrix inverse(const Matrix& m) {
  return solve(m, Matrix::Identity(m.rows(), m.cols()));
}

/// 1-norm condition number from an explicit inverse (small matrices only).
inline double condition_number(const Matrix& m) {
  const Matrix inv = inverse(m);
  const double a = m.cwiseAbs().colwise().sum().maxCoeff();
  const double b = inv.cwiseAbs().colwise().sum().maxCoeff();
  return a * b;
}

}  // namespace biortho
