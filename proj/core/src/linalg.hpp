#pragma once

#include "supcp/tensor.hpp"

#include <span>
#include <vector>

namespace supcp {

/// rhs * h^{-1} for symmetric positive (semi)definite h. If the Cholesky
/// factorization fails, h is ridge-stabilized with 1e-12 * trace(h) and
/// `jittered` is set.
inline Matrix solve_spd_right(const Matrix& rhs, const Matrix& h, bool& jittered) {
  jittered = false;
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) {
    jittered = true;
    const double jitter = 1e-12 * std::max(h.trace(), 1e-300);
    Matrix ridged = h;
    ridged.diagonal().array() += jitter;
    llt.compute(ridged);
    if (llt.info() != Eigen::Success) {
      // Fall back to a pseudo-inverse when the ridge is not enough.
      return rhs * ridged.completeOrthogonalDecomposition().pseudoInverse();
    }
  }
  return llt.solve(rhs.transpose()).transpose();
}

inline Matrix permute_columns(const Matrix& m, std::span<const Eigen::Index> order) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t j = 0; j < order.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = m.col(order[j]);
  return out;
}

inline Matrix permute_symmetric(const Matrix& m, std::span<const Eigen::Index> order) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i)
    for (std::size_t j = 0; j < order.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(order[i], order[j]);
  return out;
}

/// Symmetric PSD square root with negative eigenvalues clamped to zero.
/// Also reports the extreme eigenvalues of the symmetrized input.
struct PsdRoot {
  Matrix root;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

inline PsdRoot psd_sqrt(const Matrix& s) {
  PsdRoot out;
  if (s.rows() == 0) {
    out.root = Matrix(0, 0);
    return out;
  }
  if (s.isDiagonal(0.0)) {
    const Vector diag = s.diagonal();
    out.min_eigenvalue = diag.minCoeff();
    out.max_eigenvalue = diag.maxCoeff();
    out.root = diag.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    return out;
  }
  const Matrix sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector& values = eig.eigenvalues();
  out.min_eigenvalue = values.minCoeff();
  out.max_eigenvalue = values.maxCoeff();
  const Vector roots = values.cwiseMax(0.0).cwiseSqrt();
  out.root = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
  return out;
}

}  // namespace supcp
