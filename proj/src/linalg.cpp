#include "nadmm/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace nadmm::linalg {

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

namespace {

Eigen::Index rank_from_qr(const Eigen::ColPivHouseholderQR<Matrix>& qr, double tol) {
  const Matrix& r = qr.matrixQR();
  const Eigen::Index diag = std::min(r.rows(), r.cols());
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < diag; ++i) {
    if (std::abs(r(i, i)) > tol) ++rank;
  }
  return rank;
}

}  // namespace

Eigen::Index numeric_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  const double norm = spectral_norm(m);
  if (norm == 0.0) return 0;
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  return rank_from_qr(qr, rel_tol * norm);
}

Matrix null_space_basis(const Matrix& m, double rel_tol) {
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return Matrix::Identity(n, n);
  const double norm = spectral_norm(m);
  if (norm == 0.0) return Matrix::Identity(n, n);
  // m^T P = Q R: the leading rank columns of Q span range(m^T) = null(m)^perp.
  Eigen::ColPivHouseholderQR<Matrix> qr(m.transpose());
  const Eigen::Index rank = rank_from_qr(qr, rel_tol * norm);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - rank);
}

double min_eigenvalue(const Matrix& sym) {
  if (sym.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

EigenPair min_eigenpair(const Matrix& sym) {
  if (sym.rows() == 0) return {std::numeric_limits<double>::infinity(), Vector()};
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  return {es.eigenvalues()(0), es.eigenvectors().col(0)};
}

}  // namespace nadmm::linalg
