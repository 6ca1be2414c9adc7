#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

namespace nadmm::linalg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Largest singular value; zero for empty matrices.
double spectral_norm(const Matrix& m);

/// Rank from column-pivoted QR: diagonal entries of R with magnitude above
/// rel_tol * ||m||_2 count.
Eigen::Index numeric_rank(const Matrix& m, double rel_tol = 1e-10);

/// Orthonormal basis of null(m) (columns), from QR of m^T. A matrix with no
/// rows yields the identity.
Matrix null_space_basis(const Matrix& m, double rel_tol = 1e-10);

/// Smallest eigenvalue of a symmetric matrix; +infinity when empty.
double min_eigenvalue(const Matrix& sym);

/// Smallest eigenvalue together with its unit eigenvector.
struct EigenPair {
  double value;
  Vector vector;
};
EigenPair min_eigenpair(const Matrix& sym);

/// Least-squares solve of min ||m y - rhs|| with a cached column-pivoted QR.
class LeastSquares {
 public:
  LeastSquares() = default;
  explicit LeastSquares(const Matrix& m) : qr_(m) {}

  Vector solve(const Vector& rhs) const { return qr_.solve(rhs); }
  /// Component of v orthogonal to range(m): v - m (m^T m)^{-1} m^T v.
  Vector project_out_range(const Vector& v, const Matrix& m) const { return v - m * solve(v); }

 private:
  Eigen::ColPivHouseholderQR<Matrix> qr_;
};

}  // namespace nadmm::linalg
