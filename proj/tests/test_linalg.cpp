#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "nadmm/linalg.hpp"

using namespace nadmm::linalg;

TEST_CASE("rank of small matrices") {
  Matrix b(2, 1);
  b << 1, 1;
  CHECK(numeric_rank(b) == 1);
  Matrix d(2, 2);
  d << 1, 1, 1, 1;
  CHECK(numeric_rank(d) == 1);
  CHECK(numeric_rank(Matrix::Zero(3, 2)) == 0);
  CHECK(numeric_rank(Matrix::Identity(4, 4)) == 4);
}

TEST_CASE("null space basis is orthonormal and annihilated") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 50; ++trial) {
    const int rows = 1 + trial % 3, cols = 4 + trial % 2;
    Matrix m(rows, cols);
    for (auto& v : m.reshaped()) v = nd(rng);
    if (trial % 5 == 0) m.row(rows - 1) = m.row(0);  // rank deficiency
    const Matrix z = null_space_basis(m);
    CHECK(z.cols() == cols - numeric_rank(m));
    CHECK((m * z).norm() <= 1e-12 * std::max(1.0, m.norm()));
    CHECK((z.transpose() * z - Matrix::Identity(z.cols(), z.cols())).norm() <= 1e-12);
  }
  CHECK(null_space_basis(Matrix::Zero(0, 3)).isIdentity());
  CHECK(null_space_basis(Matrix::Identity(2, 2)).cols() == 0);
}

TEST_CASE("eigen helpers") {
  Matrix h(2, 2);
  h << -1, 0, 0, 1;
  CHECK(min_eigenvalue(h) == doctest::Approx(-1.0));
  const auto pair = min_eigenpair(h);
  CHECK(std::abs(pair.vector[0]) == doctest::Approx(1.0));
  CHECK(min_eigenvalue(Matrix(0, 0)) == std::numeric_limits<double>::infinity());
  Matrix a(2, 2);
  a << 3, 0, 0, 4;
  CHECK(spectral_norm(a) == doctest::Approx(4.0));
}

TEST_CASE("least squares solve and projection") {
  Matrix b(2, 1);
  b << 1, 1;
  const LeastSquares ls(b);
  Vector rhs(2);
  rhs << -1, -3;
  CHECK(ls.solve(rhs)[0] == doctest::Approx(-2.0));
  const Vector r = ls.project_out_range(rhs, b);
  CHECK((b.transpose() * r).norm() <= 1e-14);
}
