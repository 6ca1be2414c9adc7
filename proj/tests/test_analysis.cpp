#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "nadmm/analysis.hpp"
#include "nadmm/linalg.hpp"
#include "support.hpp"

using namespace nadmm;
using namespace nadmm::analysis;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Problem scalar(const std::string& f, std::vector<std::string> constraints = {}) {
  Problem p;
  p.x_names = {"x"};
  p.y_names = {"y"};
  p.objective = parse_expr_text(f);
  for (const auto& c : constraints) p.constraints.push_back(parse_expr_text(c));
  p.A = Matrix::Constant(1, 1, 1.0);
  p.B = Matrix::Constant(1, 1, -1.0);
  p.b = Vector::Zero(1);
  return p;
}

Iterate iterate(const Vector& y, const Vector& lambda, double q_norm = 0.0) {
  Iterate it;
  it.y = y;
  it.lambda = lambda;
  it.q_norm = q_norm;
  return it;
}

Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> nd;
  Matrix m(r, c);
  for (auto& v : m.reshaped()) v = nd(rng);
  return m;
}

}  // namespace

TEST_CASE("check_kkt at and near the solution") {
  const Problem p = scalar("(x - 1)^2");
  const auto at = check_kkt(p, vec({1}), vec({1}), Vector(0), vec({0}));
  CHECK(at.max() <= 1e-12);
  const auto near = check_kkt(p, vec({1.001}), vec({1}), Vector(0), vec({0}));
  CHECK(near.stationarity_x == doctest::Approx(2e-3).epsilon(1e-6));
  CHECK(near.coupling == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("check_kkt matches a direct evaluation at random points") {
  const Problem p = testing::load_fixture("two_block_quartic.json");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(4), y(1), mu(2), lambda(2);
    for (auto* v : {&x, &y, &mu, &lambda})
      for (auto& e : *v) e = u(rng);
    const double a1 = x[0], b1 = x[1], a2 = x[2], b2 = x[3];
    // hand-written gradients of the fixture
    Vector g(4);
    g << 4 * a1 * (a1 * a1 - 1) + 2 * a1 * mu[0] + lambda[0], 2 * (b1 - 1) + 2 * b1 * mu[0],
        4 * a2 * (a2 * a2 - 1) + 2 * a2 * mu[1] + lambda[1], (b2 + 1) + 2 * b2 * mu[1];
    const Vector c = vec({a1 * a1 + b1 * b1 - 2, a2 * a2 + b2 * b2 - 2});
    const Vector coupling = vec({a1 - y[0], a2 - y[0]});
    const auto rep = check_kkt(p, x, y, mu, lambda);
    CHECK(rep.stationarity_x == doctest::Approx(g.norm()).epsilon(1e-12));
    CHECK(rep.stationarity_y == doctest::Approx(std::abs(lambda[0] + lambda[1])).epsilon(1e-12));
    CHECK(rep.constraint == doctest::Approx(c.norm()).epsilon(1e-12));
    CHECK(rep.coupling == doctest::Approx(coupling.norm()).epsilon(1e-12));
  }
}

TEST_CASE("LICQ examples") {
  const Problem p = scalar("(x - 2)^2", {"x^2 - 1"});
  const Matrix C = constraint_matrix(p, vec({1}));
  CHECK(C == (Matrix(2, 2) << 2, 0, 1, -1).finished());
  const auto ok = check_licq(p, vec({1}));
  CHECK(ok.ok);
  CHECK(ok.rank == 2);
  const auto bad = check_licq(p, vec({0}));
  CHECK_FALSE(bad.ok);
  CHECK(bad.rank == 1);

  const Problem dup = scalar("x^2", {"x^2 - 1", "x^2 - 1"});
  CHECK_FALSE(check_licq(dup, vec({1})).ok);
}

TEST_CASE("SOSC examples") {
  const auto convex = check_sosc(scalar("(x - 1)^2"), vec({1}), Vector(0));
  CHECK(convex.overall_ok);
  CHECK(convex.min_projected_eigenvalue == doctest::Approx(1.0));

  const auto concave = check_sosc(scalar("-x^2"), vec({0}), Vector(0));
  CHECK_FALSE(concave.overall_ok);
  CHECK(concave.min_projected_eigenvalue == doctest::Approx(-1.0));

  // stationarity -2x + 2 x mu = 0 at x = 1 gives mu = 1
  const auto vacuous = check_sosc(scalar("-x^2", {"x^2 - 1"}), vec({1}), vec({1}), 0.5);
  REQUIRE(vacuous.subproblem_ok);
  CHECK(*vacuous.subproblem_ok);
  CHECK(std::isinf(*vacuous.subproblem_min_eigenvalue));
}

TEST_CASE("critical_rho examples") {
  const Matrix H = Eigen::Vector2d(-1, 1).asDiagonal();
  const Matrix none(0, 2);
  CHECK(critical_rho(H, none, (Matrix(1, 2) << 1, 0).finished()) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(critical_rho(Matrix::Identity(2, 2), none, (Matrix(1, 2) << 3, 4).finished()) == 0.0);
  try {
    critical_rho(H, none, (Matrix(1, 2) << 0, 1).finished());
    FAIL("expected HypothesisViolation");
  } catch (const HypothesisViolation& e) {
    CHECK(std::abs(e.direction()[0]) == doctest::Approx(1.0));
    CHECK(e.curvature() == doctest::Approx(-1.0));
  }
}

TEST_CASE("critical_rho bisection certificate on random instances") {
  std::mt19937_64 rng(2024);
  int positive = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3 + trial % 3, nc = trial % 2, nd = 1 + trial % 2;
    Matrix H = random_matrix(rng, n, n);
    H = 0.5 * (H + H.transpose());
    const Matrix C = random_matrix(rng, nc, n);
    const Matrix D = random_matrix(rng, nd, n);
    Matrix stacked(nc + nd, n);
    stacked << C, D;
    const Matrix Z = linalg::null_space_basis(stacked);
    // make H positive definite on null([C; D]) by adding curvature there
    if (Z.cols() > 0) H += Z * Z.transpose() * (1.0 + std::max(0.0, -linalg::min_eigenvalue(Z.transpose() * H * Z)));
    const double rs = critical_rho(H, C, D);
    REQUIRE(std::isfinite(rs));
    CHECK(projected_min_eigenvalue(H, C, D, 1.01 * rs + 1e-12) > 0.0);
    if (rs > 0) {
      ++positive;
      CHECK(projected_min_eigenvalue(H, C, D, 0.5 * rs) <= 1e-9);
    }
  }
  CHECK(positive > 50);
}

TEST_CASE("lyapunov and rho_norm") {
  const Matrix I = Matrix::Identity(2, 2);
  CHECK(lyapunov(vec({1, 2}), vec({3, 4}), vec({1, 2}), vec({3, 4}), I, 2.0) == 0.0);
  CHECK(lyapunov(vec({1, 0}), vec({2, 0}), vec({0, 0}), vec({0, 0}), I, 4.0) == doctest::Approx(5.0));
  CHECK(rho_norm(vec({0, 0}), vec({0, 0}), I, 3.0) == 0.0);

  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix B = random_matrix(rng, 3, 2);
    const double rho = std::exp(std::normal_distribution<double>(0, 2)(rng));
    const Vector y = random_matrix(rng, 2, 1), yr = random_matrix(rng, 2, 1), y2 = random_matrix(rng, 2, 1);
    const Vector l = random_matrix(rng, 3, 1), lr = random_matrix(rng, 3, 1), l2 = random_matrix(rng, 3, 1);
    const double d = rho_norm(y - yr, l - lr, B, rho);
    CHECK(lyapunov(y, l, yr, lr, B, rho) == doctest::Approx(d * d).epsilon(1e-12));
    // norm axioms: homogeneity and the triangle inequality
    CHECK(rho_norm(-2.5 * y, -2.5 * l, B, rho) == doctest::Approx(2.5 * rho_norm(y, l, B, rho)).epsilon(1e-12));
    CHECK(rho_norm(y + y2, l + l2, B, rho) <= rho_norm(y, l, B, rho) + rho_norm(y2, l2, B, rho) + 1e-12);
    CHECK(rho_norm(y, l, B, rho) >= 0.0);
  }
}

TEST_CASE("verify_decrease_bound edge cases") {
  const Matrix B = Matrix::Identity(1, 1);
  const auto single = verify_decrease_bound({iterate(vec({1}), vec({1}))}, vec({0}), vec({0}), B, 1.0);
  CHECK(single.V.size() == 1);
  CHECK(single.slack.empty());

  std::vector<Iterate> fixed(4, iterate(vec({2}), vec({-1})));
  const auto s = verify_decrease_bound(fixed, vec({2}), vec({-1}), B, 5.0);
  for (double v : s.slack) CHECK(v == 0.0);
  CHECK(s.entry_index == 0);

  // an increase in V at the last pair places the entry index at the end
  std::vector<Iterate> rising = {iterate(vec({0.1}), vec({0})), iterate(vec({1}), vec({0}))};
  CHECK(verify_decrease_bound(rising, vec({0}), vec({0}), B, 1.0).entry_index == 1);
}

TEST_CASE("convergence_rate edge cases") {
  const Matrix B = Matrix::Identity(1, 1);
  std::vector<Iterate> finite = {iterate(vec({1}), vec({0})), iterate(vec({0}), vec({0})),
                                 iterate(vec({0}), vec({0}))};
  const auto r = convergence_rate(finite, vec({0}), vec({0}), B, 1.0);
  REQUIRE(r.size() == 1);
  CHECK(r[0].k == 1);
  CHECK(r[0].ratio == 0.0);

  std::vector<Iterate> constant(5, iterate(vec({1}), vec({2})));
  for (const auto& e : convergence_rate(constant, vec({0}), vec({0}), B, 3.0)) CHECK(e.ratio == 1.0);
}

TEST_CASE("reference_solution on small problems") {
  const auto qp = reference_solution(scalar("(x - 1)^2"));
  REQUIRE(qp.size() == 1);
  CHECK(qp[0].x[0] == doctest::Approx(1.0));
  CHECK(qp[0].y[0] == doctest::Approx(1.0));
  CHECK(std::abs(qp[0].lambda[0]) <= 1e-10);

  const auto basin = reference_solution(testing::load_fixture("basin.json"));
  REQUIRE(basin.size() == 2);
  std::vector<double> xs = {basin[0].x[0], basin[1].x[0]};
  std::sort(xs.begin(), xs.end());
  CHECK(xs[0] == doctest::Approx(-1.0));
  CHECK(xs[1] == doctest::Approx(1.0));
}

TEST_CASE("reference_solution matches a grid search") {
  // KKT points of min f(x) s.t. x - y = 0 are the stationary points of f.
  const std::string f = "x^4 - 3 * x^2 + x";
  ReferenceOptions opts;
  opts.n_starts = 40;
  const auto refs = reference_solution(scalar(f), opts);

  // grid over [-3, 3] at spacing 1e-3; roots of f' located by linear interpolation of sign changes
  auto fp = [](double x) { return 4 * x * x * x - 6 * x + 1; };
  std::vector<double> roots;
  const double h = 1e-3;
  for (int i = -3000; i < 3000; ++i) {
    const double a = i * h, b = (i + 1) * h;
    if (fp(a) == 0.0 || fp(a) * fp(b) < 0) roots.push_back(a - fp(a) * (b - a) / (fp(b) - fp(a)));
  }
  REQUIRE(roots.size() == 3);
  REQUIRE(refs.size() == roots.size());
  std::vector<double> found;
  for (const auto& r : refs) found.push_back(r.x[0]);
  std::sort(found.begin(), found.end());
  for (std::size_t i = 0; i < roots.size(); ++i) CHECK(std::abs(found[i] - roots[i]) <= 1e-4);
}

TEST_CASE("reference points satisfy KKT and imply subproblem SOSC above the critical penalty") {
  for (const char* file : {"consensus_qp.json", "basin.json", "two_block_quartic.json", "shared_budget.json",
                           "inequality.json"}) {
    INFO(file);
    const Problem p = testing::load_fixture(file);
    const auto refs = reference_solution(p);
    CHECK_FALSE(refs.empty());
    for (const auto& r : refs) {
      const auto kkt = check_kkt(p, r.x, r.y, r.mu, r.lambda);
      CHECK(kkt.max() <= 1e-10);
      if (!r.sosc.overall_ok) continue;
      const auto reg = check_regularity(p, r.x, r.mu);
      REQUIRE(std::isfinite(reg.critical_rho));
      const double rho = 1.5 * reg.critical_rho + 1e-3;
      const auto s = check_sosc(p, r.x, r.mu, rho);
      REQUIRE(s.subproblem_ok);
      CHECK(*s.subproblem_ok);
    }
  }
}

TEST_CASE("reference_solution is deterministic and order-stable in parallel") {
  const Problem p = testing::load_fixture("two_block_quartic.json");
  ReferenceOptions serial;
  serial.seed = 9;
  ReferenceOptions par = serial;
  par.parallel = true;
  const auto a = reference_solution(p, serial);
  const auto b = reference_solution(p, par);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i].x - b[i].x).norm() == 0.0);
}
