#include "nadmm/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "fmt/format.h"
#include "nadmm/linalg.hpp"
#include "nadmm/nlpsolve.hpp"

namespace nadmm::analysis {

double KktReport::max() const { return std::max({stationarity_x, stationarity_y, constraint, coupling}); }

KktReport check_kkt(const Problem& prob, const Vector& x, const Vector& y, const Vector& mu, const Vector& lambda) {
  const ProblemFunctions fns(prob);
  KktReport rep;
  rep.stationarity_x =
      (fns.objective_gradient(x) + fns.constraint_jacobian(x).transpose() * mu + prob.A.transpose() * lambda).norm();
  rep.stationarity_y = (prob.B.transpose() * lambda).norm();
  rep.constraint = fns.constraint_values(x).norm();
  rep.coupling = (prob.A * x + prob.B * y - prob.b).norm();
  return rep;
}

Matrix constraint_matrix(const Problem& prob, const Vector& x) {
  const ProblemFunctions fns(prob);
  const int n = prob.n(), m = prob.m(), p = prob.p(), q = prob.q();
  Matrix C = Matrix::Zero(p + q, n + m);
  if (p > 0) C.topLeftCorner(p, n) = fns.constraint_jacobian(x);
  C.bottomLeftCorner(q, n) = prob.A;
  C.bottomRightCorner(q, m) = prob.B;
  return C;
}

LicqResult check_licq(const Problem& prob, const Vector& x) {
  const Matrix C = constraint_matrix(prob, x);
  LicqResult res;
  res.rows = static_cast<int>(C.rows());
  res.rank = static_cast<int>(linalg::numeric_rank(C, 1e-10));
  res.ok = res.rank == res.rows;
  return res;
}

namespace {

double projected_min(const Matrix& H, const Matrix& Z) {
  if (Z.cols() == 0) return std::numeric_limits<double>::infinity();
  const Matrix reduced = Z.transpose() * H * Z;
  return linalg::min_eigenvalue(0.5 * (reduced + reduced.transpose()));
}

}  // namespace

SoscResult check_sosc(const Problem& prob, const Vector& x, const Vector& mu, std::optional<double> rho) {
  const ProblemFunctions fns(prob);
  const int n = prob.n(), m = prob.m();
  const Matrix Hxx = fns.lagrangian_hessian(x, mu);
  Matrix H = Matrix::Zero(n + m, n + m);
  H.topLeftCorner(n, n) = Hxx;

  SoscResult res;
  res.min_projected_eigenvalue = projected_min(H, linalg::null_space_basis(constraint_matrix(prob, x)));
  res.overall_ok = res.min_projected_eigenvalue > kPdThreshold;
  if (rho) {
    const Matrix Zx = linalg::null_space_basis(fns.constraint_jacobian(x));
    const Matrix Hsp = Hxx + *rho * prob.A.transpose() * prob.A;
    res.subproblem_min_eigenvalue = projected_min(Hsp, Zx);
    res.subproblem_ok = *res.subproblem_min_eigenvalue > kPdThreshold;
  }
  return res;
}

HypothesisViolation::HypothesisViolation(Vector direction, double curvature)
    : std::runtime_error(fmt::format("H is not positive definite on null([C; D]): curvature {:.6g} along a null "
                                     "direction",
                                     curvature)),
      direction_(std::move(direction)),
      curvature_(curvature) {}

double projected_min_eigenvalue(const Matrix& H, const Matrix& C_keep, const Matrix& D_pen, double rho) {
  const Matrix Z = linalg::null_space_basis(C_keep.rows() > 0 ? C_keep : Matrix::Zero(0, H.cols()));
  Matrix pen = H;
  if (D_pen.rows() > 0) pen += rho * D_pen.transpose() * D_pen;
  return projected_min(pen, Z);
}

// Below this the bracket is treated as having collapsed onto zero.
constexpr double kRhoFloor = 1e-12;

double critical_rho(const Matrix& H, const Matrix& C_keep, const Matrix& D_pen) {
  const Eigen::Index n = H.rows();
  if (H.cols() != n || (C_keep.rows() > 0 && C_keep.cols() != n) || (D_pen.rows() > 0 && D_pen.cols() != n))
    throw std::invalid_argument("critical_rho: H, C and D column counts differ");

  Matrix stacked(C_keep.rows() + D_pen.rows(), n);
  if (C_keep.rows() > 0) stacked.topRows(C_keep.rows()) = C_keep;
  if (D_pen.rows() > 0) stacked.bottomRows(D_pen.rows()) = D_pen;
  const Matrix Zs = linalg::null_space_basis(stacked);
  if (Zs.cols() > 0) {
    const Matrix reduced = Zs.transpose() * H * Zs;
    const auto pair = linalg::min_eigenpair(0.5 * (reduced + reduced.transpose()));
    if (pair.value <= kPdThreshold) throw HypothesisViolation(Zs * pair.vector, pair.value);
  }

  const Matrix Z = linalg::null_space_basis(C_keep.rows() > 0 ? C_keep : Matrix::Zero(0, n));
  if (Z.cols() == 0) return 0.0;
  const Matrix Hz = Z.transpose() * H * Z;
  const Matrix DtDz = D_pen.rows() > 0 ? Matrix(Z.transpose() * D_pen.transpose() * D_pen * Z)
                                       : Matrix::Zero(Z.cols(), Z.cols());
  auto lam = [&](double rho) {
    const Matrix M = Hz + rho * DtDz;
    return linalg::min_eigenvalue(0.5 * (M + M.transpose()));
  };

  if (lam(0.0) > 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (!(lam(hi) > 0.0)) {
    lo = hi;
    hi *= 10.0;
    if (hi > 1e12) return std::numeric_limits<double>::infinity();
  }
  while (hi - lo > 1e-6 * hi) {
    if (hi < kRhoFloor) return 0.0;
    const double mid = 0.5 * (lo + hi);
    if (lam(mid) > 0.0) hi = mid;
    else lo = mid;
  }
  return hi;
}

PenaltyData penalty_data(const Problem& prob, const Vector& x, const Vector& mu) {
  const ProblemFunctions fns(prob);
  const int n = prob.n(), m = prob.m(), p = prob.p(), q = prob.q();
  PenaltyData d;
  d.H = Matrix::Zero(n + m, n + m);
  d.H.topLeftCorner(n, n) = fns.lagrangian_hessian(x, mu);
  d.C_keep = Matrix::Zero(p, n + m);
  if (p > 0) d.C_keep.leftCols(n) = fns.constraint_jacobian(x);
  d.D_pen = Matrix(q, n + m);
  d.D_pen << prob.A, prob.B;
  return d;
}

RegularityReport check_regularity(const Problem& prob, const Vector& x, const Vector& mu, std::optional<double> rho) {
  RegularityReport rep;
  rep.licq = check_licq(prob, x);
  rep.sosc = check_sosc(prob, x, mu, rho);
  if (rep.sosc.overall_ok) {
    const auto d = penalty_data(prob, x, mu);
    try {
      rep.critical_rho = critical_rho(d.H, d.C_keep, d.D_pen);
    } catch (const HypothesisViolation&) {
      rep.critical_rho = std::numeric_limits<double>::infinity();
    }
  }
  return rep;
}

double lyapunov(const Vector& y, const Vector& lambda, const Vector& y_ref, const Vector& lambda_ref,
                const Matrix& B, double rho) {
  return (lambda - lambda_ref).squaredNorm() / rho + rho * (B * (y - y_ref)).squaredNorm();
}

double rho_norm(const Vector& y, const Vector& lambda, const Matrix& B, double rho) {
  return std::sqrt(rho * (B * y).squaredNorm() + lambda.squaredNorm() / rho);
}

LyapunovSeries verify_decrease_bound(const std::vector<Iterate>& iterates, const Vector& y_ref,
                                     const Vector& lambda_ref, const Matrix& B, double rho) {
  LyapunovSeries s;
  for (const auto& it : iterates) {
    s.V.push_back(lyapunov(it.y, it.lambda, y_ref, lambda_ref, B, rho));
    s.rho_distance.push_back(rho_norm(it.y - y_ref, it.lambda - lambda_ref, B, rho));
  }
  for (std::size_t i = 0; i + 1 < iterates.size(); ++i) {
    const double dy = (B * (iterates[i].y - iterates[i + 1].y)).squaredNorm();
    const double qn = iterates[i + 1].q_norm;
    s.slack.push_back(s.V[i] - s.V[i + 1] - rho * dy - 0.5 * rho * qn * qn);
  }
  s.entry_index = s.slack.size();
  for (std::size_t i = s.slack.size(); i-- > 0;) {
    if (s.slack[i] < -1e-9 * std::max(1.0, s.V[i])) break;
    s.entry_index = i;
  }
  return s;
}

std::vector<RateEntry> convergence_rate(const std::vector<Iterate>& iterates, const Vector& y_ref,
                                        const Vector& lambda_ref, const Matrix& B, double rho) {
  std::vector<RateEntry> out;
  if (iterates.empty()) return out;
  double prev = rho_norm(iterates[0].y - y_ref, iterates[0].lambda - lambda_ref, B, rho);
  for (std::size_t i = 1; i < iterates.size(); ++i) {
    if (prev < 1e-14) break;
    const double d = rho_norm(iterates[i].y - y_ref, iterates[i].lambda - lambda_ref, B, rho);
    out.push_back({static_cast<int>(i), d / prev});
    prev = d;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Multistart reference points

namespace {

double unit_uniform(std::uint64_t& state) {
  // splitmix64: portable across standard libraries.
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

NlpInstance full_kkt_instance(const Problem& prob, std::shared_ptr<const ProblemFunctions> fns) {
  const int n = prob.n(), m = prob.m(), p = prob.p(), q = prob.q();
  NlpInstance inst;
  inst.dim = n + m;
  inst.num_constraints = p + q;
  inst.objective = [fns, n](const Vector& z) { return fns->objective(z.head(n)); };
  inst.objective_gradient = [fns, n, m](const Vector& z) {
    Vector g = Vector::Zero(n + m);
    g.head(n) = fns->objective_gradient(z.head(n));
    return g;
  };
  inst.objective_hessian = [fns, n, m](const Vector& z) {
    Matrix h = Matrix::Zero(n + m, n + m);
    h.topLeftCorner(n, n) = fns->objective_hessian(z.head(n));
    return h;
  };
  const Matrix A = prob.A, B = prob.B;
  const Vector b = prob.b;
  inst.constraints = [fns, A, B, b, n, m, p, q](const Vector& z) {
    Vector c(p + q);
    if (p > 0) c.head(p) = fns->constraint_values(z.head(n));
    c.tail(q) = A * z.head(n) + B * z.tail(m) - b;
    return c;
  };
  inst.constraint_jacobian = [fns, A, B, n, m, p, q](const Vector& z) {
    Matrix J = Matrix::Zero(p + q, n + m);
    if (p > 0) J.topLeftCorner(p, n) = fns->constraint_jacobian(z.head(n));
    J.bottomLeftCorner(q, n) = A;
    J.bottomRightCorner(q, m) = B;
    return J;
  };
  inst.constraint_curvature = [fns, n, m, p](const Vector& z, const Vector& mu) {
    Matrix h = Matrix::Zero(n + m, n + m);
    if (p > 0) h.topLeftCorner(n, n) = fns->constraint_curvature(z.head(n), mu.head(p));
    return h;
  };
  return inst;
}

}  // namespace

std::vector<KktPoint> reference_solution(const Problem& prob, const ReferenceOptions& opts) {
  if (opts.n_starts < 1) throw std::invalid_argument("reference_solution needs at least one start");
  require_valid(prob);
  const int n = prob.n(), m = prob.m(), p = prob.p();
  auto fns = std::make_shared<const ProblemFunctions>(prob);
  const NlpInstance base = full_kkt_instance(prob, fns);

  std::vector<Vector> starts;
  std::uint64_t state = opts.seed;
  for (int s = 0; s < opts.n_starts; ++s) {
    Vector z(n + m);
    for (int i = 0; i < n + m; ++i) z[i] = opts.box * (2.0 * unit_uniform(state) - 1.0);
    starts.push_back(std::move(z));
  }

  NlpOptions nlp;
  nlp.tol_stat = 0.1 * opts.kkt_tolerance;
  nlp.tol_feas = 0.1 * opts.kkt_tolerance;
  nlp.max_iter = 200;
  nlp.minimizers_only = false;

  std::vector<NlpSolution> sols(starts.size());
  const auto count = static_cast<int>(starts.size());
  auto solve_one = [&](int s) {
    NlpInstance inst = base;
    inst.z0 = starts[static_cast<std::size_t>(s)];
    sols[static_cast<std::size_t>(s)] = solve_eq_nlp(inst, nlp);
  };
  if (opts.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < count; ++s) solve_one(s);
  } else {
    for (int s = 0; s < count; ++s) solve_one(s);
  }

  std::vector<KktPoint> found;
  for (const auto& sol : sols) {
    if (sol.status != NlpStatus::Converged) continue;
    KktPoint pt;
    pt.x = sol.z.head(n);
    pt.y = sol.z.tail(m);
    pt.mu = sol.mu.head(p);
    pt.lambda = sol.mu.tail(prob.q());
    pt.kkt = check_kkt(prob, pt.x, pt.y, pt.mu, pt.lambda);
    if (!(pt.kkt.max() <= opts.kkt_tolerance)) continue;
    Vector key(sol.z.size() + sol.mu.size());
    key << sol.z, sol.mu;
    const bool duplicate = std::any_of(found.begin(), found.end(), [&](const KktPoint& other) {
      Vector k2(key.size());
      k2 << other.x, other.y, other.mu, other.lambda;
      return (k2 - key).norm() <= opts.dedupe_distance;
    });
    if (duplicate) continue;
    pt.sosc = check_sosc(prob, pt.x, pt.mu);
    pt.licq = check_licq(prob, pt.x);
    found.push_back(std::move(pt));
  }
  return found;
}

std::optional<std::size_t> nearest_reference(const std::vector<KktPoint>& refs, const Vector& y,
                                             const Vector& lambda, const Matrix& B, double rho) {
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const double d = rho_norm(y - refs[i].y, lambda - refs[i].lambda, B, rho);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace nadmm::analysis
