#include "nadmm/nlpsolve.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>

#include "nadmm/linalg.hpp"

namespace nadmm {

std::string_view to_string(NlpStatus s) {
  switch (s) {
    case NlpStatus::Converged: return "converged";
    case NlpStatus::MaxIter: return "max_iter";
    case NlpStatus::LinAlgFailure: return "linalg_failure";
    case NlpStatus::Diverged: return "diverged";
  }
  return "?";
}

namespace {

constexpr double kRegularizationStart = 1e-8;
constexpr double kRegularizationMax = 1e12;
constexpr double kArmijo = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr int kMaxBacktracks = 50;
constexpr double kDivergence = 1e8;
constexpr double kSecondOrderTol = 1e-6;

struct Evaluation {
  Vector grad;
  Vector cons;
  Matrix jac;
};

Evaluation evaluate(const NlpInstance& inst, const Vector& z) {
  Evaluation ev;
  ev.grad = inst.objective_gradient(z);
  if (inst.num_constraints > 0) {
    ev.cons = inst.constraints(z);
    ev.jac = inst.constraint_jacobian(z);
  } else {
    ev.cons = Vector::Zero(0);
    ev.jac = Matrix::Zero(0, inst.dim);
  }
  return ev;
}

Matrix lagrangian_hessian(const NlpInstance& inst, const Vector& z, const Vector& mu) {
  Matrix w = inst.objective_hessian(z);
  if (inst.num_constraints > 0) w += inst.constraint_curvature(z, mu);
  return w;
}

double min_projected_eigenvalue(const Matrix& w, const Matrix& jac) {
  const Matrix Z = linalg::null_space_basis(jac);
  if (Z.cols() == 0) return std::numeric_limits<double>::infinity();
  const Matrix reduced = Z.transpose() * w * Z;
  return linalg::min_eigenvalue(0.5 * (reduced + reduced.transpose()));
}

// Eigen-decomposed KKT matrix with inertia (d, p, 0), or merely nonsingular
// when `inertia` is false; nothing when regularization hits its cap.
std::optional<Eigen::SelfAdjointEigenSolver<Matrix>> regularized_kkt(const Matrix& w, const Matrix& jac, bool inertia) {
  const Eigen::Index d = w.rows();
  const Eigen::Index p = jac.rows();
  Matrix k = Matrix::Zero(d + p, d + p);
  k.topLeftCorner(d, d) = w;
  k.topRightCorner(d, p) = jac.transpose();
  k.bottomLeftCorner(p, d) = jac;

  double delta = 0.0;
  for (;;) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    if (es.info() == Eigen::Success) {
      const Vector& ev = es.eigenvalues();
      const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
      Eigen::Index pos = 0, neg = 0;
      for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > 1e-13 * scale) ++pos;
        else if (ev[i] < -1e-13 * scale) ++neg;
      }
      if (inertia ? (pos == d && neg == p) : (pos + neg == d + p)) return es;
    }
    const double next = delta == 0.0 ? kRegularizationStart : 2.0 * delta;
    if (next > kRegularizationMax) return std::nullopt;
    k.topLeftCorner(d, d).diagonal().array() += next - delta;
    delta = next;
  }
}

bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

KktResidual kkt_residual(const NlpInstance& inst, const Vector& z, const Vector& mu) {
  const Evaluation ev = evaluate(inst, z);
  const Vector stat = inst.num_constraints > 0 ? Vector(ev.grad + ev.jac.transpose() * mu) : ev.grad;
  return {stat.norm(), ev.cons.norm()};
}

Vector least_squares_multipliers(const NlpInstance& inst, const Vector& z) {
  if (inst.num_constraints == 0) return Vector::Zero(0);
  const Evaluation ev = evaluate(inst, z);
  Eigen::ColPivHouseholderQR<Matrix> qr(ev.jac.transpose());
  return qr.solve(-ev.grad);
}

NlpSolution solve_eq_nlp(const NlpInstance& inst, const NlpOptions& opts) {
  NlpSolution sol;
  Vector z = inst.z0;
  Vector mu = inst.mu0 ? *inst.mu0 : least_squares_multipliers(inst, z);
  const Eigen::Index d = inst.dim;
  const bool constrained = inst.num_constraints > 0;
  double penalty = 1.0;

  auto finish = [&](NlpStatus status, int iters, const Evaluation& ev, double stat, double feas) {
    sol.z = z;
    sol.mu = mu;
    sol.stationarity = stat;
    sol.feasibility = feas;
    sol.iterations = iters;
    sol.status = status;
    if (status == NlpStatus::Converged) {
      sol.min_projected_eigenvalue = min_projected_eigenvalue(lagrangian_hessian(inst, z, mu), ev.jac);
      sol.second_order_ok = sol.min_projected_eigenvalue >= -kSecondOrderTol;
    }
    return sol;
  };

  if (!all_finite(z)) {
    const Evaluation none{Vector::Zero(d), Vector::Zero(inst.num_constraints), Matrix::Zero(inst.num_constraints, d)};
    return finish(NlpStatus::Diverged, 0, none, std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity());
  }

  Evaluation ev = evaluate(inst, z);
  for (int iter = 0;; ++iter) {
    const Vector stat_vec = constrained ? Vector(ev.grad + ev.jac.transpose() * mu) : ev.grad;
    const double stat = stat_vec.norm();
    const double feas = ev.cons.norm();
    if (!std::isfinite(stat) || !std::isfinite(feas)) return finish(NlpStatus::Diverged, iter, ev, stat, feas);
    if (stat <= opts.tol_stat && feas <= opts.tol_feas) return finish(NlpStatus::Converged, iter, ev, stat, feas);
    if (iter >= opts.max_iter) return finish(NlpStatus::MaxIter, iter, ev, stat, feas);

    const Matrix w = lagrangian_hessian(inst, z, mu);
    const auto es = regularized_kkt(w, ev.jac, opts.minimizers_only);
    if (!es) return finish(NlpStatus::LinAlgFailure, iter, ev, stat, feas);

    // Solve for the step and the new multipliers: [W J^T; J 0][dz; mu+] = -[grad; c].
    Vector rhs(d + inst.num_constraints);
    rhs << -ev.grad, -ev.cons;
    const Matrix& V = es->eigenvectors();
    const Vector sol_vec = V * (V.transpose() * rhs).cwiseQuotient(es->eigenvalues());
    const Vector dz = sol_vec.head(d);
    const Vector dmu = sol_vec.tail(inst.num_constraints) - mu;

    // Merit 1: squared KKT residual. Merit 2: l1 exact penalty, which keeps
    // the iteration attracted to minimizers rather than any stationary point.
    const double merit0 = stat * stat + feas * feas;
    Vector kd(d + inst.num_constraints);
    kd.head(d) = w * dz + (constrained ? Vector(ev.jac.transpose() * dmu) : Vector::Zero(d));
    kd.tail(inst.num_constraints) = ev.jac * dz;
    Vector resid(d + inst.num_constraints);
    resid << stat_vec, ev.cons;
    const double dmerit = 2.0 * resid.dot(kd);

    const Vector mu_plus = mu + dmu;
    if (constrained) penalty = std::max(penalty, mu_plus.cwiseAbs().maxCoeff() + 1.0);
    const double l1_0 = inst.objective(z) + penalty * ev.cons.lpNorm<1>();
    const double dl1 = ev.grad.dot(dz) - penalty * ev.cons.lpNorm<1>();

    double alpha = 1.0;
    bool accepted = false;
    Evaluation trial_ev;
    for (int bt = 0; bt <= kMaxBacktracks; ++bt, alpha *= kBacktrack) {
      const Vector zt = z + alpha * dz;
      const Vector mut = mu + alpha * dmu;
      trial_ev = evaluate(inst, zt);
      const Vector st = constrained ? Vector(trial_ev.grad + trial_ev.jac.transpose() * mut) : trial_ev.grad;
      const double merit_t = st.squaredNorm() + trial_ev.cons.squaredNorm();
      if (std::isfinite(merit_t) && dmerit < 0.0 && merit_t <= merit0 + kArmijo * alpha * dmerit) {
        accepted = true;
        break;
      }
      const double l1_t = inst.objective(zt) + penalty * trial_ev.cons.lpNorm<1>();
      if (opts.minimizers_only && std::isfinite(l1_t) && dl1 < 0.0 && l1_t <= l1_0 + kArmijo * alpha * dl1) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      alpha = 1.0;
      trial_ev = evaluate(inst, z + dz);
    }
    z += alpha * dz;
    mu += alpha * dmu;
    ev = std::move(trial_ev);
    if (!all_finite(z) || z.norm() > kDivergence) {
      return finish(NlpStatus::Diverged, iter + 1, ev, std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity());
    }
  }
}

}  // namespace nadmm
