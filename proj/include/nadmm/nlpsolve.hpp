#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include "nadmm/expr.hpp"

namespace nadmm {

/// Smooth equality-constrained NLP  min phi(z) s.t. g(z) = 0  given by
/// oracles. All oracles must be pure; the solver calls them from whichever
/// thread runs the solve.
struct NlpInstance {
  int dim = 0;
  int num_constraints = 0;
  std::function<double(const Vector&)> objective;
  std::function<Vector(const Vector&)> objective_gradient;
  std::function<Matrix(const Vector&)> objective_hessian;
  std::function<Vector(const Vector&)> constraints;           // g(z), size num_constraints
  std::function<Matrix(const Vector&)> constraint_jacobian;   // num_constraints x dim
  std::function<Matrix(const Vector&, const Vector&)> constraint_curvature;  // sum_j mu_j hess g_j
  Vector z0;
  std::optional<Vector> mu0;
};

enum class NlpStatus { Converged, MaxIter, LinAlgFailure, Diverged };

std::string_view to_string(NlpStatus s);

struct NlpSolution {
  Vector z;
  Vector mu;
  double stationarity = 0.0;
  double feasibility = 0.0;
  int iterations = 0;
  NlpStatus status = NlpStatus::MaxIter;
  /// Minimum eigenvalue of the Lagrangian Hessian on null(grad g^T)
  /// (+inf when that space is trivial).
  double min_projected_eigenvalue = 0.0;
  /// False when the second-order necessary check fails (saddle suspected).
  bool second_order_ok = true;
};

struct NlpOptions {
  double tol_stat = 1e-9;
  double tol_feas = 1e-9;
  int max_iter = 200;
  /// Inertia correction plus the l1 penalty merit steer the iteration to
  /// minimizers. When false the method is plain damped Newton on the KKT
  /// residual and converges to any nondegenerate KKT point.
  bool minimizers_only = true;
};

struct KktResidual {
  double stationarity;
  double feasibility;
};

/// ||grad phi + J^T mu||_2 and ||g(z)||_2.
KktResidual kkt_residual(const NlpInstance& inst, const Vector& z, const Vector& mu);

/// Least-squares multiplier estimate argmin ||grad phi(z) + J(z)^T mu||.
Vector least_squares_multipliers(const NlpInstance& inst, const Vector& z);

/// Newton's method on the KKT system with inertia-correcting Hessian
/// regularization and a backtracking line search. Deterministic.
NlpSolution solve_eq_nlp(const NlpInstance& inst, const NlpOptions& opts = {});

}  // namespace nadmm
