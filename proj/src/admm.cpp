#include "nadmm/admm.hpp"

#include <chrono>
#include <cmath>

#include "fmt/format.h"

namespace nadmm {

SubproblemFailure::SubproblemFailure(int iteration, int block, NlpStatus status)
    : std::runtime_error(fmt::format("subproblem at iteration {} (block {}) ended with status {}", iteration,
                                     block, to_string(status))),
      iteration_(iteration),
      block_(block),
      status_(status) {}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "solved";
    case SolveStatus::IterLimit: return "iter_limit";
    case SolveStatus::SubproblemFailure: return "subproblem_failure";
    case SolveStatus::Diverged: return "diverged";
  }
  return "?";
}

namespace {

// Compiled pieces of one block's subproblem: objective and constraints over the
// block's own variables, plus its rows of A.
struct BlockFunctions {
  BlockSlice slice;
  SmoothFunction objective;
  std::vector<SmoothFunction> constraints;
  Matrix A;    // row_count x x_count
  Matrix AtA;  // x_count x x_count

  BlockFunctions(const Problem& prob, const BlockSlice& s) : slice(s) {
    VariableSet vars(std::vector<std::string>(prob.x_names.begin() + s.x_offset,
                                              prob.x_names.begin() + s.x_offset + s.x_count));
    objective = SmoothFunction(s.objective, vars);
    for (int j = 0; j < s.constraint_count; ++j)
      constraints.emplace_back(prob.constraints[static_cast<std::size_t>(s.constraint_offset + j)], vars);
    A = prob.A.block(s.row_offset, s.x_offset, s.row_count, s.x_count);
    AtA = A.transpose() * A;
  }
};

// Builds the subproblem instance of one block; `shift` is (B y_k - b) on the
// block's rows and `lambda` the block's rows of lambda_k.
NlpInstance make_instance(std::shared_ptr<const BlockFunctions> fn, Vector shift, Vector lambda, double rho,
                          Vector z0) {
  NlpInstance inst;
  inst.dim = fn->slice.x_count;
  inst.num_constraints = fn->slice.constraint_count;
  inst.z0 = std::move(z0);
  auto sh = std::make_shared<const Vector>(std::move(shift));
  auto lam = std::make_shared<const Vector>(std::move(lambda));

  inst.objective = [fn, sh, lam, rho](const Vector& x) {
    const Vector res = fn->A * x + *sh;
    return fn->objective.value(x) + lam->dot(res) + 0.5 * rho * res.squaredNorm();
  };
  inst.objective_gradient = [fn, sh, lam, rho](const Vector& x) {
    const Vector res = fn->A * x + *sh;
    return Vector(fn->objective.gradient(x) + fn->A.transpose() * (*lam + rho * res));
  };
  inst.objective_hessian = [fn, rho](const Vector& x) {
    return Matrix(fn->objective.hessian(x) + rho * fn->AtA);
  };
  inst.constraints = [fn](const Vector& x) {
    Vector c(static_cast<Eigen::Index>(fn->constraints.size()));
    for (std::size_t j = 0; j < fn->constraints.size(); ++j) c[static_cast<Eigen::Index>(j)] = fn->constraints[j].value(x);
    return c;
  };
  inst.constraint_jacobian = [fn](const Vector& x) {
    Matrix J(static_cast<Eigen::Index>(fn->constraints.size()), fn->slice.x_count);
    for (std::size_t j = 0; j < fn->constraints.size(); ++j)
      J.row(static_cast<Eigen::Index>(j)) = fn->constraints[j].gradient(x).transpose();
    return J;
  };
  inst.constraint_curvature = [fn](const Vector& x, const Vector& mu) {
    Matrix h = Matrix::Zero(fn->slice.x_count, fn->slice.x_count);
    for (std::size_t j = 0; j < fn->constraints.size(); ++j) {
      const double m = mu[static_cast<Eigen::Index>(j)];
      if (m != 0.0) fn->constraints[j].add_hessian(x, m, h);
    }
    return h;
  };
  return inst;
}

}  // namespace

NlpInstance assemble_subproblem(const Problem& prob, const Vector& y_k, const Vector& lambda_k, double rho) {
  BlockSlice all;
  all.x_count = prob.n();
  all.constraint_count = prob.p();
  all.row_count = prob.q();
  all.objective = prob.objective;
  auto fn = std::make_shared<const BlockFunctions>(prob, all);
  return make_instance(fn, prob.B * y_k - prob.b, lambda_k, rho, Vector::Zero(prob.n()));
}

Vector y_update(const Problem& prob, const linalg::LeastSquares& b_qr, const Vector& x_next) {
  return b_qr.solve(prob.b - prob.A * x_next);
}

Vector y_update(const Problem& prob, const Vector& x_next) {
  return y_update(prob, linalg::LeastSquares(prob.B), x_next);
}

Vector lambda_update(const Vector& lambda_k, double rho, const Vector& q_next) { return lambda_k + rho * q_next; }

Residuals residuals(const Problem& prob, const Vector& x_next, const Vector& y_next, const Vector& y_prev,
                    double rho) {
  Residuals res;
  res.q = prob.A * x_next + prob.B * y_next - prob.b;
  res.r = rho * (prob.A.transpose() * (prob.B * (y_next - y_prev)));
  return res;
}

// ---------------------------------------------------------------------------

struct AdmmSolver::Impl {
  ProblemFunctions functions;
  linalg::LeastSquares b_qr;
  std::vector<std::shared_ptr<const BlockFunctions>> blocks;

  explicit Impl(const Problem& prob) : functions(prob), b_qr(prob.B) {
    for (const auto& s : effective_blocks(prob)) blocks.push_back(std::make_shared<const BlockFunctions>(prob, s));
  }
};

AdmmSolver::~AdmmSolver() = default;
AdmmSolver::AdmmSolver(AdmmSolver&&) noexcept = default;
AdmmSolver& AdmmSolver::operator=(AdmmSolver&&) noexcept = default;

AdmmSolver::AdmmSolver(Problem prob, AdmmConfig config) : prob_(std::move(prob)), config_(std::move(config)) {
  if (!(config_.rho > 0.0) || !std::isfinite(config_.rho)) throw ConfigError("rho must be a positive finite number");
  if (!(config_.eta_p > 0.0) || !(config_.eta_d > 0.0)) throw ConfigError("eta_p and eta_d must be positive");
  if (config_.max_iter < 0) throw ConfigError("max_iter must be non-negative");
  if (config_.inner_max_iter < 1) throw ConfigError("inner_max_iter must be positive");
  require_valid(prob_);
  auto check_dim = [](const std::optional<Vector>& v, int expected, const char* what) {
    if (v && v->size() != expected)
      throw ConfigError(fmt::format("{} has {} entries, expected {}", what, v->size(), expected));
    if (v && !v->allFinite()) throw ConfigError(fmt::format("{} must be finite", what));
  };
  check_dim(config_.x0, prob_.n(), "x0");
  check_dim(config_.y0, prob_.m(), "y0");
  check_dim(config_.lambda0, prob_.q(), "lambda0");
  if (config_.warm_start == WarmStart::Fixed && !config_.x0)
    throw ConfigError("the fixed warm-start policy needs x0");

  inner_tol_ = config_.inner_tolerance.value_or(std::min(config_.eta_p, config_.eta_d) / 100.0);
  if (!(inner_tol_ > 0.0)) throw ConfigError("inner tolerance must be positive");
  impl_ = std::make_unique<Impl>(prob_);

  const Vector lambda_in = config_.lambda0.value_or(Vector::Zero(prob_.q()));
  lambda0_ = impl_->b_qr.project_out_range(lambda_in, prob_.B);
  lambda0_distance_ = (lambda_in - lambda0_).norm();
}

Iterate AdmmSolver::initial_state() const {
  Iterate s;
  s.k = 0;
  s.x = config_.x0.value_or(Vector::Zero(prob_.n()));
  s.y = config_.y0.value_or(Vector::Zero(prob_.m()));
  s.lambda = lambda0_;
  s.mu = Vector::Zero(prob_.p());
  s.q = prob_.A * s.x + prob_.B * s.y - prob_.b;
  s.r = Vector::Zero(prob_.n());
  s.q_norm = s.q.norm();
  return s;
}

Iterate AdmmSolver::step(const Iterate& state) const {
  const int k = state.k + 1;
  const double rho = config_.rho;
  const auto& blocks = impl_->blocks;
  const auto nblocks = static_cast<int>(blocks.size());
  const Vector shift = prob_.B * state.y - prob_.b;
  const Vector& seed = config_.warm_start == WarmStart::Fixed ? *config_.x0 : state.x;

  NlpOptions opts;
  opts.tol_stat = inner_tol_ / std::sqrt(static_cast<double>(nblocks));
  opts.tol_feas = opts.tol_stat;
  opts.max_iter = config_.inner_max_iter;

  std::vector<NlpSolution> sols(static_cast<std::size_t>(nblocks));
  auto solve_block = [&](int i) {
    const auto& fn = blocks[static_cast<std::size_t>(i)];
    const BlockSlice& s = fn->slice;
    NlpInstance inst = make_instance(fn, shift.segment(s.row_offset, s.row_count),
                                     state.lambda.segment(s.row_offset, s.row_count), rho,
                                     seed.segment(s.x_offset, s.x_count));
    sols[static_cast<std::size_t>(i)] = solve_eq_nlp(inst, opts);
  };

  if (config_.parallel_blocks && nblocks > 1) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < nblocks; ++i) solve_block(i);
  } else {
    for (int i = 0; i < nblocks; ++i) solve_block(i);
  }

  Iterate next;
  next.k = k;
  next.x = Vector::Zero(prob_.n());
  next.mu = Vector::Zero(prob_.p());
  double stat_sq = 0.0, feas_sq = 0.0;
  for (int i = 0; i < nblocks; ++i) {
    const NlpSolution& sol = sols[static_cast<std::size_t>(i)];
    const BlockSlice& s = blocks[static_cast<std::size_t>(i)]->slice;
    if (sol.status != NlpStatus::Converged) throw SubproblemFailure(k, i, sol.status);
    next.x.segment(s.x_offset, s.x_count) = sol.z;
    next.mu.segment(s.constraint_offset, s.constraint_count) = sol.mu;
    next.inner_iterations = std::max(next.inner_iterations, sol.iterations);
    next.second_order_ok = next.second_order_ok && sol.second_order_ok;
    stat_sq += sol.stationarity * sol.stationarity;
    feas_sq += sol.feasibility * sol.feasibility;
  }
  next.inner_stationarity = std::sqrt(stat_sq);
  next.inner_feasibility = std::sqrt(feas_sq);

  next.y = y_update(prob_, impl_->b_qr, next.x);
  Residuals res = residuals(prob_, next.x, next.y, state.y, rho);
  next.lambda = lambda_update(state.lambda, rho, res.q);
  next.q = std::move(res.q);
  next.r = std::move(res.r);
  next.q_norm = next.q.norm();
  next.r_norm = next.r.norm();

  const Vector lag = impl_->functions.objective_gradient(next.x) +
                     impl_->functions.constraint_jacobian(next.x).transpose() * next.mu +
                     prob_.A.transpose() * next.lambda - next.r;
  next.dual_identity_residual = lag.norm();
  return next;
}

std::pair<SolveReport, Trace> AdmmSolver::run() const {
  SolveReport report;
  report.rho = config_.rho;
  report.eta_p = config_.eta_p;
  report.eta_d = config_.eta_d;
  report.inner_tolerance = inner_tol_;
  report.lambda0_projection_distance = lambda0_distance_;

  Trace trace;
  trace.initial = initial_state();
  const Iterate* current = &trace.initial;
  report.status = SolveStatus::IterLimit;

  for (int k = 1; k <= config_.max_iter; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Iterate next;
    try {
      next = step(*current);
    } catch (const SubproblemFailure& e) {
      report.status = SolveStatus::SubproblemFailure;
      report.message = e.what();
      break;
    }
    const auto t1 = std::chrono::steady_clock::now();
    trace.iterates.push_back(std::move(next));
    trace.wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    current = &trace.iterates.back();

    const double size = std::sqrt(current->x.squaredNorm() + current->y.squaredNorm() +
                                  current->lambda.squaredNorm());
    if (!std::isfinite(size) || size > config_.divergence_bound) {
      report.status = SolveStatus::Diverged;
      report.message = fmt::format("iterate norm {:.3e} exceeds {:.1e} at iteration {}", size,
                                   config_.divergence_bound, k);
      break;
    }
    if (current->q_norm <= config_.eta_p && current->r_norm <= config_.eta_d) {
      report.status = SolveStatus::Solved;
      break;
    }
  }

  report.iterations = static_cast<int>(trace.iterates.size());
  report.final_iterate = *current;
  report.q_norm = current->q_norm;
  report.r_norm = current->r_norm;
  if (report.status == SolveStatus::IterLimit)
    report.message = fmt::format("no convergence within {} iterations", config_.max_iter);
  return {std::move(report), std::move(trace)};
}

std::pair<SolveReport, Trace> run(const Problem& prob, const AdmmConfig& config) {
  return AdmmSolver(prob, config).run();
}

}  // namespace nadmm
