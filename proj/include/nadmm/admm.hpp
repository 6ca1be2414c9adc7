#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nadmm/linalg.hpp"
#include "nadmm/model.hpp"
#include "nadmm/nlpsolve.hpp"

namespace nadmm {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A subproblem solve at iteration k did not produce a KKT point.
class SubproblemFailure : public std::runtime_error {
 public:
  SubproblemFailure(int iteration, int block, NlpStatus status);
  int iteration() const { return iteration_; }
  int block() const { return block_; }
  NlpStatus status() const { return status_; }

 private:
  int iteration_;
  int block_;
  NlpStatus status_;
};

enum class WarmStart {
  PreviousIterate,  // x^k seeds the solve for x^{k+1}
  Fixed,            // every solve starts from config.x0
};

struct AdmmConfig {
  double rho = 1.0;
  double eta_p = 1e-8;
  double eta_d = 1e-8;
  int max_iter = 1000;
  std::optional<Vector> x0;  // defaults to zeros
  std::optional<Vector> y0;  // defaults to zeros
  std::optional<Vector> lambda0;  // defaults to zeros; projected onto null(B^T)
  WarmStart warm_start = WarmStart::PreviousIterate;
  bool parallel_blocks = false;
  int inner_max_iter = 200;
  /// Defaults to min(eta_p, eta_d) / 100.
  std::optional<double> inner_tolerance;
  double divergence_bound = 1e8;
};

struct Iterate {
  int k = 0;
  Vector x, y, mu, lambda;
  Vector q, r;
  double q_norm = 0.0;
  double r_norm = 0.0;
  NlpStatus subproblem_status = NlpStatus::Converged;
  int inner_iterations = 0;
  double inner_stationarity = 0.0;
  double inner_feasibility = 0.0;
  /// Second-order check of every block solve passed.
  bool second_order_ok = true;
  /// ||grad f + grad c mu + A^T lambda - r||, zero up to the inner tolerance.
  double dual_identity_residual = 0.0;
};

struct Trace {
  Iterate initial;                // k = 0 state (x0, y0, projected lambda0)
  std::vector<Iterate> iterates;  // k = 1, 2, ...
  std::vector<double> wall_ms;    // per iterate
};

enum class SolveStatus { Solved, IterLimit, SubproblemFailure, Diverged };

std::string_view to_string(SolveStatus s);

struct SolveReport {
  SolveStatus status = SolveStatus::IterLimit;
  int iterations = 0;
  Iterate final_iterate;
  double q_norm = 0.0;
  double r_norm = 0.0;
  double rho = 0.0;
  double eta_p = 0.0;
  double eta_d = 0.0;
  double inner_tolerance = 0.0;
  double lambda0_projection_distance = 0.0;
  std::string message;
};

/// x-subproblem: objective f(x) + lambda^T(Ax + By - b) + rho/2 ||Ax + By - b||^2 with
/// y = y_k fixed, subject to c(x) = 0.
NlpInstance assemble_subproblem(const Problem& prob, const Vector& y_k, const Vector& lambda_k, double rho);

/// argmin_y ||A x + B y - b||, by QR of B.
Vector y_update(const Problem& prob, const Vector& x_next);
Vector y_update(const Problem& prob, const linalg::LeastSquares& b_qr, const Vector& x_next);

Vector lambda_update(const Vector& lambda_k, double rho, const Vector& q_next);

struct Residuals {
  Vector q;  // A x + B y - b
  Vector r;  // rho A^T B (y_next - y_prev)
};
Residuals residuals(const Problem& prob, const Vector& x_next, const Vector& y_next, const Vector& y_prev,
                    double rho);

/// Algorithm state bound to one problem and configuration. Construction
/// validates both; step and run are const and may be called repeatedly.
class AdmmSolver {
 public:
  AdmmSolver(Problem prob, AdmmConfig config);
  ~AdmmSolver();
  AdmmSolver(AdmmSolver&&) noexcept;
  AdmmSolver& operator=(AdmmSolver&&) noexcept;

  const Problem& problem() const { return prob_; }
  const AdmmConfig& config() const { return config_; }
  double inner_tolerance() const { return inner_tol_; }
  double lambda0_projection_distance() const { return lambda0_distance_; }

  Iterate initial_state() const;
  /// One iteration from `state`; throws SubproblemFailure tagged with k.
  Iterate step(const Iterate& state) const;
  std::pair<SolveReport, Trace> run() const;

 private:
  struct Impl;
  Problem prob_;
  AdmmConfig config_;
  double inner_tol_ = 0.0;
  double lambda0_distance_ = 0.0;
  Vector lambda0_;
  std::unique_ptr<Impl> impl_;
};

std::pair<SolveReport, Trace> run(const Problem& prob, const AdmmConfig& config);

}  // namespace nadmm
