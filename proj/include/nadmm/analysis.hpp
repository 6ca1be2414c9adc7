#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nadmm/admm.hpp"
#include "nadmm/model.hpp"

namespace nadmm::analysis {

/// Residual norms of the KKT system of the full problem.
struct KktReport {
  double stationarity_x = 0.0;  // ||grad f + grad c mu + A^T lambda||
  double stationarity_y = 0.0;  // ||B^T lambda||
  double constraint = 0.0;      // ||c(x)||
  double coupling = 0.0;        // ||A x + B y - b||

  double max() const;
};

KktReport check_kkt(const Problem& prob, const Vector& x, const Vector& y, const Vector& mu, const Vector& lambda);

/// C = [[grad c(x)^T, 0], [A, B]], (p + q) x (n + m).
Matrix constraint_matrix(const Problem& prob, const Vector& x);

struct LicqResult {
  bool ok = false;
  int rank = 0;
  int rows = 0;
};

/// Row rank of C by column-pivoted QR, tolerance 1e-10 ||C||.
LicqResult check_licq(const Problem& prob, const Vector& x);

struct SoscResult {
  bool overall_ok = false;
  /// min eig of Z^T diag(H_xx, 0) Z over null(C); +inf if null(C) = {0}.
  double min_projected_eigenvalue = 0.0;
  /// Present when rho was supplied: H_xx + rho A^T A on null(grad c^T).
  std::optional<bool> subproblem_ok;
  std::optional<double> subproblem_min_eigenvalue;
};

/// Positive-definiteness threshold on projected minimum eigenvalues.
inline constexpr double kPdThreshold = 1e-9;

SoscResult check_sosc(const Problem& prob, const Vector& x, const Vector& mu, std::optional<double> rho = {});

/// The hypothesis of the critical-penalty lemma fails: H is not positive
/// definite on null([C; D]). `direction` is the offending unit vector.
class HypothesisViolation : public std::runtime_error {
 public:
  HypothesisViolation(Vector direction, double curvature);
  const Vector& direction() const { return direction_; }
  double curvature() const { return curvature_; }

 private:
  Vector direction_;
  double curvature_;
};

/// Smallest rho* >= 0 with Z^T (H + rho D^T D) Z positive definite for every
/// rho > rho*, Z spanning null(C_keep). Bisection to 1e-6 relative; returns
/// +infinity when the bracket passes 1e12 and 0 when it shrinks below 1e-12.
double critical_rho(const Matrix& H, const Matrix& C_keep, const Matrix& D_pen);

/// min eig of Z^T (H + rho D^T D) Z, Z spanning null(C_keep).
double projected_min_eigenvalue(const Matrix& H, const Matrix& C_keep, const Matrix& D_pen, double rho);

/// (H, C_keep, D_pen) = (diag(H_xx, 0), [grad c^T, 0], [A, B]) at (x, mu).
struct PenaltyData {
  Matrix H;
  Matrix C_keep;
  Matrix D_pen;
};
PenaltyData penalty_data(const Problem& prob, const Vector& x, const Vector& mu);

struct RegularityReport {
  LicqResult licq;
  SoscResult sosc;
  double critical_rho = std::numeric_limits<double>::infinity();
};

RegularityReport check_regularity(const Problem& prob, const Vector& x, const Vector& mu,
                                  std::optional<double> rho = {});

/// (1/rho) ||lambda - lambda_ref||^2 + rho ||B (y - y_ref)||^2.
double lyapunov(const Vector& y, const Vector& lambda, const Vector& y_ref, const Vector& lambda_ref,
                const Matrix& B, double rho);

/// (rho ||B y||^2 + (1/rho) ||lambda||^2)^(1/2).
double rho_norm(const Vector& y, const Vector& lambda, const Matrix& B, double rho);

struct LyapunovSeries {
  std::vector<double> V;              // per iterate
  std::vector<double> rho_distance;   // per iterate, sqrt(V)
  /// slack[i] = V_i - V_{i+1} - rho ||B (y_i - y_{i+1})||^2 - (rho/2) ||q_{i+1}||^2
  std::vector<double> slack;
  /// Smallest i with slack[j] >= -1e-9 max(1, V_j) for all j >= i
  /// (slack.size() when the last slack violates).
  std::size_t entry_index = 0;
};

LyapunovSeries verify_decrease_bound(const std::vector<Iterate>& iterates, const Vector& y_ref,
                                     const Vector& lambda_ref, const Matrix& B, double rho);

struct RateEntry {
  int k;         // iterate index of the numerator
  double ratio;  // d_k / d_{k-1}
};

/// Ratios of consecutive rho-norm distances to the reference, stopping once a
/// distance drops below 1e-14.
std::vector<RateEntry> convergence_rate(const std::vector<Iterate>& iterates, const Vector& y_ref,
                                        const Vector& lambda_ref, const Matrix& B, double rho);

struct KktPoint {
  Vector x, y, mu, lambda;
  KktReport kkt;
  SoscResult sosc;
  LicqResult licq;
};

struct ReferenceOptions {
  int n_starts = 20;
  std::uint64_t seed = 0;
  double box = 5.0;  // starts drawn from [-box, box]^(n+m)
  bool parallel = false;
  double dedupe_distance = 1e-6;
  double kkt_tolerance = 1e-10;
};

/// Multistart Newton on the full KKT system. Points are returned in the order
/// of the start that first found them.
std::vector<KktPoint> reference_solution(const Problem& prob, const ReferenceOptions& opts = {});

/// Index of the reference closest to (y, lambda) in the rho-norm.
std::optional<std::size_t> nearest_reference(const std::vector<KktPoint>& refs, const Vector& y,
                                             const Vector& lambda, const Matrix& B, double rho);

}  // namespace nadmm::analysis
