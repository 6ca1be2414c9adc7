#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nadmm/expr.hpp"

namespace nadmm {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Slice of the canonical problem owned by one block of a decomposable
/// problem: contiguous x variables, contiguous constraints, contiguous rows
/// of (A, B, b). A has no nonzeros outside its blocks' (row, column) ranges;
/// rows not owned by any block carry a zero A row.
struct BlockSlice {
  int x_offset = 0;
  int x_count = 0;
  int constraint_offset = 0;
  int constraint_count = 0;
  int row_offset = 0;
  int row_count = 0;
  Expr objective;
};

/// min f(x) s.t. c(x) = 0, A x + B y = b.
struct Problem {
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
  Expr objective;
  std::vector<Expr> constraints;
  Matrix A;
  Matrix B;
  Vector b;
  /// Empty means the problem is a single block.
  std::vector<BlockSlice> blocks;

  int n() const { return static_cast<int>(x_names.size()); }
  int m() const { return static_cast<int>(y_names.size()); }
  int p() const { return static_cast<int>(constraints.size()); }
  int q() const { return static_cast<int>(b.size()); }
};

/// Block coupled through its own rows: A_i x_i + B_i y = b_i.
struct CoupledBlock {
  std::vector<std::string> x_names;
  Expr objective;
  std::vector<Expr> constraints;
  Matrix A;
  Matrix B;
  Vector b;
};

struct BlockProblem {
  std::vector<std::string> y_names;
  std::vector<CoupledBlock> blocks;
};

/// Shared-budget block: contributes A_i x_i to the shared budget.
struct BudgetBlock {
  std::vector<std::string> x_names;
  Expr objective;
  std::vector<Expr> constraints;
  Matrix A;
};

struct SharedBudgetProblem {
  std::vector<BudgetBlock> blocks;
  Vector budget;  // b~
};

/// Inequalities h_j(x) <= 0.
struct InequalitySpec {
  std::vector<Expr> constraints;
};

Problem canonicalize_block(const BlockProblem& bp);
Problem canonicalize_shared(const SharedBudgetProblem& sp);

/// Appends one slack s_j per inequality with the constraint h_j(x) + s_j^2 = 0.
/// Slack names default to "s_<j>" (1-based); a slack joins the block that owns
/// all of h_j's variables, otherwise the block structure is dropped.
Problem add_slacks(const Problem& prob, const InequalitySpec& ineq,
                   const std::vector<std::string>& slack_names = {});

/// Extends a start point of the original problem with
/// s_j = max(sqrt(max(-h_j(x0), 0)), 1e-3), in the variable order that
/// add_slacks produced for `with_slacks`.
Vector initial_slack_point(const Problem& original, const InequalitySpec& ineq,
                           const Problem& with_slacks, const Vector& x0);

struct ValidationReport {
  bool dimensions_ok = true;
  bool b_full_column_rank = true;
  int b_rank = 0;
  bool variables_ok = true;
  bool blocks_ok = true;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

ValidationReport validate(const Problem& prob);

/// Throws ModelError listing the failures when validation does not pass.
void require_valid(const Problem& prob);

/// Block slices, or a single slice spanning everything.
std::vector<BlockSlice> effective_blocks(const Problem& prob);

/// Compiled objective and constraint oracles over the x variables.
class ProblemFunctions {
 public:
  explicit ProblemFunctions(const Problem& prob);

  int n() const { return n_; }
  int p() const { return static_cast<int>(constraints_.size()); }

  double objective(const Vector& x) const { return objective_.value(x); }
  Vector objective_gradient(const Vector& x) const { return objective_.gradient(x); }
  Matrix objective_hessian(const Vector& x) const { return objective_.hessian(x); }
  Vector constraint_values(const Vector& x) const;
  /// p x n, row j is grad c_j(x)^T.
  Matrix constraint_jacobian(const Vector& x) const;
  /// sum_j mu_j hess c_j(x).
  Matrix constraint_curvature(const Vector& x, const Vector& mu) const;
  /// hess f(x) + sum_j mu_j hess c_j(x).
  Matrix lagrangian_hessian(const Vector& x, const Vector& mu) const;

 private:
  int n_;
  SmoothFunction objective_;
  std::vector<SmoothFunction> constraints_;
};

}  // namespace nadmm
