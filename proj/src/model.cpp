#include "nadmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "fmt/format.h"
#include "nadmm/linalg.hpp"

namespace nadmm {

namespace {

Expr sum_of(const std::vector<Expr>& terms) {
  if (terms.empty()) return Expr::constant(0.0);
  Expr acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = Expr::add(acc, terms[i]);
  return acc;
}

int as_int(Eigen::Index i) { return static_cast<int>(i); }

void append_unique(std::vector<std::string>& into, const std::vector<std::string>& names,
                   std::unordered_set<std::string>& seen, const char* what) {
  for (const auto& name : names) {
    if (!seen.insert(name).second) throw ModelError(fmt::format("duplicate {} variable '{}'", what, name));
    into.push_back(name);
  }
}

}  // namespace

Problem canonicalize_block(const BlockProblem& bp) {
  if (bp.blocks.empty()) throw ModelError("block problem has no blocks");
  const auto m = static_cast<Eigen::Index>(bp.y_names.size());
  Eigen::Index n = 0, q = 0;
  for (std::size_t i = 0; i < bp.blocks.size(); ++i) {
    const auto& blk = bp.blocks[i];
    if (blk.B.cols() != m)
      throw ModelError(fmt::format("block {}: B has {} columns, expected m = {}", i, blk.B.cols(), m));
    if (blk.A.rows() != blk.B.rows() || blk.A.rows() != blk.b.size())
      throw ModelError(fmt::format("block {}: A, B, b row counts differ ({}, {}, {})", i, blk.A.rows(),
                                   blk.B.rows(), blk.b.size()));
    if (blk.A.cols() != static_cast<Eigen::Index>(blk.x_names.size()))
      throw ModelError(fmt::format("block {}: A has {} columns for {} variables", i, blk.A.cols(),
                                   blk.x_names.size()));
    n += blk.A.cols();
    q += blk.A.rows();
  }

  Problem prob;
  prob.y_names = bp.y_names;
  prob.A = Matrix::Zero(q, n);
  prob.B = Matrix::Zero(q, m);
  prob.b = Vector::Zero(q);
  std::unordered_set<std::string> seen(bp.y_names.begin(), bp.y_names.end());
  std::vector<Expr> objectives;
  Eigen::Index col = 0, row = 0;
  for (const auto& blk : bp.blocks) {
    BlockSlice slice;
    slice.x_offset = as_int(col);
    slice.x_count = as_int(blk.A.cols());
    slice.constraint_offset = prob.p();
    slice.constraint_count = static_cast<int>(blk.constraints.size());
    slice.row_offset = as_int(row);
    slice.row_count = as_int(blk.A.rows());
    slice.objective = blk.objective;

    append_unique(prob.x_names, blk.x_names, seen, "x");
    prob.constraints.insert(prob.constraints.end(), blk.constraints.begin(), blk.constraints.end());
    prob.A.block(row, col, blk.A.rows(), blk.A.cols()) = blk.A;
    prob.B.middleRows(row, blk.B.rows()) = blk.B;
    prob.b.segment(row, blk.b.size()) = blk.b;
    objectives.push_back(blk.objective);
    prob.blocks.push_back(std::move(slice));
    col += blk.A.cols();
    row += blk.A.rows();
  }
  prob.objective = sum_of(objectives);
  if (bp.blocks.size() == 1) prob.blocks.clear();
  return prob;
}

Problem canonicalize_shared(const SharedBudgetProblem& sp) {
  if (sp.blocks.empty()) throw ModelError("shared-budget problem has no blocks");
  const Eigen::Index qt = sp.budget.size();
  const auto N = static_cast<Eigen::Index>(sp.blocks.size());
  Eigen::Index n = 0;
  for (std::size_t i = 0; i < sp.blocks.size(); ++i) {
    const auto& blk = sp.blocks[i];
    if (blk.A.rows() != qt)
      throw ModelError(fmt::format("block {}: A has {} rows, the budget has {}", i, blk.A.rows(), qt));
    if (blk.A.cols() != static_cast<Eigen::Index>(blk.x_names.size()))
      throw ModelError(fmt::format("block {}: A has {} columns for {} variables", i, blk.A.cols(),
                                   blk.x_names.size()));
    n += blk.A.cols();
  }

  // Rows: A_i x_i - y_i = 0 for each block, then sum_i y_i = b~.
  const Eigen::Index q = (N + 1) * qt;
  const Eigen::Index m = N * qt;
  Problem prob;
  prob.A = Matrix::Zero(q, n);
  prob.B = Matrix::Zero(q, m);
  prob.b = Vector::Zero(q);
  prob.b.tail(qt) = sp.budget;
  std::unordered_set<std::string> seen;
  std::vector<Expr> objectives;
  Eigen::Index col = 0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& blk = sp.blocks[static_cast<std::size_t>(i)];
    BlockSlice slice;
    slice.x_offset = as_int(col);
    slice.x_count = as_int(blk.A.cols());
    slice.constraint_offset = prob.p();
    slice.constraint_count = static_cast<int>(blk.constraints.size());
    slice.row_offset = as_int(i * qt);
    slice.row_count = as_int(qt);
    slice.objective = blk.objective;

    append_unique(prob.x_names, blk.x_names, seen, "x");
    prob.constraints.insert(prob.constraints.end(), blk.constraints.begin(), blk.constraints.end());
    prob.A.block(i * qt, col, qt, blk.A.cols()) = blk.A;
    prob.B.block(i * qt, i * qt, qt, qt) = -Matrix::Identity(qt, qt);
    prob.B.block(N * qt, i * qt, qt, qt) = Matrix::Identity(qt, qt);
    for (Eigen::Index j = 0; j < qt; ++j) prob.y_names.push_back(fmt::format("y{}_{}", i + 1, j + 1));
    objectives.push_back(blk.objective);
    prob.blocks.push_back(std::move(slice));
    col += blk.A.cols();
  }
  for (const auto& y : prob.y_names) {
    if (seen.count(y)) throw ModelError(fmt::format("generated y variable '{}' collides with an x variable", y));
  }
  prob.objective = sum_of(objectives);
  if (N == 1) prob.blocks.clear();
  return prob;
}

namespace {

std::vector<std::string> slack_names_for(const InequalitySpec& ineq, const std::vector<std::string>& given) {
  if (!given.empty()) {
    if (given.size() != ineq.constraints.size())
      throw ModelError("slack name count does not match the inequality count");
    return given;
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < ineq.constraints.size(); ++j) names.push_back(fmt::format("s_{}", j + 1));
  return names;
}

// Block index owning every variable of e, -1 when none or several do.
int owning_block(const Expr& e, const Problem& prob, const std::unordered_map<std::string, int>& col_of) {
  int owner = -2;
  for (const auto& v : e.variables()) {
    auto it = col_of.find(v);
    if (it == col_of.end()) throw ModelError(fmt::format("inequality references undeclared variable '{}'", v));
    int blk = -1;
    for (std::size_t i = 0; i < prob.blocks.size(); ++i) {
      const auto& s = prob.blocks[i];
      if (it->second >= s.x_offset && it->second < s.x_offset + s.x_count) blk = static_cast<int>(i);
    }
    if (owner == -2) owner = blk;
    else if (owner != blk) return -1;
  }
  return owner == -2 ? 0 : owner;
}

}  // namespace

Problem add_slacks(const Problem& prob, const InequalitySpec& ineq, const std::vector<std::string>& slack_names) {
  if (ineq.constraints.empty()) return prob;
  const auto names = slack_names_for(ineq, slack_names);

  std::unordered_map<std::string, int> col_of;
  for (int i = 0; i < prob.n(); ++i) col_of.emplace(prob.x_names[static_cast<std::size_t>(i)], i);
  std::unordered_set<std::string> taken(prob.x_names.begin(), prob.x_names.end());
  taken.insert(prob.y_names.begin(), prob.y_names.end());
  for (const auto& s : names) {
    if (!taken.insert(s).second) throw ModelError(fmt::format("slack variable '{}' collides with an existing name", s));
  }

  std::vector<Expr> slack_constraints;
  for (std::size_t j = 0; j < ineq.constraints.size(); ++j) {
    slack_constraints.push_back(
        Expr::add(ineq.constraints[j], Expr::pow(Expr::variable(names[j]), 2)));
  }

  // Owner block of each inequality; any unassignable inequality collapses blocks.
  std::vector<BlockSlice> blocks = prob.blocks;
  std::vector<int> owner(ineq.constraints.size(), 0);
  if (!blocks.empty()) {
    for (std::size_t j = 0; j < ineq.constraints.size(); ++j) {
      owner[j] = owning_block(ineq.constraints[j], prob, col_of);
      if (owner[j] < 0) {
        blocks.clear();
        break;
      }
    }
  } else {
    for (const auto& h : ineq.constraints) owning_block(h, prob, col_of);  // undeclared-variable check
  }

  Problem out;
  out.y_names = prob.y_names;
  out.objective = prob.objective;
  out.B = prob.B;
  out.b = prob.b;
  const Eigen::Index n_new = prob.n() + static_cast<Eigen::Index>(names.size());
  out.A = Matrix::Zero(prob.A.rows(), n_new);

  if (blocks.empty()) {
    out.x_names = prob.x_names;
    out.x_names.insert(out.x_names.end(), names.begin(), names.end());
    out.constraints = prob.constraints;
    out.constraints.insert(out.constraints.end(), slack_constraints.begin(), slack_constraints.end());
    out.A.leftCols(prob.n()) = prob.A;
    return out;
  }

  Eigen::Index col = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSlice& old = prob.blocks[i];
    BlockSlice slice = old;
    slice.x_offset = as_int(col);
    slice.constraint_offset = out.p();
    for (int k = 0; k < old.x_count; ++k) out.x_names.push_back(prob.x_names[static_cast<std::size_t>(old.x_offset + k)]);
    out.A.middleCols(col, old.x_count) = prob.A.middleCols(old.x_offset, old.x_count);
    for (int k = 0; k < old.constraint_count; ++k)
      out.constraints.push_back(prob.constraints[static_cast<std::size_t>(old.constraint_offset + k)]);
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (owner[j] != static_cast<int>(i)) continue;
      out.x_names.push_back(names[j]);
      out.constraints.push_back(slack_constraints[j]);
      ++slice.x_count;
      ++slice.constraint_count;
    }
    col += slice.x_count;
    out.blocks.push_back(std::move(slice));
  }
  return out;
}

Vector initial_slack_point(const Problem& original, const InequalitySpec& ineq, const Problem& with_slacks,
                           const Vector& x0) {
  if (x0.size() != original.n()) throw ModelError("initial point dimension does not match the problem");
  const auto names = slack_names_for(ineq, {});
  VariableSet vars(original.x_names);
  std::unordered_map<std::string, double> value;
  for (int i = 0; i < original.n(); ++i) value[original.x_names[static_cast<std::size_t>(i)]] = x0[i];
  for (std::size_t j = 0; j < ineq.constraints.size(); ++j) {
    const double h = Tape(ineq.constraints[j], vars)({x0.data(), static_cast<std::size_t>(x0.size())});
    value[names[j]] = std::max(std::sqrt(std::max(-h, 0.0)), 1e-3);
  }
  Vector out(with_slacks.n());
  for (int i = 0; i < with_slacks.n(); ++i) {
    auto it = value.find(with_slacks.x_names[static_cast<std::size_t>(i)]);
    if (it == value.end()) throw ModelError("slack problem has a variable the original lacks");
    out[i] = it->second;
  }
  return out;
}

std::vector<BlockSlice> effective_blocks(const Problem& prob) {
  if (!prob.blocks.empty()) return prob.blocks;
  BlockSlice all;
  all.x_count = prob.n();
  all.constraint_count = prob.p();
  all.row_count = prob.q();
  all.objective = prob.objective;
  return {all};
}

ValidationReport validate(const Problem& prob) {
  ValidationReport rep;
  auto fail = [&rep](bool& flag, std::string msg) {
    flag = false;
    rep.failures.push_back(std::move(msg));
  };

  const Eigen::Index n = prob.n(), m = prob.m(), q = prob.q();
  if (prob.A.rows() != q) fail(rep.dimensions_ok, fmt::format("A has {} rows but b has {} entries", prob.A.rows(), q));
  if (prob.A.cols() != n) fail(rep.dimensions_ok, fmt::format("A has {} columns for {} x variables", prob.A.cols(), n));
  if (prob.B.rows() != q) fail(rep.dimensions_ok, fmt::format("B has {} rows but b has {} entries", prob.B.rows(), q));
  if (prob.B.cols() != m) fail(rep.dimensions_ok, fmt::format("B has {} columns for {} y variables", prob.B.cols(), m));
  if (!prob.A.allFinite() || !prob.B.allFinite() || !prob.b.allFinite())
    fail(rep.dimensions_ok, "A, B and b must be finite");

  if (m == 0) {
    rep.b_rank = 0;
    fail(rep.b_full_column_rank, "B has no columns: the coupling needs at least one y variable");
  } else if (rep.dimensions_ok) {
    rep.b_rank = static_cast<int>(linalg::numeric_rank(prob.B, 1e-10));
    if (rep.b_rank < m)
      fail(rep.b_full_column_rank, fmt::format("B does not have full column rank (rank {} < {})", rep.b_rank, m));
  }

  std::unordered_set<std::string> xs;
  for (const auto& x : prob.x_names) {
    if (!xs.insert(x).second) fail(rep.variables_ok, fmt::format("duplicate x variable '{}'", x));
  }
  std::unordered_set<std::string> ys;
  for (const auto& y : prob.y_names) {
    if (!ys.insert(y).second) fail(rep.variables_ok, fmt::format("duplicate y variable '{}'", y));
    if (xs.count(y)) fail(rep.variables_ok, fmt::format("'{}' is declared as both x and y", y));
  }
  auto check_vars = [&](const Expr& e, const std::string& where, const std::set<std::string>* allowed) {
    for (const auto& v : e.variables()) {
      if (!xs.count(v)) fail(rep.variables_ok, fmt::format("{} references undeclared variable '{}'", where, v));
      else if (allowed && !allowed->count(v))
        fail(rep.blocks_ok, fmt::format("{} references '{}' outside its block", where, v));
    }
  };
  check_vars(prob.objective, "objective", nullptr);
  for (int j = 0; j < prob.p(); ++j) check_vars(prob.constraints[static_cast<std::size_t>(j)], fmt::format("constraint {}", j), nullptr);

  if (!prob.blocks.empty() && rep.dimensions_ok) {
    int next_x = 0, next_c = 0;
    std::vector<bool> row_owned(static_cast<std::size_t>(q), false);
    Matrix mask = Matrix::Zero(prob.A.rows(), prob.A.cols());
    for (std::size_t i = 0; i < prob.blocks.size(); ++i) {
      const auto& s = prob.blocks[i];
      if (s.x_offset != next_x || s.constraint_offset != next_c || s.x_count < 0 || s.constraint_count < 0 ||
          s.row_offset < 0 || s.row_count < 0 || s.row_offset + s.row_count > q) {
        fail(rep.blocks_ok, fmt::format("block {} ranges are not contiguous", i));
        continue;
      }
      next_x += s.x_count;
      next_c += s.constraint_count;
      if (next_x > n || next_c > prob.p()) {
        fail(rep.blocks_ok, fmt::format("block {} exceeds the problem dimensions", i));
        continue;
      }
      for (int r = s.row_offset; r < s.row_offset + s.row_count; ++r) {
        if (row_owned[static_cast<std::size_t>(r)]) fail(rep.blocks_ok, fmt::format("row {} belongs to two blocks", r));
        row_owned[static_cast<std::size_t>(r)] = true;
      }
      mask.block(s.row_offset, s.x_offset, s.row_count, s.x_count).setOnes();
      std::set<std::string> allowed(prob.x_names.begin() + s.x_offset, prob.x_names.begin() + s.x_offset + s.x_count);
      check_vars(s.objective, fmt::format("block {} objective", i), &allowed);
      for (int k = 0; k < s.constraint_count; ++k)
        check_vars(prob.constraints[static_cast<std::size_t>(s.constraint_offset + k)],
                   fmt::format("block {} constraint {}", i, k), &allowed);
    }
    if (next_x != n || next_c != prob.p()) fail(rep.blocks_ok, "blocks do not cover every variable and constraint");
    if (rep.blocks_ok && (prob.A.array() * (1.0 - mask.array())).cwiseAbs().maxCoeff() > 0.0)
      fail(rep.blocks_ok, "A has nonzeros outside the block-diagonal structure");
  }
  return rep;
}

void require_valid(const Problem& prob) {
  const auto rep = validate(prob);
  if (rep.ok()) return;
  std::string msg = "invalid problem:";
  for (const auto& f : rep.failures) msg += "\n  " + f;
  throw ModelError(msg);
}

// ---------------------------------------------------------------------------

ProblemFunctions::ProblemFunctions(const Problem& prob) : n_(prob.n()) {
  VariableSet vars(prob.x_names);
  objective_ = SmoothFunction(prob.objective, vars);
  constraints_.reserve(prob.constraints.size());
  for (const auto& c : prob.constraints) constraints_.emplace_back(c, vars);
}

Vector ProblemFunctions::constraint_values(const Vector& x) const {
  Vector c(p());
  for (int j = 0; j < p(); ++j) c[j] = constraints_[static_cast<std::size_t>(j)].value(x);
  return c;
}

Matrix ProblemFunctions::constraint_jacobian(const Vector& x) const {
  Matrix J(p(), n_);
  for (int j = 0; j < p(); ++j) J.row(j) = constraints_[static_cast<std::size_t>(j)].gradient(x).transpose();
  return J;
}

Matrix ProblemFunctions::constraint_curvature(const Vector& x, const Vector& mu) const {
  Matrix h = Matrix::Zero(n_, n_);
  for (int j = 0; j < p(); ++j) {
    if (mu[j] != 0.0) constraints_[static_cast<std::size_t>(j)].add_hessian(x, mu[j], h);
  }
  return h;
}

Matrix ProblemFunctions::lagrangian_hessian(const Vector& x, const Vector& mu) const {
  Matrix h = objective_.hessian(x);
  for (int j = 0; j < p(); ++j) {
    if (mu[j] != 0.0) constraints_[static_cast<std::size_t>(j)].add_hessian(x, mu[j], h);
  }
  return h;
}

}  // namespace nadmm
