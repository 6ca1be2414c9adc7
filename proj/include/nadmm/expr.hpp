#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace nadmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for malformed expression sources and evaluation against points
/// that lack a referenced variable. `where()` holds a JSON pointer or a
/// 1-based column for text sources.
class ExprError : public std::runtime_error {
 public:
  ExprError(const std::string& what, std::string where = {})
      : std::runtime_error(where.empty() ? what : what + " at " + where),
        where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

enum class ExprKind { Const, Var, Add, Mul, Pow, Neg, Sin, Cos, Exp };

std::string_view to_string(ExprKind kind);

/// Immutable scalar expression tree. Nodes are shared; copying an Expr is
/// cheap and never deep-copies.
class Expr {
 public:
  /// Defaults to the constant zero.
  Expr();

  // Raw constructors: build exactly the requested node, no simplification.
  static Expr constant(double value);
  static Expr variable(std::string name);
  static Expr add(Expr lhs, Expr rhs);
  static Expr mul(Expr lhs, Expr rhs);
  static Expr pow(Expr base, int exponent);
  static Expr neg(Expr arg);
  static Expr sin(Expr arg);
  static Expr cos(Expr arg);
  static Expr exp(Expr arg);

  ExprKind kind() const;
  double value() const;             // Const only
  const std::string& name() const;  // Var only
  int exponent() const;             // Pow only
  const Expr& child(std::size_t i) const;
  std::size_t arity() const;

  bool is_constant(double v) const;

  /// Structural equality; constants compare bitwise.
  friend bool operator==(const Expr& a, const Expr& b);

  /// Distinct variable names referenced, in first-occurrence order.
  std::vector<std::string> variables() const;

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// Simplifying builders (constant folding plus 0/1 identities). These are
// used by the symbolic differentiator and by canonicalizers.
Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr ipow(const Expr& base, int exponent);
Expr sin(const Expr& a);
Expr cos(const Expr& a);
Expr exp(const Expr& a);

/// Symbolic partial derivative with constant folding.
Expr diff(const Expr& e, const std::string& var);

/// Ordered list of variable names with O(1) lookup.
class VariableSet {
 public:
  VariableSet() = default;
  explicit VariableSet(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& operator[](std::size_t i) const { return names_[i]; }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  /// Throws ExprError when absent.
  std::size_t index(const std::string& name) const;

  friend bool operator==(const VariableSet& a, const VariableSet& b) {
    return a.names_ == b.names_;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Values for exactly the declared variables, in declaration order.
class Point {
 public:
  Point(std::shared_ptr<const VariableSet> vars, Vector values);
  Point(std::vector<std::string> names, std::vector<double> values);

  const VariableSet& variables() const { return *vars_; }
  const Vector& dense() const { return values_; }
  double operator[](const std::string& name) const;

 private:
  std::shared_ptr<const VariableSet> vars_;
  Vector values_;
};

/// Expression compiled to a postfix program over variable indices.
class Tape {
 public:
  Tape() = default;
  Tape(const Expr& e, const VariableSet& vars);

  double operator()(std::span<const double> x) const;
  bool is_zero() const { return zero_; }

 private:
  enum class Op : unsigned char { Const, Var, Add, Mul, Pow, Neg, Sin, Cos, Exp };
  struct Instr {
    Op op;
    int arg;
    double value;
  };
  void emit(const Expr& e, const VariableSet& vars, int depth);

  std::vector<Instr> code_;
  int max_depth_ = 0;
  bool zero_ = true;
};

/// Value, gradient and Hessian of one expression over a fixed variable
/// order. Derivatives are symbolic; the Hessian is built from the upper
/// triangle and mirrored, so it is exactly symmetric.
class SmoothFunction {
 public:
  SmoothFunction() = default;
  SmoothFunction(const Expr& e, const VariableSet& vars);

  std::size_t dimension() const { return gradient_.size(); }
  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Matrix hessian(const Vector& x) const;
  /// out += scale * hessian(x), skipping structurally zero entries.
  void add_hessian(const Vector& x, double scale, Matrix& out) const;

 private:
  Tape value_;
  std::vector<Tape> gradient_;
  std::vector<Tape> hessian_upper_;  // row-major upper triangle
};

double eval(const Expr& e, const Point& p);
Vector grad(const Expr& e, const Point& p);
Matrix hess(const Expr& e, const Point& p);

// JSON schema: {"const":v} {"var":"x"} {"add":[a,b,...]} {"mul":[a,b,...]}
// {"pow":[a,k]} {"neg":a} {"sin":a} {"cos":a} {"exp":a}
Expr parse_expr(const nlohmann::json& source);
nlohmann::json serialize_expr(const Expr& e);

/// Infix text: numbers, identifiers, + - * ^ (integer exponent), unary
/// minus, parentheses and sin/cos/exp calls. "a - b" becomes a + (-b).
Expr parse_expr_text(std::string_view text);
std::string to_text(const Expr& e);

}  // namespace nadmm
