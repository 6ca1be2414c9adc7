#include "nadmm/expr.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cmath>
#include <unordered_set>
#include <utility>

namespace nadmm {

struct Expr::Node {
  ExprKind kind;
  double value = 0.0;
  std::string name;
  int exponent = 0;
  std::vector<Expr> children;
};

std::string_view to_string(ExprKind kind) {
  switch (kind) {
    case ExprKind::Const: return "const";
    case ExprKind::Var: return "var";
    case ExprKind::Add: return "add";
    case ExprKind::Mul: return "mul";
    case ExprKind::Pow: return "pow";
    case ExprKind::Neg: return "neg";
    case ExprKind::Sin: return "sin";
    case ExprKind::Cos: return "cos";
    case ExprKind::Exp: return "exp";
  }
  return "?";
}

Expr::Expr() : Expr(constant(0.0)) {}

Expr::Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Const;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = ExprKind::Var;
  n->name = std::move(name);
  return Expr(std::move(n));
}

namespace {

template <class NodeT>
std::shared_ptr<NodeT> make_node(ExprKind kind, std::vector<Expr> children) {
  auto n = std::make_shared<NodeT>();
  n->kind = kind;
  n->children = std::move(children);
  return n;
}

}  // namespace

Expr Expr::add(Expr lhs, Expr rhs) {
  return Expr(make_node<Node>(ExprKind::Add, {std::move(lhs), std::move(rhs)}));
}
Expr Expr::mul(Expr lhs, Expr rhs) {
  return Expr(make_node<Node>(ExprKind::Mul, {std::move(lhs), std::move(rhs)}));
}
Expr Expr::pow(Expr base, int exponent) {
  if (exponent < 0) throw ExprError("pow exponent must be a non-negative integer");
  auto n = make_node<Node>(ExprKind::Pow, {std::move(base)});
  n->exponent = exponent;
  return Expr(std::move(n));
}
Expr Expr::neg(Expr arg) { return Expr(make_node<Node>(ExprKind::Neg, {std::move(arg)})); }
Expr Expr::sin(Expr arg) { return Expr(make_node<Node>(ExprKind::Sin, {std::move(arg)})); }
Expr Expr::cos(Expr arg) { return Expr(make_node<Node>(ExprKind::Cos, {std::move(arg)})); }
Expr Expr::exp(Expr arg) { return Expr(make_node<Node>(ExprKind::Exp, {std::move(arg)})); }

ExprKind Expr::kind() const { return node_->kind; }
double Expr::value() const { return node_->value; }
const std::string& Expr::name() const { return node_->name; }
int Expr::exponent() const { return node_->exponent; }
const Expr& Expr::child(std::size_t i) const { return node_->children.at(i); }
std::size_t Expr::arity() const { return node_->children.size(); }

bool Expr::is_constant(double v) const {
  return node_->kind == ExprKind::Const && node_->value == v;
}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.kind() != b.kind() || a.arity() != b.arity()) return false;
  switch (a.kind()) {
    case ExprKind::Const:
      return std::bit_cast<std::uint64_t>(a.value()) == std::bit_cast<std::uint64_t>(b.value());
    case ExprKind::Var:
      return a.name() == b.name();
    case ExprKind::Pow:
      if (a.exponent() != b.exponent()) return false;
      break;
    default:
      break;
  }
  for (std::size_t i = 0; i < a.arity(); ++i) {
    if (!(a.child(i) == b.child(i))) return false;
  }
  return true;
}

std::vector<std::string> Expr::variables() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::vector<const Expr*> stack{this};
  while (!stack.empty()) {
    const Expr* e = stack.back();
    stack.pop_back();
    if (e->kind() == ExprKind::Var) {
      if (seen.insert(e->name()).second) out.push_back(e->name());
      continue;
    }
    for (std::size_t i = e->arity(); i-- > 0;) stack.push_back(&e->child(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simplifying builders

namespace {

double int_pow(double base, int n) {
  double result = 1.0;
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

}  // namespace

Expr operator+(const Expr& a, const Expr& b) {
  if (a.kind() == ExprKind::Const && b.kind() == ExprKind::Const)
    return Expr::constant(a.value() + b.value());
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  return Expr::add(a, b);
}

Expr operator-(const Expr& a) {
  if (a.kind() == ExprKind::Const) return Expr::constant(-a.value());
  if (a.kind() == ExprKind::Neg) return a.child(0);
  return Expr::neg(a);
}

Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

Expr operator*(const Expr& a, const Expr& b) {
  if (a.kind() == ExprKind::Const && b.kind() == ExprKind::Const)
    return Expr::constant(a.value() * b.value());
  if (a.is_constant(0.0) || b.is_constant(0.0)) return Expr::constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return -b;
  if (b.is_constant(-1.0)) return -a;
  return Expr::mul(a, b);
}

Expr ipow(const Expr& base, int exponent) {
  if (exponent == 0) return Expr::constant(1.0);
  if (exponent == 1) return base;
  if (base.kind() == ExprKind::Const) return Expr::constant(int_pow(base.value(), exponent));
  return Expr::pow(base, exponent);
}

Expr sin(const Expr& a) {
  if (a.kind() == ExprKind::Const) return Expr::constant(std::sin(a.value()));
  return Expr::sin(a);
}
Expr cos(const Expr& a) {
  if (a.kind() == ExprKind::Const) return Expr::constant(std::cos(a.value()));
  return Expr::cos(a);
}
Expr exp(const Expr& a) {
  if (a.kind() == ExprKind::Const) return Expr::constant(std::exp(a.value()));
  return Expr::exp(a);
}

Expr diff(const Expr& e, const std::string& var) {
  switch (e.kind()) {
    case ExprKind::Const:
      return Expr::constant(0.0);
    case ExprKind::Var:
      return Expr::constant(e.name() == var ? 1.0 : 0.0);
    case ExprKind::Add:
      return diff(e.child(0), var) + diff(e.child(1), var);
    case ExprKind::Mul: {
      const Expr& u = e.child(0);
      const Expr& v = e.child(1);
      return diff(u, var) * v + u * diff(v, var);
    }
    case ExprKind::Pow: {
      const int n = e.exponent();
      if (n == 0) return Expr::constant(0.0);
      const Expr du = diff(e.child(0), var);
      return Expr::constant(static_cast<double>(n)) * ipow(e.child(0), n - 1) * du;
    }
    case ExprKind::Neg:
      return -diff(e.child(0), var);
    case ExprKind::Sin:
      return cos(e.child(0)) * diff(e.child(0), var);
    case ExprKind::Cos:
      return -(sin(e.child(0)) * diff(e.child(0), var));
    case ExprKind::Exp:
      return exp(e.child(0)) * diff(e.child(0), var);
  }
  throw ExprError("unknown expression node");
}

// ---------------------------------------------------------------------------
// Variables and points

VariableSet::VariableSet(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second)
      throw ExprError("duplicate variable '" + names_[i] + "'");
  }
}

std::size_t VariableSet::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ExprError("unknown variable '" + name + "'");
  return it->second;
}

Point::Point(std::shared_ptr<const VariableSet> vars, Vector values)
    : vars_(std::move(vars)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != vars_->size())
    throw ExprError("point has " + std::to_string(values_.size()) + " values for " +
                    std::to_string(vars_->size()) + " variables");
}

Point::Point(std::vector<std::string> names, std::vector<double> values)
    : Point(std::make_shared<const VariableSet>(std::move(names)),
            Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()))) {}

double Point::operator[](const std::string& name) const {
  return values_[static_cast<Eigen::Index>(vars_->index(name))];
}

// ---------------------------------------------------------------------------
// Tape

Tape::Tape(const Expr& e, const VariableSet& vars) {
  zero_ = e.is_constant(0.0);
  emit(e, vars, 0);
}

void Tape::emit(const Expr& e, const VariableSet& vars, int depth) {
  switch (e.kind()) {
    case ExprKind::Const:
      code_.push_back({Op::Const, 0, e.value()});
      break;
    case ExprKind::Var:
      code_.push_back({Op::Var, static_cast<int>(vars.index(e.name())), 0.0});
      break;
    case ExprKind::Add:
    case ExprKind::Mul:
      emit(e.child(0), vars, depth);
      emit(e.child(1), vars, depth + 1);
      code_.push_back({e.kind() == ExprKind::Add ? Op::Add : Op::Mul, 0, 0.0});
      break;
    case ExprKind::Pow:
      emit(e.child(0), vars, depth);
      code_.push_back({Op::Pow, e.exponent(), 0.0});
      break;
    case ExprKind::Neg:
      emit(e.child(0), vars, depth);
      code_.push_back({Op::Neg, 0, 0.0});
      break;
    case ExprKind::Sin:
      emit(e.child(0), vars, depth);
      code_.push_back({Op::Sin, 0, 0.0});
      break;
    case ExprKind::Cos:
      emit(e.child(0), vars, depth);
      code_.push_back({Op::Cos, 0, 0.0});
      break;
    case ExprKind::Exp:
      emit(e.child(0), vars, depth);
      code_.push_back({Op::Exp, 0, 0.0});
      break;
  }
  if (depth + 1 > max_depth_) max_depth_ = depth + 1;
}

double Tape::operator()(std::span<const double> x) const {
  if (code_.empty()) return 0.0;
  constexpr int kInline = 32;
  std::array<double, kInline> inline_stack;
  std::vector<double> heap_stack;
  double* stack = inline_stack.data();
  if (max_depth_ > kInline) {
    heap_stack.resize(static_cast<std::size_t>(max_depth_));
    stack = heap_stack.data();
  }
  int top = 0;
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Op::Const: stack[top++] = ins.value; break;
      case Op::Var: stack[top++] = x[static_cast<std::size_t>(ins.arg)]; break;
      case Op::Add: --top; stack[top - 1] += stack[top]; break;
      case Op::Mul: --top; stack[top - 1] *= stack[top]; break;
      case Op::Pow: stack[top - 1] = int_pow(stack[top - 1], ins.arg); break;
      case Op::Neg: stack[top - 1] = -stack[top - 1]; break;
      case Op::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
    }
  }
  return stack[0];
}

// ---------------------------------------------------------------------------
// SmoothFunction

SmoothFunction::SmoothFunction(const Expr& e, const VariableSet& vars) : value_(e, vars) {
  const std::size_t n = vars.size();
  std::vector<Expr> first;
  first.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    first.push_back(diff(e, vars[i]));
    gradient_.emplace_back(first.back(), vars);
  }
  hessian_upper_.reserve(n * (n + 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) hessian_upper_.emplace_back(diff(first[i], vars[j]), vars);
  }
}

namespace {
std::span<const double> as_span(const Vector& x) {
  return {x.data(), static_cast<std::size_t>(x.size())};
}
}  // namespace

double SmoothFunction::value(const Vector& x) const { return value_(as_span(x)); }

Vector SmoothFunction::gradient(const Vector& x) const {
  Vector g(static_cast<Eigen::Index>(gradient_.size()));
  for (std::size_t i = 0; i < gradient_.size(); ++i)
    g[static_cast<Eigen::Index>(i)] = gradient_[i].is_zero() ? 0.0 : gradient_[i](as_span(x));
  return g;
}

Matrix SmoothFunction::hessian(const Vector& x) const {
  const auto n = static_cast<Eigen::Index>(gradient_.size());
  Matrix h = Matrix::Zero(n, n);
  add_hessian(x, 1.0, h);
  return h;
}

void SmoothFunction::add_hessian(const Vector& x, double scale, Matrix& out) const {
  const auto n = static_cast<Eigen::Index>(gradient_.size());
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j, ++k) {
      if (hessian_upper_[k].is_zero()) continue;
      const double v = scale * hessian_upper_[k](as_span(x));
      out(i, j) += v;
      if (i != j) out(j, i) += v;
    }
  }
}

double eval(const Expr& e, const Point& p) {
  return Tape(e, p.variables())(as_span(p.dense()));
}

Vector grad(const Expr& e, const Point& p) {
  return SmoothFunction(e, p.variables()).gradient(p.dense());
}

Matrix hess(const Expr& e, const Point& p) {
  return SmoothFunction(e, p.variables()).hessian(p.dense());
}

}  // namespace nadmm
