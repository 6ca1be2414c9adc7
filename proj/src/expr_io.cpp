#include <cctype>
#include <charconv>
#include <cmath>

#include "fmt/format.h"
#include "nadmm/expr.hpp"

namespace nadmm {

namespace {

using nlohmann::json;

bool is_identifier(const std::string& s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  }
  return true;
}

int parse_exponent(const json& j, const std::string& path) {
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v < 0) throw ExprError("pow exponent must be non-negative", path);
    if (v > 1024) throw ExprError("pow exponent too large", path);
    return static_cast<int>(v);
  }
  if (j.is_number()) throw ExprError("non-integer exponent", path);
  throw ExprError("pow exponent must be an integer", path);
}

Expr parse_node(const json& j, const std::string& path) {
  if (!j.is_object() || j.size() != 1)
    throw ExprError("expression node must be an object with exactly one key", path.empty() ? "/" : path);
  const auto it = j.begin();
  const std::string key = it.key();
  const json& body = it.value();
  const std::string here = path + "/" + key;

  if (key == "const") {
    if (!body.is_number()) throw ExprError("const expects a number", here);
    return Expr::constant(body.get<double>());
  }
  if (key == "var") {
    if (!body.is_string()) throw ExprError("var expects a string", here);
    auto name = body.get<std::string>();
    if (!is_identifier(name)) throw ExprError("invalid variable name '" + name + "'", here);
    return Expr::variable(std::move(name));
  }
  if (key == "add" || key == "mul") {
    if (!body.is_array() || body.size() < 2) throw ExprError(key + " expects an array of 2+ children", here);
    Expr acc = parse_node(body[0], here + "/0");
    for (std::size_t i = 1; i < body.size(); ++i) {
      Expr rhs = parse_node(body[i], here + "/" + std::to_string(i));
      acc = key == "add" ? Expr::add(std::move(acc), std::move(rhs))
                         : Expr::mul(std::move(acc), std::move(rhs));
    }
    return acc;
  }
  if (key == "pow") {
    if (!body.is_array() || body.size() != 2) throw ExprError("pow expects [child, integer]", here);
    Expr base = parse_node(body[0], here + "/0");
    return Expr::pow(std::move(base), parse_exponent(body[1], here + "/1"));
  }
  if (key == "neg" || key == "sin" || key == "cos" || key == "exp") {
    const json* arg = &body;
    std::string arg_path = here;
    if (body.is_array()) {
      if (body.size() != 1) throw ExprError(key + " expects one child", here);
      arg = &body[0];
      arg_path += "/0";
    }
    Expr a = parse_node(*arg, arg_path);
    if (key == "neg") return Expr::neg(std::move(a));
    if (key == "sin") return Expr::sin(std::move(a));
    if (key == "cos") return Expr::cos(std::move(a));
    return Expr::exp(std::move(a));
  }
  throw ExprError("unknown operator '" + key + "'", here);
}

// Recursive-descent parser for the infix form.
class TextParser {
 public:
  explicit TextParser(std::string_view src) : src_(src) {}

  Expr parse() {
    Expr e = parse_sum();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ExprError("syntax error: " + msg, "column " + std::to_string(pos_ + 1));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr acc = parse_product();
    for (;;) {
      if (accept('+')) {
        acc = Expr::add(std::move(acc), parse_product());
      } else if (accept('-')) {
        acc = Expr::add(std::move(acc), Expr::neg(parse_product()));
      } else {
        return acc;
      }
    }
  }

  Expr parse_product() {
    Expr acc = parse_unary();
    while (accept('*')) acc = Expr::mul(std::move(acc), parse_unary());
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '/') fail("division is not supported");
    return acc;
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::neg(parse_unary());
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (!accept('^')) return base;
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (start == pos_) fail("exponent must be a non-negative integer literal");
    if (pos_ < src_.size() && (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E'))
      fail("non-integer exponent");
    int k = 0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, k);
    if (ec != std::errc() || k > 1024) fail("exponent out of range");
    return Expr::pow(std::move(base), k);
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), v);
      if (ec != std::errc()) fail("malformed number");
      pos_ = static_cast<std::size_t>(ptr - src_.data());
      return Expr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '_' || src_[pos_] == '.'))
        ++pos_;
      std::string ident(src_.substr(start, pos_ - start));
      if (accept('(')) {
        Expr arg = parse_sum();
        if (!accept(')')) fail("expected ')'");
        if (ident == "sin") return Expr::sin(std::move(arg));
        if (ident == "cos") return Expr::cos(std::move(arg));
        if (ident == "exp") return Expr::exp(std::move(arg));
        pos_ = start;
        fail("unknown function '" + ident + "'");
      }
      return Expr::variable(std::move(ident));
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(const json& source) {
  if (source.is_string()) return parse_expr_text(source.get<std::string>());
  return parse_node(source, "");
}

json serialize_expr(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Const:
      return {{"const", e.value()}};
    case ExprKind::Var:
      return {{"var", e.name()}};
    case ExprKind::Add:
    case ExprKind::Mul:
      return {{std::string(to_string(e.kind())),
               json::array({serialize_expr(e.child(0)), serialize_expr(e.child(1))})}};
    case ExprKind::Pow:
      return {{"pow", json::array({serialize_expr(e.child(0)), e.exponent()})}};
    case ExprKind::Neg:
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp:
      return {{std::string(to_string(e.kind())), serialize_expr(e.child(0))}};
  }
  return nullptr;
}

Expr parse_expr_text(std::string_view text) { return TextParser(text).parse(); }

std::string to_text(const Expr& e) {
  switch (e.kind()) {
    case ExprKind::Const:
      return e.value() < 0 ? fmt::format("({:.17g})", e.value()) : fmt::format("{:.17g}", e.value());
    case ExprKind::Var:
      return e.name();
    case ExprKind::Add:
      return "(" + to_text(e.child(0)) + " + " + to_text(e.child(1)) + ")";
    case ExprKind::Mul:
      return "(" + to_text(e.child(0)) + " * " + to_text(e.child(1)) + ")";
    case ExprKind::Pow: {
      const Expr& b = e.child(0);
      std::string base = to_text(b);
      if (b.kind() != ExprKind::Var && b.kind() != ExprKind::Const) base = "(" + base + ")";
      return base + "^" + std::to_string(e.exponent());
    }
    case ExprKind::Neg:
      return "-(" + to_text(e.child(0)) + ")";
    case ExprKind::Sin:
    case ExprKind::Cos:
    case ExprKind::Exp:
      return std::string(to_string(e.kind())) + "(" + to_text(e.child(0)) + ")";
  }
  return {};
}

}  // namespace nadmm
