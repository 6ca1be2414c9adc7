#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "nadmm/expr.hpp"
#include "nadmm/io.hpp"
#include "nadmm/model.hpp"

namespace nadmm::testing {

inline std::string fixture(const std::string& name) { return std::string(NADMM_FIXTURES) + "/" + name; }

inline Problem load_fixture(const std::string& name) { return io::load_problem(fixture(name)).problem; }

/// |a - b| / max(1, |a|, |b|)
inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

/// Random expression over `vars`. Exponential nodes only wrap leaves or
/// trigonometric nodes so values stay moderate on [-1.5, 1.5]^n.
class ExprGenerator {
 public:
  ExprGenerator(std::uint64_t seed, std::vector<std::string> vars) : rng_(seed), vars_(std::move(vars)) {}

  Expr operator()(int depth) {
    if (depth <= 0 || uniform(0, 9) < 2) return leaf();
    switch (uniform(0, 7)) {
      case 0:
      case 1:
        return Expr::add((*this)(depth - 1), (*this)(depth - 1));
      case 2:
      case 3:
        return Expr::mul((*this)(depth - 1), (*this)(depth - 1));
      case 4:
        return Expr::pow((*this)(depth - 1), uniform(0, 4));
      case 5:
        return Expr::neg((*this)(depth - 1));
      case 6:
        return uniform(0, 1) == 0 ? Expr::sin((*this)(depth - 1)) : Expr::cos((*this)(depth - 1));
      default:
        return Expr::exp(uniform(0, 1) == 0 ? leaf() : Expr::sin((*this)(depth - 1)));
    }
  }

  Vector point(double box = 1.5) {
    std::uniform_real_distribution<double> d(-box, box);
    Vector v(static_cast<Eigen::Index>(vars_.size()));
    for (auto& x : v) x = d(rng_);
    return v;
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Expr leaf() {
    if (uniform(0, 2) == 0) return Expr::constant(std::uniform_real_distribution<double>(-2.0, 2.0)(rng_));
    return Expr::variable(vars_[static_cast<std::size_t>(uniform(0, static_cast<int>(vars_.size()) - 1))]);
  }

  std::mt19937_64 rng_;
  std::vector<std::string> vars_;
};

struct FdErrors {
  double gradient = 0.0;
  double hessian = 0.0;
};

/// Worst componentwise relative error of the symbolic gradient against central
/// differences of the value, and of the Hessian against central differences
/// of the symbolic gradient.
inline FdErrors fd_errors(const SmoothFunction& f, const Vector& x, double h = 1e-5) {
  FdErrors e;
  const Vector g = f.gradient(x);
  const Matrix H = f.hessian(x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (f.value(xp) - f.value(xm)) / (2 * h);
    e.gradient = std::max(e.gradient, rel_err(g[i], fd));
    const Vector col = (f.gradient(xp) - f.gradient(xm)) / (2 * h);
    for (Eigen::Index j = 0; j < x.size(); ++j) e.hessian = std::max(e.hessian, rel_err(H(j, i), col[j]));
  }
  return e;
}

}  // namespace nadmm::testing
