#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gnat/expr.hpp"

namespace gnat {

// Monomial layout for truncated Taylor polynomials in m variables up to order N.
// Graded ordering: the monomials of degree <= d form a prefix for every d.
class JetSpace {
 public:
  static const JetSpace* get(int nvars, int order);

  int nvars() const { return nvars_; }
  int order() const { return order_; }
  int size(int order) const { return degree_start_[static_cast<std::size_t>(order) + 1]; }
  int size() const { return size(order_); }
  int degree(int k) const { return degree_[static_cast<std::size_t>(k)]; }
  const std::vector<std::uint8_t>& exponents(int k) const { return exps_[static_cast<std::size_t>(k)]; }
  int index_of(const std::vector<std::uint8_t>& exps) const;
  // Index of monomial k times x_i, or -1 past the top order.
  int raise(int i, int k) const { return raise_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]; }

  struct Term {
    int i, j, k;
  };
  // Products c_i * c_j -> c_k, sorted by k.
  const std::vector<Term>& products() const { return products_; }
  std::size_t products_below(int size) const;

 private:
  JetSpace(int nvars, int order);
  int nvars_, order_;
  std::vector<std::vector<std::uint8_t>> exps_;
  std::vector<int> degree_;
  std::vector<int> degree_start_;
  std::vector<std::vector<int>> raise_;
  std::vector<Term> products_;
  std::vector<std::size_t> product_end_;  // by result index
};

// Truncated Taylor polynomial; coefficients c_alpha = d^alpha f / alpha!.
// A jet without a space is an exact constant.
class Jet {
 public:
  Jet() = default;
  Jet(double c) : value_(c) {}  // NOLINT(google-explicit-constructor)

  static Jet variable(const JetSpace* space, int i, double at, int order);
  static Jet constant(const JetSpace* space, double c, int order);

  const JetSpace* space() const { return space_; }
  bool is_constant() const { return space_ == nullptr; }
  int order() const;  // -1 for constants (exact at every order)
  double value() const { return space_ ? coef_[0] : value_; }
  double coef(int k) const;
  std::span<const double> coefs() const { return coef_; }
  std::vector<double>& mutable_coefs() { return coef_; }

  double partial(int i) const;
  double partial(int i, int j) const;
  Jet derivative(int i) const;
  Jet truncated(int order) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(const Jet& a, const Jet& b);
  friend Jet operator/(const Jet& a, const Jet& b);
  friend Jet operator-(const Jet& a);

 private:
  Jet(const JetSpace* space, int order) : space_(space), order_(order) {}
  friend Jet compose(const Jet& x, std::span<const double> derivs);
  const JetSpace* space_ = nullptr;
  int order_ = -1;
  double value_ = 0.0;
  std::vector<double> coef_;
};

// f(x) from derivs[k] = f^(k)(x.value()), k = 0..order(x).
Jet compose(const Jet& x, std::span<const double> derivs);

inline double value_of(const Jet& x) { return x.value(); }
Jet rational_power(const Jet& x, long num, long den);
Jet unary_function(Op fn, const Jet& x);

// Evaluates an expression as jets: variable v maps to values[v].
inline Jet eval_jet(const ScalarExpr& e, std::span<const Jet> values) { return e.eval<Jet>(values); }

}  // namespace gnat
