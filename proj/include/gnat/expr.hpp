#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gnat {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t pos)
      : std::runtime_error(msg + " at position " + std::to_string(pos)), position(pos) {}
  std::size_t position;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnboundVariable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Pow, Sin, Cos, Tan, Exp, Log, Sqrt };

struct Node {
  Op op = Op::Const;
  double value = 0.0;  // Const
  int var = -1;        // Var: index into the expression's variable list
  long num = 1;        // Pow: exponent num/den
  long den = 1;
  std::shared_ptr<const Node> a, b;
};

using NodePtr = std::shared_ptr<const Node>;
using VarList = std::shared_ptr<const std::vector<std::string>>;

// Immutable expression over an ordered variable list.
class ScalarExpr {
 public:
  ScalarExpr();
  ScalarExpr(NodePtr root, VarList vars);

  static ScalarExpr constant(double c, VarList vars);
  static ScalarExpr variable(int index, VarList vars);

  const NodePtr& root() const { return root_; }
  const VarList& var_list() const { return vars_; }
  const std::vector<std::string>& vars() const { return *vars_; }
  int var_index(const std::string& name) const;

  std::set<std::string> free_vars() const;
  bool is_constant() const { return root_->op == Op::Const; }
  bool is_zero() const { return is_constant() && root_->value == 0.0; }
  double constant_value() const { return root_->value; }

  // Maps variables by name onto another list; throws if a free variable is missing.
  ScalarExpr rebind(const VarList& vars) const;

  double evaluate(const std::map<std::string, double>& bindings) const;
  double evaluate(std::span<const double> values) const;
  template <class T>
  T eval(std::span<const T> values) const;

  std::string str() const;

 private:
  NodePtr root_;
  VarList vars_;
};

VarList make_var_list(std::vector<std::string> names);

ScalarExpr parse_expression(const std::string& text, const std::vector<std::string>& allowed_vars);
ScalarExpr parse_expression(const std::string& text, const VarList& vars);

ScalarExpr differentiate(const ScalarExpr& e, const std::string& var);
ScalarExpr differentiate(const ScalarExpr& e, int var_index);

std::string print_expression(const ScalarExpr& e);
bool structurally_equal(const ScalarExpr& x, const ScalarExpr& y);

// Folding constructors; operands must share a variable list.
ScalarExpr operator+(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator-(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator*(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator/(const ScalarExpr& x, const ScalarExpr& y);
ScalarExpr operator-(const ScalarExpr& x);
ScalarExpr pow(const ScalarExpr& x, long num, long den = 1);
ScalarExpr apply(Op fn, const ScalarExpr& x);

namespace detail {
NodePtr make_const(double c);
NodePtr make_var(int index);
NodePtr make_binary(Op op, NodePtr x, NodePtr y);
NodePtr make_neg(NodePtr x);
NodePtr make_pow(NodePtr x, long num, long den);
NodePtr make_fn(Op fn, NodePtr x);
double apply_unary(Op fn, double x);
double rational_pow(double x, long num, long den);
}  // namespace detail

inline double value_of(double x) { return x; }
inline double rational_power(double x, long num, long den) {
  return detail::rational_pow(x, num, den);
}
inline double unary_function(Op fn, double x) { return detail::apply_unary(fn, x); }

template <class T>
T eval_node(const Node& n, std::span<const T> values) {
  switch (n.op) {
    case Op::Const: return T(n.value);
    case Op::Var: return values[static_cast<std::size_t>(n.var)];
    case Op::Add: return eval_node<T>(*n.a, values) + eval_node<T>(*n.b, values);
    case Op::Sub: return eval_node<T>(*n.a, values) - eval_node<T>(*n.b, values);
    case Op::Mul: return eval_node<T>(*n.a, values) * eval_node<T>(*n.b, values);
    case Op::Div: {
      T num = eval_node<T>(*n.a, values);
      T den = eval_node<T>(*n.b, values);
      if (value_of(den) == 0.0) throw DomainError("division by zero");
      return num / den;
    }
    case Op::Neg: return -eval_node<T>(*n.a, values);
    case Op::Pow: return rational_power(eval_node<T>(*n.a, values), n.num, n.den);
    default: return unary_function(n.op, eval_node<T>(*n.a, values));
  }
}

template <class T>
T ScalarExpr::eval(std::span<const T> values) const {
  if (values.size() < vars_->size()) throw UnboundVariable("too few values for expression variables");
  return eval_node<T>(*root_, values);
}

}  // namespace gnat
