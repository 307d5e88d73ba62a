#include "gnat/expr.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <numeric>

namespace gnat {

namespace detail {

NodePtr make_const(double c) {
  auto n = std::make_shared<Node>();
  n->op = Op::Const;
  n->value = c == 0.0 ? 0.0 : c;  // drop negative zero
  return n;
}

NodePtr make_var(int index) {
  auto n = std::make_shared<Node>();
  n->op = Op::Var;
  n->var = index;
  return n;
}

static bool is_const(const NodePtr& n, double c) { return n->op == Op::Const && n->value == c; }
static bool is_const(const NodePtr& n) { return n->op == Op::Const; }

static NodePtr raw(Op op, NodePtr x, NodePtr y = nullptr) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = std::move(x);
  n->b = std::move(y);
  return n;
}

NodePtr make_neg(NodePtr x) {
  if (is_const(x)) return make_const(-x->value);
  if (x->op == Op::Neg) return x->a;
  return raw(Op::Neg, std::move(x));
}

NodePtr make_binary(Op op, NodePtr x, NodePtr y) {
  switch (op) {
    case Op::Add:
      if (is_const(x) && is_const(y)) return make_const(x->value + y->value);
      if (is_const(x, 0.0)) return y;
      if (is_const(y, 0.0)) return x;
      break;
    case Op::Sub:
      if (is_const(x) && is_const(y)) return make_const(x->value - y->value);
      if (is_const(y, 0.0)) return x;
      if (is_const(x, 0.0)) return make_neg(y);
      break;
    case Op::Mul:
      if (is_const(x) && is_const(y)) return make_const(x->value * y->value);
      if (is_const(x, 0.0) || is_const(y, 0.0)) return make_const(0.0);
      if (is_const(x, 1.0)) return y;
      if (is_const(y, 1.0)) return x;
      if (is_const(x, -1.0)) return make_neg(y);
      if (is_const(y, -1.0)) return make_neg(x);
      break;
    case Op::Div:
      if (is_const(x) && is_const(y) && y->value != 0.0) return make_const(x->value / y->value);
      if (is_const(x, 0.0) && !is_const(y, 0.0)) return make_const(0.0);
      if (is_const(y, 1.0)) return x;
      break;
    default: throw std::logic_error("make_binary: not a binary operator");
  }
  return raw(op, std::move(x), std::move(y));
}

double rational_pow(double x, long num, long den) {
  if (den == 1) {
    if (x == 0.0 && num < 0) throw DomainError("zero raised to a negative power");
    return std::pow(x, static_cast<double>(num));
  }
  if (x < 0.0) {
    if (den % 2 == 0) throw DomainError("even root of a negative number");
    double r = -std::pow(-x, 1.0 / static_cast<double>(den));
    return std::pow(r, static_cast<double>(num));
  }
  if (x == 0.0 && num < 0) throw DomainError("zero raised to a negative power");
  return std::pow(x, static_cast<double>(num) / static_cast<double>(den));
}

NodePtr make_pow(NodePtr x, long num, long den) {
  if (den < 0) {
    num = -num;
    den = -den;
  }
  long g = std::gcd(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  if (num == 0) return make_const(1.0);
  if (num == 1 && den == 1) return x;
  if (is_const(x)) {
    try {
      return make_const(rational_pow(x->value, num, den));
    } catch (const DomainError&) {
    }
  }
  auto n = std::make_shared<Node>();
  n->op = Op::Pow;
  n->a = std::move(x);
  n->num = num;
  n->den = den;
  return n;
}

double apply_unary(Op fn, double x) {
  switch (fn) {
    case Op::Sin: return std::sin(x);
    case Op::Cos: return std::cos(x);
    case Op::Tan: {
      if (std::cos(x) == 0.0) throw DomainError("tan at a pole");
      return std::tan(x);
    }
    case Op::Exp: return std::exp(x);
    case Op::Log:
      if (!(x > 0.0)) throw DomainError("log of a non-positive number");
      return std::log(x);
    case Op::Sqrt:
      if (x < 0.0) throw DomainError("sqrt of a negative number");
      return std::sqrt(x);
    default: throw std::logic_error("apply_unary: not a function");
  }
}

NodePtr make_fn(Op fn, NodePtr x) {
  if (is_const(x)) {
    try {
      return make_const(apply_unary(fn, x->value));
    } catch (const DomainError&) {
    }
  }
  return raw(fn, std::move(x));
}

}  // namespace detail

using namespace detail;

VarList make_var_list(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

ScalarExpr::ScalarExpr() : root_(make_const(0.0)), vars_(make_var_list({})) {}

ScalarExpr::ScalarExpr(NodePtr root, VarList vars) : root_(std::move(root)), vars_(std::move(vars)) {}

ScalarExpr ScalarExpr::constant(double c, VarList vars) { return {make_const(c), std::move(vars)}; }

ScalarExpr ScalarExpr::variable(int index, VarList vars) {
  if (index < 0 || index >= static_cast<int>(vars->size())) throw std::out_of_range("variable index");
  return {make_var(index), std::move(vars)};
}

int ScalarExpr::var_index(const std::string& name) const {
  auto it = std::find(vars_->begin(), vars_->end(), name);
  if (it == vars_->end()) return -1;
  return static_cast<int>(it - vars_->begin());
}

static void collect_vars(const Node& n, std::set<int>& out) {
  if (n.op == Op::Var) out.insert(n.var);
  if (n.a) collect_vars(*n.a, out);
  if (n.b) collect_vars(*n.b, out);
}

std::set<std::string> ScalarExpr::free_vars() const {
  std::set<int> idx;
  collect_vars(*root_, idx);
  std::set<std::string> out;
  for (int i : idx) out.insert((*vars_)[static_cast<std::size_t>(i)]);
  return out;
}

static NodePtr remap(const NodePtr& n, const std::vector<int>& map) {
  switch (n->op) {
    case Op::Const: return n;
    case Op::Var: return make_var(map[static_cast<std::size_t>(n->var)]);
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: return make_binary(n->op, remap(n->a, map), remap(n->b, map));
    case Op::Neg: return make_neg(remap(n->a, map));
    case Op::Pow: return make_pow(remap(n->a, map), n->num, n->den);
    default: return make_fn(n->op, remap(n->a, map));
  }
}

ScalarExpr ScalarExpr::rebind(const VarList& vars) const {
  if (vars == vars_) return *this;
  std::set<int> used;
  collect_vars(*root_, used);
  std::vector<int> map(vars_->size(), -1);
  for (int i : used) {
    const std::string& name = (*vars_)[static_cast<std::size_t>(i)];
    auto it = std::find(vars->begin(), vars->end(), name);
    if (it == vars->end()) throw UnboundVariable("variable '" + name + "' not in target list");
    map[static_cast<std::size_t>(i)] = static_cast<int>(it - vars->begin());
  }
  return {remap(root_, map), vars};
}

double ScalarExpr::evaluate(std::span<const double> values) const { return eval<double>(values); }

double ScalarExpr::evaluate(const std::map<std::string, double>& bindings) const {
  std::set<int> used;
  collect_vars(*root_, used);
  std::vector<double> values(vars_->size(), 0.0);
  for (int i : used) {
    const std::string& name = (*vars_)[static_cast<std::size_t>(i)];
    auto it = bindings.find(name);
    if (it == bindings.end()) throw UnboundVariable("unbound variable '" + name + "'");
    values[static_cast<std::size_t>(i)] = it->second;
  }
  return eval<double>(values);
}

std::string ScalarExpr::str() const { return print_expression(*this); }

static void check_same(const ScalarExpr& x, const ScalarExpr& y) {
  if (x.var_list() != y.var_list() && x.vars() != y.vars())
    throw std::invalid_argument("expressions over different variable lists");
}

ScalarExpr operator+(const ScalarExpr& x, const ScalarExpr& y) {
  check_same(x, y);
  return {make_binary(Op::Add, x.root(), y.root()), x.var_list()};
}
ScalarExpr operator-(const ScalarExpr& x, const ScalarExpr& y) {
  check_same(x, y);
  return {make_binary(Op::Sub, x.root(), y.root()), x.var_list()};
}
ScalarExpr operator*(const ScalarExpr& x, const ScalarExpr& y) {
  check_same(x, y);
  return {make_binary(Op::Mul, x.root(), y.root()), x.var_list()};
}
ScalarExpr operator/(const ScalarExpr& x, const ScalarExpr& y) {
  check_same(x, y);
  return {make_binary(Op::Div, x.root(), y.root()), x.var_list()};
}
ScalarExpr operator-(const ScalarExpr& x) { return {make_neg(x.root()), x.var_list()}; }
ScalarExpr pow(const ScalarExpr& x, long num, long den) { return {make_pow(x.root(), num, den), x.var_list()}; }
ScalarExpr apply(Op fn, const ScalarExpr& x) { return {make_fn(fn, x.root()), x.var_list()}; }

// ---------------------------------------------------------------------------
// Differentiation

static NodePtr diff(const NodePtr& n, int v) {
  switch (n->op) {
    case Op::Const: return make_const(0.0);
    case Op::Var: return make_const(n->var == v ? 1.0 : 0.0);
    case Op::Add: return make_binary(Op::Add, diff(n->a, v), diff(n->b, v));
    case Op::Sub: return make_binary(Op::Sub, diff(n->a, v), diff(n->b, v));
    case Op::Mul:
      return make_binary(Op::Add, make_binary(Op::Mul, diff(n->a, v), n->b),
                         make_binary(Op::Mul, n->a, diff(n->b, v)));
    case Op::Div: {
      // (a'b - ab') / b^2
      NodePtr da = diff(n->a, v);
      NodePtr db = diff(n->b, v);
      if (is_const(db, 0.0)) return make_binary(Op::Div, da, n->b);
      NodePtr numer = make_binary(Op::Sub, make_binary(Op::Mul, da, n->b), make_binary(Op::Mul, n->a, db));
      return make_binary(Op::Div, numer, make_pow(n->b, 2, 1));
    }
    case Op::Neg: return make_neg(diff(n->a, v));
    case Op::Pow: {
      NodePtr da = diff(n->a, v);
      if (is_const(da, 0.0)) return make_const(0.0);
      double r = static_cast<double>(n->num) / static_cast<double>(n->den);
      NodePtr p = make_pow(n->a, n->num - n->den, n->den);
      return make_binary(Op::Mul, make_binary(Op::Mul, make_const(r), p), da);
    }
    case Op::Sin: return make_binary(Op::Mul, make_fn(Op::Cos, n->a), diff(n->a, v));
    case Op::Cos: return make_binary(Op::Mul, make_neg(make_fn(Op::Sin, n->a)), diff(n->a, v));
    case Op::Tan:
      return make_binary(Op::Div, diff(n->a, v), make_pow(make_fn(Op::Cos, n->a), 2, 1));
    case Op::Exp: return make_binary(Op::Mul, n, diff(n->a, v));
    case Op::Log: return make_binary(Op::Div, diff(n->a, v), n->a);
    case Op::Sqrt:
      return make_binary(Op::Div, diff(n->a, v), make_binary(Op::Mul, make_const(2.0), n));
  }
  throw std::logic_error("diff: unknown node");
}

ScalarExpr differentiate(const ScalarExpr& e, int var_index) {
  if (var_index < 0 || var_index >= static_cast<int>(e.vars().size()))
    throw std::out_of_range("differentiate: variable index");
  return {diff(e.root(), var_index), e.var_list()};
}

ScalarExpr differentiate(const ScalarExpr& e, const std::string& var) {
  int idx = e.var_index(var);
  if (idx < 0) throw UnboundVariable("differentiate: '" + var + "' is not a declared variable");
  return differentiate(e, idx);
}

// ---------------------------------------------------------------------------
// Printing

static const char* fn_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    default: return "?";
  }
}

static int precedence(const Node& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return n.value < 0.0 ? 0 : 5;
    default: return 5;
  }
}

static std::string format_number(double v) {
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", v);
  std::string s(buf.data());
  // Shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    std::snprintf(buf.data(), buf.size(), "%.*g", prec, v);
    if (std::strtod(buf.data(), nullptr) == v) {
      s = buf.data();
      break;
    }
  }
  return s;
}

static void print_node(const Node& n, const std::vector<std::string>& vars, std::string& out);

static void print_child(const Node& c, int min_prec, const std::vector<std::string>& vars, std::string& out) {
  if (precedence(c) < min_prec) {
    out += '(';
    print_node(c, vars, out);
    out += ')';
  } else {
    print_node(c, vars, out);
  }
}

static void print_node(const Node& n, const std::vector<std::string>& vars, std::string& out) {
  switch (n.op) {
    case Op::Const:
      if (n.value < 0.0) {
        out += '-';
        out += format_number(-n.value);
      } else {
        out += format_number(n.value);
      }
      return;
    case Op::Var: out += vars[static_cast<std::size_t>(n.var)]; return;
    case Op::Add:
    case Op::Sub:
    case Op::Mul:
    case Op::Div: {
      int p = precedence(n);
      print_child(*n.a, p, vars, out);
      out += n.op == Op::Add ? "+" : n.op == Op::Sub ? "-" : n.op == Op::Mul ? "*" : "/";
      print_child(*n.b, p + 1, vars, out);
      return;
    }
    case Op::Neg:
      out += '-';
      print_child(*n.a, 4, vars, out);
      return;
    case Op::Pow:
      print_child(*n.a, 5, vars, out);
      out += '^';
      if (n.den == 1 && n.num >= 0) {
        out += std::to_string(n.num);
      } else if (n.den == 1) {
        out += "(" + std::to_string(n.num) + ")";
      } else {
        out += "(" + std::to_string(n.num) + "/" + std::to_string(n.den) + ")";
      }
      return;
    default:
      out += fn_name(n.op);
      out += '(';
      print_node(*n.a, vars, out);
      out += ')';
  }
}

std::string print_expression(const ScalarExpr& e) {
  std::string out;
  print_node(*e.root(), e.vars(), out);
  return out;
}

static bool equal_nodes(const Node& x, const Node& y) {
  if (x.op != y.op) return false;
  switch (x.op) {
    case Op::Const: return x.value == y.value;
    case Op::Var: return x.var == y.var;
    case Op::Pow: return x.num == y.num && x.den == y.den && equal_nodes(*x.a, *y.a);
    default:
      if (!equal_nodes(*x.a, *y.a)) return false;
      if (x.b || y.b) return x.b && y.b && equal_nodes(*x.b, *y.b);
      return true;
  }
}

bool structurally_equal(const ScalarExpr& x, const ScalarExpr& y) {
  return x.vars() == y.vars() && equal_nodes(*x.root(), *y.root());
}

// ---------------------------------------------------------------------------
// Parsing
//
//   sum     := product (('+'|'-') product)*
//   product := unary (('*'|'/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' unary)?
//   primary := number | identifier | identifier '(' sum ')' | '(' sum ')'

namespace {

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }

struct Parser {
  const std::string& s;
  const std::vector<std::string>& vars;
  std::size_t pos = 0;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool accept(char c) {
    skip();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  NodePtr sum() {
    NodePtr lhs = product();
    for (;;) {
      if (accept('+')) {
        lhs = make_binary(Op::Add, lhs, product());
      } else if (accept('-')) {
        lhs = make_binary(Op::Sub, lhs, product());
      } else {
        return lhs;
      }
    }
  }

  NodePtr product() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_binary(Op::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make_binary(Op::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_neg(unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    skip();
    std::size_t at = pos;
    if (!accept('^')) return base;
    NodePtr ex = unary();
    if (ex->op != Op::Const) throw ParseError("exponent must be a rational constant", at);
    auto [num, den] = to_rational(ex->value, at);
    return make_pow(base, num, den);
  }

  static std::pair<long, long> to_rational(double v, std::size_t at) {
    if (!std::isfinite(v)) throw ParseError("exponent is not finite", at);
    // Continued fraction search for an exact small-denominator rational.
    double x = v;
    long h0 = 1, h1 = 0, k0 = 0, k1 = 1;
    for (int it = 0; it < 40; ++it) {
      double a = std::floor(x);
      long ai = static_cast<long>(a);
      long h2 = ai * h0 + h1, k2 = ai * k0 + k1;
      h1 = h0;
      h0 = h2;
      k1 = k0;
      k0 = k2;
      if (k0 > 1000000) break;
      if (std::abs(static_cast<double>(h0) / static_cast<double>(k0) - v) <= 1e-15 * std::max(1.0, std::abs(v)))
        return {h0, k0};
      double frac = x - a;
      if (frac == 0.0) break;
      x = 1.0 / frac;
    }
    throw ParseError("exponent is not a rational number with small denominator", at);
  }

  NodePtr primary() {
    skip();
    if (pos >= s.size()) throw ParseError("unexpected end of input", pos);
    char c = s[pos];
    if (c == '(') {
      ++pos;
      NodePtr inner = sum();
      if (!accept(')')) throw ParseError("expected ')'", pos);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s.c_str() + pos;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) throw ParseError("malformed number", pos);
      pos += static_cast<std::size_t>(end - begin);
      return make_const(v);
    }
    if (ident_start(static_cast<unsigned char>(c))) {
      std::size_t start = pos;
      while (pos < s.size() && ident_char(static_cast<unsigned char>(s[pos]))) ++pos;
      std::string name = s.substr(start, pos - start);
      auto it = std::find(vars.begin(), vars.end(), name);
      skip();
      bool call = pos < s.size() && s[pos] == '(';
      if (it != vars.end() && !call) return make_var(static_cast<int>(it - vars.begin()));
      static const std::vector<std::pair<std::string, Op>> fns = {
          {"sin", Op::Sin}, {"cos", Op::Cos}, {"tan", Op::Tan},
          {"exp", Op::Exp}, {"log", Op::Log}, {"sqrt", Op::Sqrt}};
      for (const auto& [fname, op] : fns) {
        if (name != fname) continue;
        if (!call) throw ParseError("function '" + name + "' requires an argument list", pos);
        ++pos;
        skip();
        if (pos < s.size() && s[pos] == ')') throw ParseError("arity mismatch: '" + name + "' takes 1 argument, got 0", pos);
        NodePtr arg = sum();
        skip();
        if (pos < s.size() && s[pos] == ',')
          throw ParseError("arity mismatch: '" + name + "' takes 1 argument", pos);
        if (!accept(')')) throw ParseError("expected ')'", pos);
        return make_fn(op, arg);
      }
      if (name == "pi" && !call) return make_const(M_PI);
      if (call) throw ParseError("unknown function '" + name + "'", start);
      throw ParseError("unknown identifier '" + name + "'", start);
    }
    throw ParseError(std::string("unexpected character '") + c + "'", pos);
  }
};

}  // namespace

ScalarExpr parse_expression(const std::string& text, const VarList& vars) {
  Parser p{text, *vars};
  NodePtr root = p.sum();
  p.skip();
  if (p.pos != text.size()) throw ParseError("unexpected trailing input", p.pos);
  return {root, vars};
}

ScalarExpr parse_expression(const std::string& text, const std::vector<std::string>& allowed_vars) {
  return parse_expression(text, make_var_list(allowed_vars));
}

}  // namespace gnat
