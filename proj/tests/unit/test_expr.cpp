#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gnat/expr.hpp"
#include "gnat/jet.hpp"

using namespace gnat;

namespace {

// Random smooth expression text in x, y; every subterm stays in its domain.
std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 2 : 11);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  auto sub = [&] { return random_expr(rng, depth - 1); };
  char buf[64];
  switch (pick(rng)) {
    case 0: return "x";
    case 1: return "y";
    case 2: std::snprintf(buf, sizeof buf, "%.3f", c(rng)); return std::string("(") + buf + ")";
    case 3: return "(" + sub() + "+" + sub() + ")";
    case 4: return "(" + sub() + "-" + sub() + ")";
    case 5: return "(" + sub() + "*" + sub() + ")";
    case 6: return "(" + sub() + ")/(2+cos(" + sub() + "))";
    case 7: return "sin(" + sub() + ")";
    case 8: return "exp(sin(" + sub() + "))";
    case 9: return "log(1+(" + sub() + ")^2)";
    case 10: return "sqrt(1+(" + sub() + ")^2)";
    default: return "(2+sin(" + sub() + "))^(3/2)";
  }
}

double central_richardson(const ScalarExpr& e, std::vector<double> p, int var) {
  auto fd = [&](double h) {
    auto a = p, b = p;
    a[var] += h;
    b[var] -= h;
    return (e.evaluate(std::span<const double>(a)) - e.evaluate(std::span<const double>(b))) / (2 * h);
  };
  const double h = 1e-3;
  return (4.0 * fd(h / 2) - fd(h)) / 3.0;
}

}  // namespace

TEST_CASE("parse and evaluate") {
  auto e = parse_expression("a1*(a1+a3)-a2^2", {"a1", "a2", "a3"});
  CHECK(e.free_vars().size() == 3);
  CHECK(e.evaluate({{"a1", 1.0}, {"a2", 0.0}, {"a3", 0.0}}) == 1.0);

  auto cg = parse_expression("1/(1+t)", {"t"});
  CHECK(cg.evaluate({{"t", 0.0}}) == 1.0);
  CHECK(cg.evaluate({{"t", 1.0}}) == 0.5);

  auto s = parse_expression("sin(θ)^2", {"θ", "φ"});
  CHECK(s.free_vars() == std::set<std::string>{"θ"});
}

TEST_CASE("precedence") {
  auto e = parse_expression("2+3*4^2/8-2^3^0", std::vector<std::string>{});
  CHECK(e.evaluate(std::map<std::string, double>{}) == doctest::Approx(2 + 3 * 16 / 8.0 - 2));
  CHECK(parse_expression("-2^2", std::vector<std::string>{}).evaluate(std::map<std::string, double>{}) == -4.0);
  CHECK(parse_expression("2*pi", std::vector<std::string>{}).evaluate(std::map<std::string, double>{}) == doctest::Approx(2 * M_PI));
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse_expression("1+", {"x"}), ParseError);
  CHECK_THROWS_AS(parse_expression("z+1", {"x"}), ParseError);
  CHECK_THROWS_AS(parse_expression("sin(x,x)", {"x"}), ParseError);
  CHECK_THROWS_AS(parse_expression("foo(x)", {"x"}), ParseError);
  CHECK_THROWS_AS(parse_expression("x^y", {"x", "y"}), ParseError);
  try {
    parse_expression("x + ?", {"x"});
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.position == 4);
  }
}

TEST_CASE("evaluation errors") {
  auto e = parse_expression("1/(1+t)", {"t"});
  CHECK_THROWS_AS(e.evaluate({{"t", -1.0}}), DomainError);
  CHECK_THROWS_AS(e.evaluate(std::map<std::string, double>{}), UnboundVariable);
  CHECK_THROWS_AS(parse_expression("log(t)", {"t"}).evaluate({{"t", 0.0}}), DomainError);
  CHECK_THROWS_AS(parse_expression("sqrt(t)", {"t"}).evaluate({{"t", -1.0}}), DomainError);
}

TEST_CASE("differentiate examples") {
  auto t2 = differentiate(parse_expression("t^2", {"t"}), "t");
  CHECK(t2.evaluate({{"t", 3.0}}) == 6.0);
  auto cg = differentiate(parse_expression("1/(1+t)", {"t"}), "t");
  CHECK(cg.evaluate({{"t", 0.0}}) == -1.0);

  auto s = parse_expression("sin(θ)^2", {"θ", "φ"});
  auto ds = differentiate(s, "θ");
  double th = M_PI / 4;
  CHECK(ds.evaluate({{"θ", th}, {"φ", 0.0}}) == doctest::Approx(1.0).epsilon(1e-14));
  double fd = central_richardson(s, {th, 0.0}, 0);
  CHECK(std::abs(ds.evaluate({{"θ", th}, {"φ", 0.0}}) - fd) < 1e-8);
  CHECK(differentiate(s, "φ").is_zero());
}

TEST_CASE("symbolic derivative matches finite differences on random expressions") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> pt(-1.0, 1.0);
  auto vars = make_var_list({"x", "y"});
  int checked = 0;
  for (int k = 0; k < 100; ++k) {
    auto e = parse_expression(random_expr(rng, 4), vars);
    std::vector<double> p = {pt(rng), pt(rng)};
    for (int v = 0; v < 2; ++v) {
      double sym = differentiate(e, v).evaluate(std::span<const double>(p));
      double fd = central_richardson(e, p, v);
      CHECK_MESSAGE(std::abs(sym - fd) <= 1e-6 * std::max(1.0, std::abs(fd)), print_expression(e));
      ++checked;
    }
  }
  CHECK(checked == 200);
}

TEST_CASE("print and reparse round trip") {
  std::mt19937_64 rng(777);
  auto vars = make_var_list({"x", "y"});
  for (int k = 0; k < 100; ++k) {
    auto e = parse_expression(random_expr(rng, 4), vars);
    auto once = parse_expression(print_expression(e), vars);
    auto twice = parse_expression(print_expression(once), vars);
    CHECK(structurally_equal(once, twice));
    CHECK(print_expression(once) == print_expression(twice));
    std::vector<double> p = {0.3, -0.7};
    CHECK(once.evaluate(std::span<const double>(p)) == doctest::Approx(e.evaluate(std::span<const double>(p))));
  }
  CHECK(print_expression(parse_expression("x-(y-x)", vars)) == "x-(y-x)");
  CHECK(print_expression(parse_expression("(-x)^2", vars)) == "(-x)^2");
}

TEST_CASE("jet evaluation agrees with symbolic derivatives") {
  auto vars = make_var_list({"x", "y"});
  auto e = parse_expression("exp(x*y)*sin(x)/(2+cos(y)) + sqrt(1+x^2)*log(2+y)", vars);
  const JetSpace* sp = JetSpace::get(2, 3);
  std::vector<double> p = {0.4, -0.3};
  std::vector<Jet> b = {Jet::variable(sp, 0, p[0], 3), Jet::variable(sp, 1, p[1], 3)};
  Jet j = eval_jet(e, b);
  auto ex = differentiate(e, 0), ey = differentiate(e, 1);
  CHECK(j.value() == doctest::Approx(e.evaluate(std::span<const double>(p))).epsilon(1e-14));
  CHECK(j.partial(0) == doctest::Approx(ex.evaluate(std::span<const double>(p))).epsilon(1e-13));
  CHECK(j.partial(1) == doctest::Approx(ey.evaluate(std::span<const double>(p))).epsilon(1e-13));
  CHECK(j.partial(0, 1) == doctest::Approx(differentiate(ex, 1).evaluate(std::span<const double>(p))).epsilon(1e-12));
  CHECK(j.partial(1, 1) == doctest::Approx(differentiate(ey, 1).evaluate(std::span<const double>(p))).epsilon(1e-12));
  auto exxy = differentiate(differentiate(ex, 0), 1);
  CHECK(j.derivative(0).derivative(0).derivative(1).value() ==
        doctest::Approx(exxy.evaluate(std::span<const double>(p))).epsilon(1e-11));
}
