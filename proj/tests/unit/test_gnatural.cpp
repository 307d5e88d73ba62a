#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "gnat/gnatural.hpp"
#include "gnat/tangent_bundle.hpp"

using namespace gnat;

TEST_CASE("presets and derived scalars") {
  auto sas = preset_profile("sasaki");
  for (double t : {0.0, 0.7, 5.0}) {
    auto s = derived_scalars(sas, t);
    CHECK(s.a == 1.0);
    CHECK(s.F == 1.0);
    CHECK(s.A == 1.0);
    CHECK(s.B == 0.0);
    CHECK(s.P == 0.0);
    CHECK(s.Q == 0.0);
  }
  auto cg = preset_profile("cheeger_gromoll");
  auto s = derived_scalars(cg, 1.0);
  CHECK(s.a1 == 0.5);
  CHECK(s.b1 == 0.5);
  CHECK(s.A == 1.0);
  CHECK(s.B == 1.0);
  CHECK(s.a == 0.5);
  CHECK(s.F1 == 1.0);
  CHECK(s.F3 == 1.0);
  CHECK(s.F == 2.0);
  auto s0 = derived_scalars(cg, 0.0);
  CHECK(s0.a1 == 1.0);
  CHECK(s0.b1 == 1.0);
  CHECK(s0.A == 1.0);
  CHECK(s0.B == 1.0);
  CHECK(s0.a1p == -1.0);
  CHECK(s0.b1p == -1.0);
  CHECK(s0.b3p == 1.0);

  WeightProfile zero({"0", "0", "0", "0", "0", "0"});
  auto z = derived_scalars(zero, 0.0);
  CHECK(z.a == 0.0);
  CHECK(z.F == 0.0);
  CHECK_THROWS_AS(preset_profile("nonexistent"), std::invalid_argument);
  CHECK_THROWS_AS(derived_scalars(sas, -1.0), DomainError);
}

TEST_CASE("derived scalar identities on random tuples") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-3, 3);
  for (int k = 0; k < 200; ++k) {
    std::array<double, 6> w, w1;
    for (auto& v : w) v = d(rng);
    for (auto& v : w1) v = d(rng);
    double t = std::abs(d(rng));
    auto s = scalars_from_values(w, w1, {}, t);
    CHECK(s.A == w[0] + w[2]);
    CHECK(s.B == w[3] + w[5]);
    CHECK(s.a == doctest::Approx(w[0] * (w[0] + w[2]) - w[1] * w[1]));
    double F1 = w[0] + t * w[3], F2 = w[1] + t * w[4], F3 = w[2] + t * w[5];
    CHECK(s.F == doctest::Approx(F1 * (F1 + F3) - F2 * F2));
    CHECK(std::abs(s.P + s.Q - 2 * s.a2p) <= 1e-14 * std::max(1.0, std::abs(s.a2p)));
    CHECK(std::abs(s.Q - s.P - s.b2) <= 1e-14 * std::max(1.0, std::abs(s.b2)));
  }
}

TEST_CASE("nondegeneracy scan") {
  CHECK(nondegeneracy_scan(preset_profile("sasaki"), 0, 10, 100).nondegenerate);
  CHECK(nondegeneracy_scan(preset_profile("cheeger_gromoll"), 0, 10, 100).nondegenerate);
  auto v = nondegeneracy_scan(WeightProfile({"0", "0", "1", "0", "0", "0"}), 0, 10, 100);
  CHECK_FALSE(v.nondegenerate);
  CHECK(v.t_star == 0.0);
  // a = 1 - t vanishes at t = 1; F = (1 - t) + ... hits zero on the grid
  auto w = nondegeneracy_scan(WeightProfile({"1", "0", "-t", "0", "0", "0"}), 0, 2, 21);
  CHECK_FALSE(w.nondegenerate);
  CHECK(w.t_star == doctest::Approx(1.0));
  CHECK_THROWS_AS(nondegeneracy_scan(preset_profile("sasaki"), 0, 1, 1), std::invalid_argument);
}

TEST_CASE("weight composition through t = g(u,u)") {
  // oracle: finite differences of a_j(g_x(u,u)) in every bundle coordinate
  auto chart = round_sphere(2);
  WeightProfile p({"exp(-t)*cos(t)", "t^2/3", "1/(2+t)", "sin(t)", "sqrt(1+t)", "log(1+t)"});
  std::vector<double> x = {0.9, 0.4}, u = {0.3, -0.8};
  BundleJets bj(p, chart, x, u, 1);
  auto direct = [&](int w, std::vector<double> xu) {
    std::vector<double> xs(xu.begin(), xu.begin() + 2);
    auto m = metric_at(chart, xs);
    double t = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) t += m.g(i, j) * xu[2 + i] * xu[2 + j];
    return p.value(static_cast<Weight>(w), t);
  };
  std::vector<double> xu = {x[0], x[1], u[0], u[1]};
  for (int w = 0; w < 6; ++w) {
    CHECK(bj.weight(static_cast<Weight>(w)).value() == doctest::Approx(direct(w, xu)).epsilon(1e-14));
    for (int A = 0; A < 4; ++A) {
      const double h = 1e-5;
      auto a = xu, b = xu;
      a[A] += h;
      b[A] -= h;
      double fd = (direct(w, a) - direct(w, b)) / (2 * h);
      CHECK(std::abs(bj.weight(static_cast<Weight>(w)).partial(A) - fd) < 1e-8);
    }
  }
  // exact at a constant t
  CHECK(p.compose_weight(Weight::b2, Jet(3.0)).value() == doctest::Approx(2.0));
}

TEST_CASE("assembled metric") {
  auto flat = flat_chart(2);
  std::vector<double> x = {0.2, -0.5}, u = {1.3, 0.4};
  auto G = assemble_G_at(preset_profile("sasaki"), flat, x, u);
  CHECK((G.coordinate - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0.0);

  auto s2 = round_sphere(2);
  std::vector<double> y = {0.8, 2.0}, zero = {0.0, 0.0};
  auto G0 = assemble_G_at(preset_profile("sasaki"), s2, y, zero);
  auto m = metric_at(s2, y);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(G0.adapted(i, j) == doctest::Approx(m.g(i, j)));
      CHECK(G0.adapted(2 + i, 2 + j) == doctest::Approx(m.g(i, j)));
      CHECK(G0.adapted(i, 2 + j) == 0.0);
    }

  std::vector<double> e1 = {1.0, 0.0};
  auto Gc = assemble_G_at(preset_profile("cheeger_gromoll"), flat, x, e1);
  CHECK(Gc.adapted(2, 2) == doctest::Approx(1.0));
  CHECK(Gc.adapted(3, 3) == doctest::Approx(0.5));
  CHECK(Gc.adapted(2, 3) == 0.0);
}

TEST_CASE("nondegeneracy verdict matches invertibility of the assembled metric") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-1.5, 1.5);
  auto s2 = round_sphere(2);
  std::uniform_real_distribution<double> th(0.3, M_PI - 0.3), ph(0, 2 * M_PI);
  int agree = 0, total = 0;
  for (int k = 0; k < 20; ++k) {
    std::array<std::string, 6> texts;
    for (auto& t : texts) t = std::to_string(c(rng)) + "+(" + std::to_string(c(rng)) + ")*t";
    if (k % 4 == 0) texts = {"t-1", "0", "1", "0", "0", "0"};  // a vanishes at t = 1
    WeightProfile p(texts);
    for (int j = 0; j < 20; ++j) {
      std::vector<double> x = {th(rng), ph(rng)}, u = {c(rng), c(rng)};
      if (k % 4 == 0 && j == 0) u = {1.0, 0.0};
      auto G = assemble_G_at(p, s2, x, u);
      auto m = metric_at(s2, x);
      double t = m.g(0, 0) * u[0] * u[0] + m.g(1, 1) * u[1] * u[1];
      auto s = derived_scalars(p, t);
      bool nondeg = std::abs(s.a) > kZeroFloor && std::abs(s.F) > kZeroFloor;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(G.coordinate);
      double cond = svd.singularValues()(0) / svd.singularValues()(3);
      bool invertible = cond < 1e10;
      agree += (nondeg == invertible);
      ++total;
      // det G_adapted = (a^{n-1} F) det(g)^2 (block structure of the g-natural metric)
      double det = G.adapted.determinant();
      double pred = std::pow(s.a, 1) * s.F * std::pow(m.g(0, 0) * m.g(1, 1), 2);
      CHECK(det == doctest::Approx(pred).epsilon(1e-9).scale(1.0));
    }
  }
  CHECK(agree == total);
}
