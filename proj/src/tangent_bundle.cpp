#include "gnat/tangent_bundle.hpp"

#include <algorithm>
#include <cmath>

namespace gnat {

std::vector<std::string> fiber_names(const Chart& chart) {
  std::vector<std::string> names;
  for (int i = 0; i < chart.dim(); ++i) {
    names.push_back("u" + std::to_string(i + 1));
    if (chart.coords()->end() != std::find(chart.coords()->begin(), chart.coords()->end(), names.back()))
      throw GeometryError("chart coordinate name '" + names.back() + "' collides with a fiber coordinate");
  }
  return names;
}

VarList bundle_vars(const Chart& chart) {
  std::vector<std::string> names = *chart.coords();
  for (auto& f : fiber_names(chart)) names.push_back(f);
  return make_var_list(std::move(names));
}

FrameChange frame_change_at(const Chart& chart, std::span<const double> x, std::span<const double> u) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  const int n = chart.dim();
  TensorValue G = christoffel_at(chart, x);
  FrameChange f;
  f.N = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int r = 0; r < n; ++r) f.N(j, k) += u[static_cast<std::size_t>(r)] * G(j, r, k);
  f.to_coordinates = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  f.to_coordinates.bottomLeftCorner(n, n) = -f.N;
  f.to_adapted = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  f.to_adapted.bottomLeftCorner(n, n) = f.N;
  return f;
}

Eigen::VectorXd lift_vector_at(const Chart& chart, std::span<const double> x, std::span<const double> u,
                               std::span<const double> X, LiftKind kind) {
  const int n = chart.dim();
  if (static_cast<int>(X.size()) != n || static_cast<int>(u.size()) != n)
    throw GeometryError("lift_vector_at: dimension mismatch");
  Eigen::VectorXd adapted = Eigen::VectorXd::Zero(2 * n);
  for (int i = 0; i < n; ++i) adapted(kind == LiftKind::horizontal ? i : n + i) = X[static_cast<std::size_t>(i)];
  return frame_change_at(chart, x, u).to_coordinates * adapted;
}

// ---------------------------------------------------------------------------

BundleJets::BundleJets(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                       std::span<const double> u, int order)
    : n_(chart.dim()),
      space_(JetSpace::get(2 * chart.dim(), order + 1)),
      base_(chart, x, order + 1, space_, 0) {
  const int n = n_;
  if (static_cast<int>(u.size()) != n) throw GeometryError("fiber vector has the wrong dimension");
  coords_.assign(base_.bindings().begin(), base_.bindings().end());
  for (int i = 0; i < n; ++i) coords_.push_back(Jet::variable(space_, n + i, u[static_cast<std::size_t>(i)], order + 1));
  const auto& g = base_.g();
  u_low_.assign(static_cast<std::size_t>(n), Jet(0.0));
  t_ = Jet(0.0);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) u_low_[a] += g(a, b) * this->u(b);
    t_ += u_low_[a] * this->u(a);
  }
  for (int w = 0; w < 6; ++w) w_.push_back(profile.compose_weight(static_cast<Weight>(w), t_));
  Jet A = weight(Weight::a1) + weight(Weight::a3);
  Jet B = weight(Weight::b1) + weight(Weight::b3);

  N_.assign(static_cast<std::size_t>(n * n), Jet(0.0));
  const auto& Gam = base_.gamma();
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int r = 0; r < n; ++r) N_[j * n + k] += this->u(r) * Gam(j, r, k);

  hh_.resize(static_cast<std::size_t>(n * n));
  hv_.resize(hh_.size());
  vv_.resize(hh_.size());
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      Jet uu = u_low_[k] * u_low_[l];
      hh_[k * n + l] = A * g(k, l) + B * uu;
      hv_[k * n + l] = weight(Weight::a2) * g(k, l) + weight(Weight::b2) * uu;
      vv_[k * n + l] = weight(Weight::a1) * g(k, l) + weight(Weight::b1) * uu;
    }

  // coordinate basis: d_k = d_k^h + N^j_k d_j^v, delta_l = d_l^v
  const int m = 2 * n;
  G_.assign(static_cast<std::size_t>(m * m), Jet(0.0));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      Jet xx = hh(k, l), xu = hv(k, l), uu = vv(k, l);
      for (int j = 0; j < n; ++j) {
        xx += N(j, l) * hv(k, j) + N(j, k) * hv(l, j);
        xu += N(j, k) * vv(j, l);
        for (int i = 0; i < n; ++i) xx += N(i, k) * N(j, l) * vv(i, j);
      }
      G_[k * m + l] = xx;
      G_[k * m + n + l] = xu;
      G_[(n + l) * m + k] = xu;
      G_[(n + k) * m + n + l] = uu;
    }
}

Eigen::MatrixXd BundleJets::adapted_values() const {
  const int n = n_;
  Eigen::MatrixXd M(2 * n, 2 * n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      M(k, l) = hh(k, l).value();
      M(k, n + l) = hv(k, l).value();
      M(n + k, l) = hv(l, k).value();
      M(n + k, n + l) = vv(k, l).value();
    }
  return M;
}

Eigen::MatrixXd BundleJets::coordinate_values() const {
  const int m = 2 * n_;
  Eigen::MatrixXd M(m, m);
  for (int A = 0; A < m; ++A)
    for (int B = 0; B < m; ++B) M(A, B) = G(A, B).value();
  return M;
}

// ---------------------------------------------------------------------------

void require_nondegenerate(const WeightProfile& profile, std::span<const double> u, const Chart& chart,
                           std::span<const double> x) {
  auto m = metric_at(chart, x);
  double t = 0;
  for (int i = 0; i < chart.dim(); ++i)
    for (int j = 0; j < chart.dim(); ++j) t += m.g(i, j) * u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(j)];
  auto s = derived_scalars(profile, t);
  if (std::abs(s.a) < 1e-9 || std::abs(s.F) < 1e-9)
    throw DegenerateMetric("g-natural metric degenerate at t = " + std::to_string(t) + " (a = " + std::to_string(s.a) +
                               ", F = " + std::to_string(s.F) + ")",
                           t);
}

TensorValue generic_connection_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                                  std::span<const double> u) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  require_nondegenerate(profile, u, chart, x);
  BundleJets bj(profile, chart, x, u, 1);
  const int m = 2 * chart.dim();
  Eigen::MatrixXd Ginv = bj.coordinate_values().inverse();
  // dG(A, B, C) = d_C G_{AB}
  std::vector<double> dG(static_cast<std::size_t>(m * m * m));
  for (int A = 0; A < m; ++A)
    for (int B = 0; B < m; ++B)
      for (int C = 0; C < m; ++C) dG[(A * m + B) * m + C] = bj.G(A, B).partial(C);
  auto at = [&](int A, int B, int C) { return dG[static_cast<std::size_t>((A * m + B) * m + C)]; };
  TensorValue out(m, "ull", 0.0);
  for (int A = 0; A < m; ++A)
    for (int B = A; B < m; ++B) {
      for (int C = 0; C < m; ++C) {
        double v = 0;
        for (int D = 0; D < m; ++D) v += 0.5 * Ginv(C, D) * (at(D, B, A) + at(D, A, B) - at(A, B, D));
        out(C, A, B) = v;
        out(C, B, A) = v;
      }
    }
  return out;
}

ConnectionSlot parse_slot(const std::string& name) {
  if (name == "hh") return ConnectionSlot::hh;
  if (name == "hv") return ConnectionSlot::hv;
  if (name == "vh") return ConnectionSlot::vh;
  if (name == "vv") return ConnectionSlot::vv;
  throw std::invalid_argument("unknown connection slot '" + name + "'");
}

namespace {

using Vec = Eigen::VectorXd;

struct PointGeometry {
  int n;
  Eigen::MatrixXd g;
  TensorValue Gam, R;
  Vec u, ul;

  PointGeometry(const Chart& chart, std::span<const double> x, std::span<const double> uu) : n(chart.dim()) {
    LocalGeometry geo(chart, x, 2);
    g = Eigen::MatrixXd(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = geo.g()(i, j).value();
    Gam = values(geo.gamma());
    R = values(geo.riemann());
    u = Eigen::Map<const Vec>(uu.data(), n);
    ul = g * u;
  }
  double dot(const Vec& X, const Vec& Y) const { return X.dot(g * Y); }
  // R(X,Y)Z
  Vec Rv(const Vec& X, const Vec& Y, const Vec& Z) const {
    Vec out = Vec::Zero(n);
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) out(r) += X(i) * Y(j) * Z(k) * R(r, k, j, i);
    return out;
  }
  double R4(const Vec& X, const Vec& Y, const Vec& Z, const Vec& V) const { return dot(Rv(X, Y, Z), V); }
};

struct HV {
  Vec h, v;
};

Vec field_value(const LocalGeometry& geo, const VectorFieldDef& X) { return Eigen::Map<const Vec>(values(geo.evaluate(X.components, "u")).data().data(), geo.dim()); }

}  // namespace

Eigen::VectorXd closed_form_connection_at(const WeightProfile& profile, const Chart& chart,
                                          std::span<const double> x, std::span<const double> u,
                                          const VectorFieldDef& X, const VectorFieldDef& Y, ConnectionSlot slot) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  require_nondegenerate(profile, u, chart, x);
  const int n = chart.dim();
  PointGeometry pg(chart, x, u);
  LocalGeometry geo(chart, x, 1);
  Vec Xv = field_value(geo, X), Yv = field_value(geo, Y);
  // (nabla_X Y)^r = X^j nabla_j Y^r
  TensorValue nY = values(geo.nabla(geo.evaluate(Y.components, "u")));
  Vec nXY = Vec::Zero(n);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < n; ++j) nXY(r) += Xv(j) * nY(r, j);

  const auto s = derived_scalars(profile, pg.dot(pg.u, pg.u));
  const double a1 = s.a1, a2 = s.a2, b1 = s.b1, b2 = s.b2, A = s.A, B = s.B, Ap = s.Ap, Bp = s.Bp;
  const double a = s.a, F = s.F, F1 = s.F1, F2 = s.F2, F3 = s.F3, P = s.P, Q = s.Q;
  const double a1p = s.a1p, b1p = s.b1p, b2p = s.b2p;
  const Vec& uu = pg.u;

  auto tA = [&](const Vec& X, const Vec& Y) -> Vec {
    double gXu = pg.dot(X, uu), gYu = pg.dot(Y, uu), gXY = pg.dot(X, Y), Ru = pg.R4(X, uu, Y, uu);
    Vec r = -(a1 * a2 / (2 * a)) * (pg.Rv(X, uu, Y) + pg.Rv(Y, uu, X)) + (a2 * B / (2 * a)) * (gYu * X + gXu * Y);
    double c = a2 * (a1 * (F1 * B - F2 * b2) + a2 * (b1 * a2 - b2 * a1)) * Ru +
               (a * F2 * Bp + B * (a2 * (F2 * b2 - F1 * B) + A * (a1 * b2 - a2 * b1))) * gXu * gYu + a * F2 * Ap * gXY;
    return r + (c / (a * F)) * uu;
  };
  auto tB = [&](const Vec& X, const Vec& Y) -> Vec {
    double gXu = pg.dot(X, uu), gYu = pg.dot(Y, uu), gXY = pg.dot(X, Y), Ru = pg.R4(X, uu, Y, uu);
    Vec r = (a2 * a2 / a) * pg.Rv(X, uu, Y) - (a1 * A / (2 * a)) * pg.Rv(X, Y, uu) - (A * B / (2 * a)) * (gYu * X + gXu * Y);
    double c = a2 * (a2 * (F2 * b2 - F1 * B) + A * (b2 * a1 - b1 * a2)) * Ru +
               (-a * (F1 + F3) * Bp + B * (A * ((F1 + F3) * b1 - F2 * b2) + a2 * (a2 * B - b2 * A))) * gXu * gYu -
               a * (F1 + F3) * Ap * gXY;
    return r + (c / (a * F)) * uu;
  };
  auto tC = [&](const Vec& X, const Vec& Y) -> Vec {
    double gXu = pg.dot(X, uu), gYu = pg.dot(Y, uu), gXY = pg.dot(X, Y), Ru = pg.R4(X, uu, Y, uu);
    Vec r = -(a1 * a1 / (2 * a)) * pg.Rv(Y, uu, X) + (a1 * B / (2 * a)) * gXu * Y + ((a1 * Ap - a2 * P) / a) * gYu * X;
    double c = (a1 / 2) * (a2 * (a2 * b1 - a1 * b2) + a1 * (F1 * B - F2 * b2)) * Ru + a * (F1 * B / 2 + F2 * P) * gXY +
               (a * F1 * Bp + (Ap + B / 2) * (a2 * (a1 * b2 - a2 * b1) + a1 * (F2 * b2 - B * F1)) +
                P * (a2 * (b1 * (F1 + F3) - b2 * F2) - a1 * (b2 * A - a2 * B))) *
                   gXu * gYu;
    return r + (c / (a * F)) * uu;
  };
  auto tD = [&](const Vec& X, const Vec& Y) -> Vec {
    double gXu = pg.dot(X, uu), gYu = pg.dot(Y, uu), gXY = pg.dot(X, Y), Ru = pg.R4(X, uu, Y, uu);
    Vec r = ((a1 * a2 / 2) * pg.Rv(Y, uu, X) - (a2 * B / 2) * gXu * Y + (A * P - a2 * Ap) * gYu * X) / a;
    double c = (a1 / 2) * (A * (a1 * b2 - a2 * b1) + a2 * (F2 * b2 - F1 * B)) * Ru - a * (F2 / 2 * B + (F1 + F3) * P) * gXY +
               (-a * F2 * Bp + (Ap + B / 2) * (A * (a2 * b1 - a1 * b2) + a2 * (F1 * B - F2 * b2)) +
                P * (A * (b2 * F2 - b1 * (F1 + F3)) + a2 * (b2 * A - a2 * B))) *
                   gXu * gYu;
    return r + (c / (a * F)) * uu;
  };
  auto tE = [&](const Vec& X, const Vec& Y) -> Vec {
    double gXu = pg.dot(X, uu), gYu = pg.dot(Y, uu), gXY = pg.dot(X, Y);
    Vec r = ((a1 * Q - a2 * a1p) / a) * (gXu * Y + gYu * X);
    double c = a * (F1 * b2 - F2 * (b1 - a1p)) * gXY +
               (a * (2 * F1 * b2p - F2 * b1p) + 2 * a1p * (a1 * (a2 * B - b2 * A) + a2 * (b1 * (F1 + F3) - b2 * F2)) +
                2 * Q * (a1 * (F2 * b2 - F1 * B) + a2 * (a1 * b2 - a2 * b1))) *
                   gXu * gYu;
    return r + (c / (a * F)) * uu;
  };
  auto tF = [&](const Vec& X, const Vec& Y) -> Vec {
    double gXu = pg.dot(X, uu), gYu = pg.dot(Y, uu), gXY = pg.dot(X, Y);
    Vec r = ((A * a1p - a2 * Q) / a) * (gXu * Y + gYu * X);
    double c = a * ((F1 + F3) * (b1 - a1p) - F2 * b2) * gXY +
               (a * ((F1 + F3) * b1p - 2 * F2 * b2p) + 2 * a1p * (a2 * (b2 * A - a2 * B) + A * (b2 * F2 - b1 * (F1 + F3))) +
                2 * Q * (a2 * (F1 * B - F2 * b2) + A * (a2 * b1 - a1 * b2))) *
                   gXu * gYu;
    return r + (c / (a * F)) * uu;
  };

  HV out{Vec::Zero(n), Vec::Zero(n)};
  switch (slot) {
    case ConnectionSlot::hh: out = {nXY + tA(Xv, Yv), tB(Xv, Yv)}; break;
    case ConnectionSlot::hv: out = {tC(Xv, Yv), nXY + tD(Xv, Yv)}; break;
    case ConnectionSlot::vh: out = {tC(Yv, Xv), tD(Yv, Xv)}; break;
    case ConnectionSlot::vv: out = {tE(Xv, Yv), tF(Xv, Yv)}; break;
  }
  Vec adapted(2 * n);
  adapted << out.h, out.v;
  return frame_change_at(chart, x, u).to_coordinates * adapted;
}

// Lifted field components (x- and u-parts) as jets over the bundle variables.
static std::vector<Jet> lifted_jets(const LocalGeometry& base, std::span<const Jet> coords, const VectorFieldDef& X,
                                    bool horizontal) {
  const int n = base.dim();
  Tensor<Jet> Xj = base.evaluate(X.components, "u");
  std::vector<Jet> out(static_cast<std::size_t>(2 * n), Jet(0.0));
  for (int j = 0; j < n; ++j) {
    if (!horizontal) {
      out[n + j] = Xj(j);
      continue;
    }
    out[j] = Xj(j);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) out[n + j] -= coords[static_cast<std::size_t>(n + r)] * Xj(s) * base.gamma()(j, r, s);
  }
  return out;
}

Eigen::VectorXd generic_covariant_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                                     std::span<const double> u, const VectorFieldDef& X, const VectorFieldDef& Y,
                                     ConnectionSlot slot) {
  TensorValue Gt = generic_connection_at(profile, chart, x, u);
  const int n = chart.dim(), m = 2 * n;
  const JetSpace* sp = JetSpace::get(m, 2);
  LocalGeometry base(chart, x, 2, sp, 0);
  std::vector<Jet> coords(base.bindings().begin(), base.bindings().end());
  for (int i = 0; i < n; ++i) coords.push_back(Jet::variable(sp, n + i, u[static_cast<std::size_t>(i)], 2));
  bool xh = slot == ConnectionSlot::hh || slot == ConnectionSlot::hv;
  bool yh = slot == ConnectionSlot::hh || slot == ConnectionSlot::vh;
  auto V = lifted_jets(base, coords, X, xh);
  auto W = lifted_jets(base, coords, Y, yh);
  Vec out = Vec::Zero(m);
  for (int C = 0; C < m; ++C) {
    double v = 0;
    for (int A = 0; A < m; ++A) {
      v += V[A].value() * W[C].partial(A);
      for (int B = 0; B < m; ++B) v += Gt(C, A, B) * V[A].value() * W[B].value();
    }
    out(C) = v;
  }
  return out;
}

double bracket_residual(const Chart& chart, std::span<const double> x, std::span<const double> u,
                        const VectorFieldDef& X, const VectorFieldDef& Y) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  const int n = chart.dim(), m = 2 * n;
  const JetSpace* sp = JetSpace::get(m, 2);
  LocalGeometry base(chart, x, 2, sp, 0);
  std::vector<Jet> coords(base.bindings().begin(), base.bindings().end());
  for (int i = 0; i < n; ++i) coords.push_back(Jet::variable(sp, n + i, u[static_cast<std::size_t>(i)], 2));
  auto Xh = lifted_jets(base, coords, X, true), Yh = lifted_jets(base, coords, Y, true);
  auto Xv = lifted_jets(base, coords, X, false), Yv = lifted_jets(base, coords, Y, false);
  auto bracket = [&](const std::vector<Jet>& V, const std::vector<Jet>& W) {
    Vec out = Vec::Zero(m);
    for (int C = 0; C < m; ++C)
      for (int A = 0; A < m; ++A) out(C) += V[A].value() * W[C].partial(A) - W[A].value() * V[C].partial(A);
    return out;
  };

  PointGeometry pg(chart, x, u);
  Tensor<Jet> Xj = base.evaluate(X.components, "u"), Yj = base.evaluate(Y.components, "u");
  Vec Xval(n), Yval(n), XY(n), nXY = Vec::Zero(n);
  TensorValue nY = values(base.nabla(Yj));
  for (int j = 0; j < n; ++j) {
    Xval(j) = Xj(j).value();
    Yval(j) = Yj(j).value();
  }
  for (int j = 0; j < n; ++j) {
    XY(j) = 0;
    for (int i = 0; i < n; ++i) {
      XY(j) += Xval(i) * Yj(j).partial(i) - Yval(i) * Xj(j).partial(i);
      nXY(j) += Xval(i) * nY(j, i);
    }
  }
  // [X,Y]^h - v{R(X,Y)u}
  Vec rhs1 = Vec::Zero(m);
  Vec RXYu = pg.Rv(Xval, Yval, pg.u);
  for (int j = 0; j < n; ++j) {
    rhs1(j) = XY(j);
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) rhs1(n + j) -= pg.u(r) * XY(s) * pg.Gam(j, r, s);
    rhs1(n + j) -= RXYu(j);
  }
  Vec rhs2 = Vec::Zero(m);
  rhs2.tail(n) = nXY;
  double r1 = (bracket(Xh, Yh) - rhs1).cwiseAbs().maxCoeff();
  double r2 = (bracket(Xh, Yv) - rhs2).cwiseAbs().maxCoeff();
  double r3 = bracket(Xv, Yv).cwiseAbs().maxCoeff();
  return std::max({r1, r2, r3});
}

}  // namespace gnat
