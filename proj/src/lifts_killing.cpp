#include "gnat/lifts_killing.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace gnat {

namespace {

using Mat = Eigen::MatrixXd;

const char* const kLiftNames[] = {"complete_lift", "vertical_lift", "iota_P", "iota_C", "grad_Y", "affine_sum", "custom"};
const char* const kFormNames[] = {"complete_lift",  "complete_lift_conformal", "complete_lift_conformal_df",
                                  "vertical_lift",  "iota_P",                  "iota_P_skew",
                                  "iota_C",         "grad_Y",                  "grad_Y_symmetrized",
                                  "affine_sum"};

double g_norm2(const Mat& g, std::span<const double> u) {
  double t = 0;
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j) t += g(i, j) * u[static_cast<std::size_t>(i)] * u[static_cast<std::size_t>(j)];
  return t;
}

// (L_X g)_{rk} = X^s d_s g_{rk} + g_{sk} d_r X^s + g_{rs} d_k X^s, symbolic over the chart coordinates.
std::vector<ScalarExpr> lie_metric_symbolic(const Chart& chart, const VectorFieldDef& X) {
  const int n = chart.dim();
  std::vector<ScalarExpr> L;
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < n; ++k) {
      ScalarExpr e = ScalarExpr::constant(0.0, chart.coords());
      for (int s = 0; s < n; ++s) {
        const auto& Xs = X.components[static_cast<std::size_t>(s)];
        e = e + Xs * differentiate(chart.g(r, k), s) + chart.g(s, k) * differentiate(Xs, r) +
            chart.g(r, s) * differentiate(Xs, k);
      }
      L.push_back(e);
    }
  return L;
}

void check_field(const Chart& chart, const VectorFieldDef& X) {
  if (static_cast<int>(X.components.size()) != chart.dim())
    throw std::invalid_argument("vector field has " + std::to_string(X.components.size()) + " components, chart has dimension " +
                                std::to_string(chart.dim()));
}

// sum_x ginv^{ax} T_{x r} u^r over bundle variables, T row-major n x n.
std::vector<ScalarExpr> raise_contract(const Chart& chart, const VarList& bv, const std::vector<ScalarExpr>& ginv,
                                       const std::vector<ScalarExpr>& T) {
  const int n = chart.dim();
  std::vector<ScalarExpr> out;
  for (int a = 0; a < n; ++a) {
    ScalarExpr e = ScalarExpr::constant(0.0, bv);
    for (int x = 0; x < n; ++x)
      for (int r = 0; r < n; ++r) {
        ScalarExpr c = ginv[static_cast<std::size_t>(a * n + x)] * T[static_cast<std::size_t>(x * n + r)];
        if (c.is_zero()) continue;
        e = e + c.rebind(bv) * ScalarExpr::variable(n + r, bv);
      }
    out.push_back(e);
  }
  return out;
}

// Base-manifold data at x shared by the closed forms.
struct BaseData {
  int n = 0;
  double t = 0;
  ProfileScalars s;
  Mat g;
  std::vector<double> u, ul;
  TensorValue R;  // R_{akji}
  LocalGeometry geo;

  BaseData(const WeightProfile& profile, const Chart& chart, std::span<const double> x, std::span<const double> uu)
      : n(chart.dim()), geo(chart, x, 3) {
    if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
    if (static_cast<int>(uu.size()) != n) throw GeometryError("fiber vector has the wrong dimension");
    require_nondegenerate(profile, uu, chart, x);
    g = Mat(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = geo.g()(i, j).value();
    u.assign(uu.begin(), uu.end());
    ul.assign(static_cast<std::size_t>(n), 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) ul[static_cast<std::size_t>(a)] += g(a, b) * u[static_cast<std::size_t>(b)];
    t = g_norm2(g, uu);
    s = derived_scalars(profile, t);
    R = values(geo.riemann_low());
  }
  double U(int i) const { return u[static_cast<std::size_t>(i)]; }
  double UL(int i) const { return ul[static_cast<std::size_t>(i)]; }

  Tensor<Jet> lower(const Tensor<Jet>& X) const {
    Tensor<Jet> out(n, "l");
    for (int a = 0; a < n; ++a)
      for (int r = 0; r < n; ++r) out(a) += geo.g()(a, r) * X(r);
    return out;
  }
};

// Covariant derivatives of a base vector field: D(p,k) = nabla_k X_p, DD(p,k,j) = nabla_j nabla_k X_p.
struct FieldDerivs {
  std::vector<double> X, Xl;
  TensorValue D, DD;
  Tensor<Jet> Dj;

  FieldDerivs(const BaseData& b, const VectorFieldDef& field) {
    Tensor<Jet> Xj = b.geo.evaluate(field.components, "u");
    Tensor<Jet> Xlj = b.lower(Xj);
    Dj = b.geo.nabla(Xlj);
    D = values(Dj);
    DD = values(b.geo.nabla(Dj));
    for (int i = 0; i < b.n; ++i) {
      X.push_back(Xj(i).value());
      Xl.push_back(Xlj(i).value());
    }
  }
  // Printed symbols: nabla_k X_l, nabla_k nabla_l X_p.
  double n1(int k, int l) const { return D(l, k); }
  double n2(int k, int l, int p) const { return DD(p, l, k); }
  double L(int k, int l) const { return D(l, k) + D(k, l); }
};

double lie_metric_residual(const FieldDerivs& F, int n) {
  double m = 0;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) m = std::max(m, std::abs(F.L(k, l)));
  return m;
}

LieBlocks zero_blocks(int n) { return {Mat::Zero(n, n), Mat::Zero(n, n), Mat::Zero(n, n)}; }

LieBlocks complete_lift_general(const BaseData& b, const FieldDerivs& F) {
  const int n = b.n;
  const auto& s = b.s;
  auto XR = [&](int k, int p, int l) {
    double v = 0;
    for (int r = 0; r < n; ++r) v += F.X[static_cast<std::size_t>(r)] * b.R(r, k, p, l);
    return v;
  };
  double uuX = 0;
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) uuX += b.U(p) * b.U(q) * F.n1(p, q);
  LieBlocks out = zero_blocks(n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      double hh = 0, vh = 0, vv = 0;
      for (int p = 0; p < n; ++p) {
        hh += s.a2 * b.U(p) * (F.n2(k, p, l) + XR(k, p, l) + F.n2(l, p, k) + XR(l, p, k));
        hh += s.B * b.U(p) * (F.L(k, p) * b.UL(l) + F.L(l, p) * b.UL(k));
        vh += s.a1 * b.U(p) * (F.n2(l, p, k) + XR(l, p, k));
        vh += s.b2 * b.U(p) * (F.L(k, p) * b.UL(l) + F.L(l, p) * b.UL(k));
        vv += s.b1 * b.U(p) * (F.L(k, p) * b.UL(l) + F.L(l, p) * b.UL(k));
        for (int q = 0; q < n; ++q) {
          double uu = b.U(p) * b.U(q);
          hh += s.b2 * uu * ((F.n2(k, p, q) + XR(k, p, q)) * b.UL(l) + (F.n2(l, p, q) + XR(l, p, q)) * b.UL(k));
          vh += s.b1 * uu * (F.n2(l, p, q) + XR(l, p, q)) * b.UL(k);
        }
      }
      const double gkl = b.g(k, l), ukl = b.UL(k) * b.UL(l);
      hh += s.A * F.L(k, l) + 2 * (s.Ap * gkl + s.Bp * ukl) * uuX;
      vh += s.a2 * F.L(k, l) + 2 * (s.a2p * gkl + s.b2p * ukl) * uuX;
      vv += s.a1 * F.L(k, l) + 2 * (s.a1p * gkl + s.b1p * ukl) * uuX;
      out.hh(k, l) = hh;
      out.vh(k, l) = vh;
      out.vv(k, l) = vv;
    }
  return out;
}

ClosedFormResult complete_lift_conformal(const BaseData& b, const FieldDerivs& F, bool df_reading, double tol) {
  const int n = b.n;
  const auto& s = b.s;
  // f = g^{ij} (L_X g)_{ij} / n as a jet, for its gradient.
  Jet fj(0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) fj += b.geo.ginv()(i, j) * (F.Dj(i, j) + F.Dj(j, i));
  fj = fj * Jet(1.0 / n);
  const double f = fj.value();
  double resid = 0;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) resid = std::max(resid, std::abs(F.L(k, l) - f * b.g(k, l)));
  if (resid > tol * std::max(1.0, std::abs(f)))
    throw HypothesisViolated("field is not conformal: |L_X g - f g| = " + std::to_string(resid), resid);
  std::vector<double> df(static_cast<std::size_t>(n));
  double pf = 0;
  for (int k = 0; k < n; ++k) {
    df[static_cast<std::size_t>(k)] = fj.partial(k);
    pf += b.U(k) * df[static_cast<std::size_t>(k)];
  }
  const double r2 = b.t;
  ClosedFormResult res{zero_blocks(n), resid, f};
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double gkl = b.g(k, l), uk = b.UL(k), ul = b.UL(l);
      const double dk = df[static_cast<std::size_t>(k)], dl = df[static_cast<std::size_t>(l)];
      res.blocks.hh(k, l) = (s.a2 * pf + f * (s.A + s.Ap * r2)) * gkl + f * (2 * s.B + s.Bp * r2) * uk * ul +
                            0.5 * s.b2 * r2 * (dk * ul + dl * uk);
      // As printed the middle term is "-nabla_k u_l", which vanishes.
      const double middle = df_reading ? dk * ul : 0.0;
      res.blocks.vh(k, l) = 0.5 * s.a1 * (dl * uk - middle + pf * gkl) + f * (s.a2 + s.a2p * r2) * gkl +
                            f * (2 * s.b2 + s.b2p * r2) * uk * ul + 0.5 * s.b1 * r2 * dl * uk;
      res.blocks.vv(k, l) = f * (s.a1 + s.a1p * r2) * gkl + f * (2 * s.b1 + s.b1p * r2) * uk * ul;
    }
  return res;
}

LieBlocks vertical_lift_form(const BaseData& b, const FieldDerivs& F) {
  const int n = b.n;
  const auto& s = b.s;
  double Xu = 0;
  for (int a = 0; a < n; ++a) Xu += F.Xl[static_cast<std::size_t>(a)] * b.U(a);
  // g(nabla_l X, u)
  std::vector<double> nXu(static_cast<std::size_t>(n), 0.0);
  for (int l = 0; l < n; ++l)
    for (int p = 0; p < n; ++p) nXu[static_cast<std::size_t>(l)] += F.n1(l, p) * b.U(p);
  LieBlocks out = zero_blocks(n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double gkl = b.g(k, l), uk = b.UL(k), ul = b.UL(l);
      const double Xk = F.Xl[static_cast<std::size_t>(k)], Xl = F.Xl[static_cast<std::size_t>(l)];
      const double nk = nXu[static_cast<std::size_t>(k)], nl = nXu[static_cast<std::size_t>(l)];
      out.vv(k, l) = s.b1 * (Xl * uk + Xk * ul) + 2 * s.a1p * gkl * Xu + 2 * s.b1p * Xu * uk * ul;
      out.vh(k, l) = s.a1 * F.n1(l, k) + s.b1 * nl * uk + s.b2 * (Xl * uk + Xk * ul) + 2 * s.a2p * gkl * Xu +
                     2 * s.b2p * Xu * uk * ul;
      out.hh(k, l) = s.a2 * (F.n1(l, k) + F.n1(k, l)) + s.b2 * (nl * uk + nk * ul) + s.B * (Xk * ul + Xl * uk) +
                     2 * s.Ap * gkl * Xu + 2 * s.Bp * Xu * uk * ul;
    }
  return out;
}

ClosedFormResult iota_P_form(const BaseData& b, const std::vector<ScalarExpr>& Pexpr, bool skew, double tol) {
  const int n = b.n;
  const auto& s = b.s;
  Tensor<Jet> Pj = b.geo.evaluate(Pexpr, "ll");
  TensorValue P = values(Pj), DP = values(b.geo.nabla(Pj));  // DP(i,j,k) = nabla_k P_{ij}
  double resid = 0;
  if (skew) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) resid = std::max(resid, std::abs(P(i, j) + P(j, i)));
    if (resid > tol) throw HypothesisViolated("P is not skew-symmetric", resid);
  }
  auto Pu = [&](int k) {  // u^r P_{kr}
    double v = 0;
    for (int r = 0; r < n; ++r) v += b.U(r) * P(k, r);
    return v;
  };
  auto uP = [&](int k) {  // u^r P_{rk}
    double v = 0;
    for (int r = 0; r < n; ++r) v += b.U(r) * P(r, k);
    return v;
  };
  auto nPu = [&](int k, int l) {  // u^r nabla_k P_{lr}
    double v = 0;
    for (int r = 0; r < n; ++r) v += b.U(r) * DP(l, r, k);
    return v;
  };
  auto nPuu = [&](int k) {  // u^p u^r nabla_k P_{pr}
    double v = 0;
    for (int p = 0; p < n; ++p)
      for (int r = 0; r < n; ++r) v += b.U(p) * b.U(r) * DP(p, r, k);
    return v;
  };
  double Puu = 0;
  for (int p = 0; p < n; ++p) Puu += b.U(p) * Pu(p);
  ClosedFormResult res{zero_blocks(n), resid, 0.0};
  auto& o = res.blocks;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double gkl = b.g(k, l), uk = b.UL(k), ul = b.UL(l);
      if (skew) {
        o.hh(k, l) = s.a2 * (nPu(k, l) + nPu(l, k)) + s.B * (Pu(k) * ul + Pu(l) * uk);
        o.vh(k, l) = s.a2 * P(l, k) + s.b2 * Pu(l) * uk + s.a1 * nPu(l, k);
        o.vv(k, l) = 0.0;
        continue;
      }
      o.hh(k, l) = s.a2 * (nPu(k, l) + nPu(l, k)) + s.b2 * (nPuu(k) * ul + nPuu(l) * uk) +
                   2 * (s.Ap * gkl + s.Bp * uk * ul) * Puu + s.B * (Pu(k) * ul + Pu(l) * uk);
      o.vh(k, l) = s.a2 * P(l, k) + s.b2 * uP(k) * ul + s.a1 * nPu(l, k) + s.b1 * nPuu(l) * uk +
                   2 * (s.a2p * gkl + s.b2p * uk * ul) * Puu + s.b2 * (Pu(k) * ul + Pu(l) * uk);
      o.vv(k, l) = s.a1 * (P(k, l) + P(l, k)) + s.b1 * ((Pu(k) + uP(k)) * ul + (Pu(l) + uP(l)) * uk) +
                   2 * (s.a1p * gkl + s.b1p * uk * ul) * Puu;
    }
  return res;
}

LieBlocks iota_C_form(const BaseData& b, const FieldDerivs& F) {
  const int n = b.n;
  const auto& s = b.s;
  double uuX = 0;
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) uuX += b.U(p) * b.U(q) * F.n1(p, q);
  LieBlocks out = zero_blocks(n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double gkl = b.g(k, l), uk = b.UL(k), ul = b.UL(l);
      double hh = 0, vh = 0, vv = 0;
      for (int p = 0; p < n; ++p) {
        const double up = b.U(p);
        hh -= s.a2 * up * (F.n2(k, l, p) + F.n2(l, k, p) + F.n2(k, p, l) + F.n2(l, p, k));
        hh -= s.B * up * (F.L(k, p) * ul + F.L(l, p) * uk);
        vh -= s.b2 * up * (2 * F.L(k, p) * ul + F.L(l, p) * uk);
        vh -= s.a1 * up * (F.n2(l, k, p) + F.n2(l, p, k));
        vv -= 2 * s.b1 * up * (F.L(k, p) * ul + F.L(l, p) * uk);
        for (int q = 0; q < n; ++q) {
          const double uu = up * b.U(q);
          hh -= 2 * s.b2 * uu * (F.n2(k, p, q) * ul + F.n2(l, p, q) * uk);
          vh -= 2 * s.b1 * uu * F.n2(l, p, q) * uk;
        }
      }
      hh -= 4 * (s.Ap * gkl + s.Bp * uk * ul) * uuX;
      vh += -s.a2 * F.L(k, l) - 4 * (s.a2p * gkl + s.b2p * uk * ul) * uuX;
      vv += -2 * s.a1 * F.L(k, l) - 4 * (s.a1p * gkl + s.b1p * uk * ul) * uuX;
      out.hh(k, l) = hh;
      out.vh(k, l) = vh;
      out.vv(k, l) = vv;
    }
  return out;
}

ClosedFormResult grad_Y_form(const BaseData& b, const FieldDerivs& F, bool symmetrized, double tol) {
  const int n = b.n;
  const auto& s = b.s;
  const double resid = lie_metric_residual(F, n);
  if (resid > tol) throw HypothesisViolated("Y is not a Killing field: |L_Y g| = " + std::to_string(resid), resid);
  ClosedFormResult res{zero_blocks(n), resid, 0.0};
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      double hh = 0, vh = 0;
      for (int p = 0; p < n; ++p) {
        const double up = b.U(p);
        const double first = symmetrized ? F.n2(k, l, p) : F.n2(l, k, p);
        hh += s.a2 * (first + F.n2(l, k, p)) * up;
        hh += s.B * (F.n1(k, p) * up * b.UL(l) + F.n1(l, p) * up * b.UL(k));
        vh += s.a1 * F.n2(l, k, p) * up + s.b2 * F.n1(l, p) * up * b.UL(k);
      }
      res.blocks.hh(k, l) = hh;
      res.blocks.vh(k, l) = vh + s.a2 * F.n1(l, k);
    }
  return res;
}

ClosedFormResult affine_sum_form(const BaseData& b, const FieldDerivs& F, double tol) {
  const int n = b.n;
  const auto& s = b.s;
  // L_X Gamma = 0: nabla_j nabla_i X_p + X^r R_{rjip} = 0.
  double resid = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int p = 0; p < n; ++p) {
        double v = F.n2(j, i, p);
        for (int r = 0; r < n; ++r) v += F.X[static_cast<std::size_t>(r)] * b.R(r, j, i, p);
        resid = std::max(resid, std::abs(v));
      }
  if (resid > tol) throw HypothesisViolated("field is not an infinitesimal affine transformation", resid);
  double uuX = 0;
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) uuX += b.U(p) * b.U(q) * F.n1(p, q);
  ClosedFormResult res{zero_blocks(n), resid, 0.0};
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double gkl = b.g(k, l), uk = b.UL(k), ul = b.UL(l);
      double vh = 0, vv = 0;
      for (int p = 0; p < n; ++p) {
        vh -= s.b2 * b.U(p) * F.L(k, p) * ul;
        vv -= s.b1 * b.U(p) * (F.L(k, p) * ul + F.L(l, p) * uk);
      }
      res.blocks.hh(k, l) = s.A * F.L(k, l) - 2 * (s.Ap * gkl + s.Bp * uk * ul) * uuX;
      res.blocks.vh(k, l) = vh - 2 * (s.a2p * gkl + s.b2p * uk * ul) * uuX;
      res.blocks.vv(k, l) = vv - s.a1 * F.L(k, l) - 2 * (s.a1p * gkl + s.b1p * uk * ul) * uuX;
    }
  return res;
}

const VectorFieldDef& payload_field(const BundleVectorField& Z) {
  if (!Z.field) throw std::invalid_argument("lift of kind '" + to_string(Z.kind) + "' carries no base field");
  return *Z.field;
}

}  // namespace

std::string to_string(LiftType kind) { return kLiftNames[static_cast<int>(kind)]; }

LiftType parse_lift_type(const std::string& name) {
  for (int i = 0; i < 7; ++i)
    if (name == kLiftNames[i]) return static_cast<LiftType>(i);
  if (name == "grad_Y_lift") return LiftType::grad_Y;
  throw std::invalid_argument("unknown lift kind '" + name + "'");
}

std::string to_string(ClosedForm form) { return kFormNames[static_cast<int>(form)]; }

std::vector<ClosedForm> closed_forms_for(LiftType kind) {
  switch (kind) {
    case LiftType::complete_lift:
      return {ClosedForm::complete_lift, ClosedForm::complete_lift_conformal, ClosedForm::complete_lift_conformal_df};
    case LiftType::vertical_lift: return {ClosedForm::vertical_lift};
    case LiftType::iota_P: return {ClosedForm::iota_P, ClosedForm::iota_P_skew};
    case LiftType::iota_C: return {ClosedForm::iota_C};
    case LiftType::grad_Y: return {ClosedForm::grad_Y, ClosedForm::grad_Y_symmetrized};
    case LiftType::affine_sum: return {ClosedForm::affine_sum};
    case LiftType::custom: return {};
  }
  return {};
}

BundleVectorField make_lift(LiftType kind, const Chart& chart, const VectorFieldDef& X) {
  check_field(chart, X);
  const int n = chart.dim();
  BundleVectorField Z;
  Z.kind = kind;
  Z.vars = bundle_vars(chart);
  Z.field = X;
  const auto& bv = Z.vars;
  auto zero = ScalarExpr::constant(0.0, bv);
  auto uvar = [&](int i) { return ScalarExpr::variable(n + i, bv); };
  Z.components.assign(static_cast<std::size_t>(2 * n), zero);
  switch (kind) {
    case LiftType::complete_lift:
      for (int r = 0; r < n; ++r) {
        const auto& Xr = X.components[static_cast<std::size_t>(r)];
        Z.components[static_cast<std::size_t>(r)] = Xr.rebind(bv);
        ScalarExpr e = zero;
        for (int s = 0; s < n; ++s) {
          ScalarExpr d = differentiate(Xr, s);
          if (!d.is_zero()) e = e + uvar(s) * d.rebind(bv);
        }
        Z.components[static_cast<std::size_t>(n + r)] = e;
      }
      break;
    case LiftType::vertical_lift:
      for (int r = 0; r < n; ++r) Z.components[static_cast<std::size_t>(n + r)] = X.components[static_cast<std::size_t>(r)].rebind(bv);
      break;
    case LiftType::iota_C: {
      auto L = lie_metric_symbolic(chart, X);
      for (auto& e : L) e = -e;
      auto V = raise_contract(chart, bv, symbolic_inverse_metric(chart), L);
      for (int r = 0; r < n; ++r) Z.components[static_cast<std::size_t>(n + r)] = V[static_cast<std::size_t>(r)];
      break;
    }
    case LiftType::grad_Y: {
      // nabla_q Y_p = d_q(g_{ps} Y^s) - Gamma^t_{qp} g_{ts} Y^s, stored as T_{qp}.
      auto gam = symbolic_christoffel(chart);
      std::vector<ScalarExpr> Yl;
      for (int p = 0; p < n; ++p) {
        ScalarExpr e = ScalarExpr::constant(0.0, chart.coords());
        for (int s = 0; s < n; ++s) e = e + chart.g(p, s) * X.components[static_cast<std::size_t>(s)];
        Yl.push_back(e);
      }
      std::vector<ScalarExpr> T;
      for (int q = 0; q < n; ++q)
        for (int p = 0; p < n; ++p) {
          ScalarExpr e = differentiate(Yl[static_cast<std::size_t>(p)], q);
          for (int t = 0; t < n; ++t) e = e - gam[static_cast<std::size_t>((t * n + q) * n + p)] * Yl[static_cast<std::size_t>(t)];
          T.push_back(e);
        }
      auto V = raise_contract(chart, bv, symbolic_inverse_metric(chart), T);
      for (int r = 0; r < n; ++r) Z.components[static_cast<std::size_t>(n + r)] = V[static_cast<std::size_t>(r)];
      break;
    }
    case LiftType::affine_sum: {
      auto C = make_lift(LiftType::complete_lift, chart, X);
      auto I = make_lift(LiftType::iota_C, chart, X);
      for (int A = 0; A < 2 * n; ++A)
        Z.components[static_cast<std::size_t>(A)] = C.components[static_cast<std::size_t>(A)] + I.components[static_cast<std::size_t>(A)];
      break;
    }
    case LiftType::iota_P:
    case LiftType::custom:
      throw std::invalid_argument("make_lift: kind '" + to_string(kind) + "' does not take a vector field payload");
  }
  return Z;
}

BundleVectorField make_iota_P(const Chart& chart, const std::vector<ScalarExpr>& P) {
  const int n = chart.dim();
  if (static_cast<int>(P.size()) != n * n)
    throw std::invalid_argument("iota_P: tensor needs " + std::to_string(n * n) + " components");
  BundleVectorField Z;
  Z.kind = LiftType::iota_P;
  Z.vars = bundle_vars(chart);
  for (const auto& e : P) Z.tensor.push_back(e.rebind(chart.coords()));
  Z.components.assign(static_cast<std::size_t>(n), ScalarExpr::constant(0.0, Z.vars));
  auto V = raise_contract(chart, Z.vars, symbolic_inverse_metric(chart), Z.tensor);
  Z.components.insert(Z.components.end(), V.begin(), V.end());
  return Z;
}

BundleVectorField make_custom_field(const Chart& chart, const std::vector<std::string>& texts) {
  const int n = chart.dim();
  if (static_cast<int>(texts.size()) != 2 * n)
    throw std::invalid_argument("custom field needs " + std::to_string(2 * n) + " components");
  BundleVectorField Z;
  Z.kind = LiftType::custom;
  Z.vars = bundle_vars(chart);
  for (const auto& t : texts) Z.components.push_back(parse_expression(t, Z.vars));
  return Z;
}

double LieBlocks::max_abs() const {
  return std::max({hh.cwiseAbs().maxCoeff(), vh.cwiseAbs().maxCoeff(), vv.cwiseAbs().maxCoeff()});
}

double max_abs_diff(const LieBlocks& a, const LieBlocks& b) {
  return std::max({(a.hh - b.hh).cwiseAbs().maxCoeff(), (a.vh - b.vh).cwiseAbs().maxCoeff(),
                   (a.vv - b.vv).cwiseAbs().maxCoeff()});
}

static std::vector<Jet> field_jets(const BundleJets& bj, const BundleVectorField& Z) {
  const int m = 2 * bj.dim();
  if (static_cast<int>(Z.components.size()) != m) throw std::invalid_argument("bundle field has the wrong number of components");
  std::vector<Jet> out;
  for (const auto& c : Z.components) out.push_back(c.rebind(Z.vars).eval<Jet>(bj.coords()));
  return out;
}

Mat lie_G_generic_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                     std::span<const double> u, const BundleVectorField& Z) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  require_nondegenerate(profile, u, chart, x);
  BundleJets bj(profile, chart, x, u, 1);
  const int m = 2 * chart.dim();
  auto Zj = field_jets(bj, Z);
  Mat L(m, m);
  for (int A = 0; A < m; ++A)
    for (int B = 0; B < m; ++B) {
      double v = 0;
      for (int C = 0; C < m; ++C) {
        v += Zj[C].value() * bj.G(A, B).partial(C);
        v += bj.G(C, B).value() * Zj[C].partial(A) + bj.G(A, C).value() * Zj[C].partial(B);
      }
      L(A, B) = v;
    }
  return L;
}

LieBlocks adapted_blocks(const Chart& chart, std::span<const double> x, std::span<const double> u, const Mat& coordinate) {
  const int n = chart.dim();
  FrameChange fc = frame_change_at(chart, x, u);
  Mat La = fc.to_coordinates.transpose() * coordinate * fc.to_coordinates;
  return {La.block(0, 0, n, n), La.block(n, 0, n, n), La.block(n, n, n, n)};
}

LieBlocks lie_G_adapted_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                           std::span<const double> u, const BundleVectorField& Z) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  require_nondegenerate(profile, u, chart, x);
  const int n = chart.dim();
  BundleJets bj(profile, chart, x, u, 1);
  const auto& base = bj.base();
  auto Zj = field_jets(bj, Z);
  std::vector<Jet> H(Zj.begin(), Zj.begin() + n), V(Zj.begin() + n, Zj.end());
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int r = 0; r < n; ++r) V[a] += Zj[b] * bj.u(r) * base.gamma()(a, b, r);

  Mat N(n, n), g(n, n);
  std::vector<double> uu(static_cast<std::size_t>(n)), ul(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    uu[j] = u[j];
    for (int k = 0; k < n; ++k) {
      N(j, k) = bj.N(j, k).value();
      g(j, k) = base.g()(j, k).value();
    }
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) ul[a] += g(a, b) * uu[b];
  const auto s = derived_scalars(profile, g_norm2(g, u));
  TensorValue R = values(base.riemann_low());
  TensorValue Gam = values(base.gamma());

  auto dh = [&](const Jet& f, int k) {
    double v = f.partial(k);
    for (int j = 0; j < n; ++j) v -= N(j, k) * f.partial(n + j);
    return v;
  };
  // DhW(a,k) = d_k^h W^a + W^r Gamma^a_{rk}; DvW(a,k) = d_k^v W^a
  Mat DhH(n, n), DhV(n, n), DvH(n, n), DvV(n, n);
  std::vector<double> Hv(static_cast<std::size_t>(n)), Vv(static_cast<std::size_t>(n)), Vl(static_cast<std::size_t>(n), 0.0);
  for (int a = 0; a < n; ++a) {
    Hv[a] = H[a].value();
    Vv[a] = V[a].value();
  }
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k) {
      double ch = 0, cv = 0;
      for (int r = 0; r < n; ++r) {
        ch += Hv[r] * Gam(a, r, k);
        cv += Vv[r] * Gam(a, r, k);
      }
      DhH(a, k) = dh(H[a], k) + ch;
      DhV(a, k) = dh(V[a], k) + cv;
      DvH(a, k) = H[a].partial(n + k);
      DvV(a, k) = V[a].partial(n + k);
    }
  double Vu = 0;
  for (int k = 0; k < n; ++k) {
    for (int a = 0; a < n; ++a) Vl[k] += g(k, a) * Vv[a];
    Vu += Vv[k] * ul[k];
  }
  // sum_a W(a,k) g_{al} and sum_a W(a,k) u_a
  auto wg = [&](const Mat& W, int k, int l) {
    double v = 0;
    for (int a = 0; a < n; ++a) v += W(a, k) * g(a, l);
    return v;
  };
  auto wu = [&](const Mat& W, int k) {
    double v = 0;
    for (int a = 0; a < n; ++a) v += W(a, k) * ul[a];
    return v;
  };

  LieBlocks out = zero_blocks(n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      const double gkl = g(k, l), uk = ul[k], uL = ul[l];
      double curv_hh = 0, curv_vh = 0;
      for (int a = 0; a < n; ++a)
        for (int r = 0; r < n; ++r) {
          curv_hh += (R(a, k, l, r) + R(a, l, k, r)) * Hv[a] * uu[r];
          curv_vh += R(a, l, k, r) * uu[r] * Hv[a];
        }
      out.hh(k, l) = -s.a2 * curv_hh + s.A * (wg(DhH, k, l) + wg(DhH, l, k)) + s.B * (wu(DhH, k) * uL + wu(DhH, l) * uk) +
                     s.a2 * (wg(DhV, k, l) + wg(DhV, l, k)) + s.b2 * (wu(DhV, k) * uL + wu(DhV, l) * uk) +
                     2 * s.Ap * gkl * Vu + 2 * s.Bp * Vu * uk * uL + s.B * (Vl[k] * uL + Vl[l] * uk);
      out.vh(k, l) = -s.a1 * curv_vh + s.A * wg(DvH, k, l) + s.B * wu(DvH, k) * uL + s.a2 * wg(DhH, l, k) +
                     s.b2 * wu(DhH, l) * uk + s.a2 * wg(DvV, k, l) + s.b2 * wu(DvV, k) * uL + s.a1 * wg(DhV, l, k) +
                     s.b1 * wu(DhV, l) * uk + 2 * s.a2p * gkl * Vu + 2 * s.b2p * Vu * uk * uL +
                     s.b2 * (Vl[k] * uL + Vl[l] * uk);
      out.vv(k, l) = s.a2 * (wg(DvH, k, l) + wg(DvH, l, k)) + s.b2 * (wu(DvH, k) * uL + wu(DvH, l) * uk) +
                     s.b1 * (Vl[k] * uL + Vl[l] * uk) + 2 * s.a1p * gkl * Vu + 2 * s.b1p * Vu * uk * uL +
                     s.a1 * (wg(DvV, k, l) + wg(DvV, l, k)) + s.b1 * (wu(DvV, k) * uL + wu(DvV, l) * uk);
    }
  return out;
}

ClosedFormResult closed_form_lift_LG_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                                        std::span<const double> u, const BundleVectorField& Z, ClosedForm form,
                                        double hypothesis_tol) {
  BaseData b(profile, chart, x, u);
  switch (form) {
    case ClosedForm::complete_lift: return {complete_lift_general(b, FieldDerivs(b, payload_field(Z))), 0.0, 0.0};
    case ClosedForm::complete_lift_conformal:
    case ClosedForm::complete_lift_conformal_df:
      return complete_lift_conformal(b, FieldDerivs(b, payload_field(Z)), form == ClosedForm::complete_lift_conformal_df,
                                     hypothesis_tol);
    case ClosedForm::vertical_lift: return {vertical_lift_form(b, FieldDerivs(b, payload_field(Z))), 0.0, 0.0};
    case ClosedForm::iota_P:
    case ClosedForm::iota_P_skew:
      if (Z.tensor.empty()) throw std::invalid_argument("iota_P closed form needs a tensor payload");
      return iota_P_form(b, Z.tensor, form == ClosedForm::iota_P_skew, hypothesis_tol);
    case ClosedForm::iota_C: return {iota_C_form(b, FieldDerivs(b, payload_field(Z))), 0.0, 0.0};
    case ClosedForm::grad_Y:
    case ClosedForm::grad_Y_symmetrized:
      return grad_Y_form(b, FieldDerivs(b, payload_field(Z)), form == ClosedForm::grad_Y_symmetrized, hypothesis_tol);
    case ClosedForm::affine_sum: return affine_sum_form(b, FieldDerivs(b, payload_field(Z)), hypothesis_tol);
  }
  throw std::logic_error("closed_form_lift_LG_at: unhandled form");
}

// ---------------------------------------------------------------------------

namespace {

// True when |w(t)| <= tol on a grid over [0, t_max] for every listed weight expression.
bool vanishes_on_grid(const std::vector<std::function<double(double)>>& fns, double t_max, double tol) {
  const int samples = 65;
  for (int i = 0; i < samples; ++i) {
    double t = t_max * i / (samples - 1);
    for (const auto& f : fns)
      if (std::abs(f(t)) > tol) return false;
  }
  return true;
}

}  // namespace

std::optional<bool> predicted_killing(const WeightProfile& profile, const Chart& chart, const BundleVectorField& Z,
                                      std::span<const BundlePoint> samples, double t_max, std::string* description,
                                      double tol) {
  auto describe = [&](const std::string& d) {
    if (description) *description = d;
  };
  if (samples.empty()) return std::nullopt;
  const int n = chart.dim();
  auto w = [&](Weight k, int d) { return std::function<double(double)>([&, k, d](double t) { return profile.value(k, t, d); }); };
  auto B = std::function<double(double)>([&](double t) { return profile.value(Weight::b1, t) + profile.value(Weight::b3, t); });
  const double hyp_tol = 1e-8;

  // Pointwise base-field data over the sample set.
  struct Stats {
    double killing = 0, conformal = 0, f = 0, ddx = 0, nx = 0, x = 0;
  } st;
  if (Z.field) {
    for (const auto& p : samples) {
      BaseData b(profile, chart, p.x, p.u);
      FieldDerivs F(b, *Z.field);
      st.killing = std::max(st.killing, lie_metric_residual(F, n));
      double tr = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) tr += b.geo.ginv()(i, j).value() * F.L(i, j);
      const double f = tr / n;
      st.f = std::max(st.f, std::abs(f));
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          st.conformal = std::max(st.conformal, std::abs(F.L(k, l) - f * b.g(k, l)));
          st.nx = std::max(st.nx, std::abs(F.n1(k, l)));
          for (int q = 0; q < n; ++q) st.ddx = std::max(st.ddx, std::abs(F.n2(k, l, q)));
        }
      for (double v : F.X) st.x = std::max(st.x, std::abs(v));
    }
  }
  switch (Z.kind) {
    case LiftType::complete_lift:
      if (st.conformal > hyp_tol) return std::nullopt;
      describe("L_X g = f g; Killing iff f = 0");
      return st.f <= hyp_tol;
    case LiftType::vertical_lift: {
      if (st.killing > hyp_tol) return std::nullopt;
      describe("X Killing; Killing iff a_j' = 0 and b_j = 0");
      if (st.x <= hyp_tol) return true;
      return vanishes_on_grid({w(Weight::a1, 1), w(Weight::a2, 1), w(Weight::a3, 1), w(Weight::b1, 0),
                               w(Weight::b2, 0), w(Weight::b3, 0)},
                              t_max, tol);
    }
    case LiftType::grad_Y:
      if (st.killing > hyp_tol || st.ddx > hyp_tol || st.nx <= hyp_tol) return std::nullopt;
      describe("Y non-parallel Killing with nabla nabla Y = 0; Killing iff a2 = b2 = B = 0");
      return vanishes_on_grid({w(Weight::a2, 0), w(Weight::b2, 0), B}, t_max, tol);
    case LiftType::iota_C:
    case LiftType::affine_sum:
      if (st.killing > hyp_tol) return std::nullopt;
      describe("X Killing; iota C vanishes and X^C is Killing");
      return true;
    case LiftType::iota_P: {
      double skew = 0, dP = 0, mag = 0;
      for (const auto& p : samples) {
        LocalGeometry geo(chart, p.x, 2);
        Tensor<Jet> Pj = geo.evaluate(Z.tensor, "ll");
        TensorValue P = values(Pj), DP = values(geo.nabla(Pj));
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            skew = std::max(skew, std::abs(P(i, j) + P(j, i)));
            mag = std::max(mag, std::abs(P(i, j)));
            for (int k = 0; k < n; ++k) dP = std::max(dP, std::abs(DP(i, j, k)));
          }
      }
      if (skew > hyp_tol || dP > hyp_tol) return std::nullopt;
      describe("P skew and parallel; Killing iff P = 0 or a2 = b2 = B = 0");
      if (mag <= hyp_tol) return true;
      return vanishes_on_grid({w(Weight::a2, 0), w(Weight::b2, 0), B}, t_max, tol);
    }
    case LiftType::custom: return std::nullopt;
  }
  return std::nullopt;
}

KillingVerdict killing_verdict(const WeightProfile& profile, const Chart& chart, const BundleVectorField& Z,
                               std::span<const BundlePoint> samples, double tol, double t_max) {
  KillingVerdict v;
  double sample_t = 0;
  for (const auto& p : samples) {
    LieBlocks blk = adapted_blocks(chart, p.x, p.u, lie_G_generic_at(profile, chart, p.x, p.u, Z));
    const double r = blk.max_abs();
    if (r >= v.max_residual) {
      v.max_residual = r;
      v.witness = p;
    }
    auto m = metric_at(chart, p.x);
    sample_t = std::max(sample_t, g_norm2(Eigen::Map<const Mat>(m.g.data().data(), chart.dim(), chart.dim()), p.u));
  }
  v.killing = v.max_residual < tol;
  v.predicted = predicted_killing(profile, chart, Z, samples, std::max(t_max, sample_t), &v.predicate);
  return v;
}

}  // namespace gnat
