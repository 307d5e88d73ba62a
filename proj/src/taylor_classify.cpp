#include "gnat/taylor_classify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "gnat/tangent_bundle.hpp"

namespace gnat {

namespace {

Tensor<Jet> zeros(int n, const std::string& variance) { return Tensor<Jet>(n, variance, Jet(0.0)); }

// out(l, rest) = g_{la} t(a, rest)
Tensor<Jet> lower_first(const Tensor<Jet>& t, const Tensor<Jet>& g) {
  const int n = t.dim();
  std::string var = t.variance();
  var[0] = 'l';
  Tensor<Jet> out(n, var, Jet(0.0));
  const std::size_t inner = t.size() / static_cast<std::size_t>(n);
  for (int l = 0; l < n; ++l)
    for (std::size_t r = 0; r < inner; ++r) {
      Jet acc(0.0);
      for (int a = 0; a < n; ++a) acc += g(l, a) * t.data()[static_cast<std::size_t>(a) * inner + r];
      out.data()[static_cast<std::size_t>(l) * inner + r] = acc;
    }
  return out;
}

}  // namespace

TaylorCoefficients extract_coefficients(const BundleVectorField& Z, const Chart& chart, std::span<const double> x,
                                        int max_order) {
  const int n = chart.dim();
  if (static_cast<int>(Z.components.size()) != 2 * n) throw std::invalid_argument("bundle field has the wrong number of components");
  if (static_cast<int>(x.size()) != n) throw GeometryError("base point has the wrong dimension");
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  max_order = std::clamp(max_order, 1, 4);

  TaylorCoefficients c;
  c.n = n;
  c.order = max_order;
  c.x.assign(x.begin(), x.end());
  auto geo = std::make_shared<LocalGeometry>(chart, x, 4);
  c.geo = geo;

  VarList bvars = bundle_vars(chart);
  std::vector<Jet> vals(geo->bindings().begin(), geo->bindings().end());
  for (int i = 0; i < n; ++i) vals.emplace_back(0.0);

  // Sorted u-index tuple -> symbolic derivative, per component.
  std::vector<std::map<std::vector<int>, ScalarExpr>> memo(static_cast<std::size_t>(2 * n));
  std::function<const ScalarExpr&(int, const std::vector<int>&)> deriv = [&](int comp, const std::vector<int>& idx) -> const ScalarExpr& {
    auto& m = memo[static_cast<std::size_t>(comp)];
    auto it = m.find(idx);
    if (it != m.end()) return it->second;
    ScalarExpr e;
    if (idx.empty()) {
      e = Z.components[static_cast<std::size_t>(comp)].rebind(bvars);
    } else {
      std::vector<int> head(idx.begin(), idx.end() - 1);
      e = differentiate(deriv(comp, head), n + idx.back());
    }
    return m.emplace(idx, std::move(e)).first->second;
  };

  auto fill = [&](int comp0, int m) {
    Tensor<Jet> t = zeros(n, "u" + std::string(static_cast<std::size_t>(m), 'l'));
    std::map<std::vector<int>, Jet> cache;
    for (std::size_t off = 0; off < t.size(); ++off) {
      std::vector<int> idx = t.unflat(off);
      std::vector<int> key(idx.begin() + 1, idx.end());
      std::sort(key.begin(), key.end());
      key.insert(key.begin(), idx[0]);
      auto it = cache.find(key);
      if (it == cache.end()) {
        std::vector<int> us(key.begin() + 1, key.end());
        it = cache.emplace(key, deriv(comp0 + idx[0], us).eval<Jet>(vals)).first;
      }
      t.data()[off] = it->second;
    }
    return t;
  };

  c.X = fill(0, 0);
  c.Y = fill(n, 0);
  c.K = fill(0, 1);
  c.Pt = fill(n, 1);
  c.E = max_order >= 2 ? fill(0, 2) : zeros(n, "ull");
  c.Q = max_order >= 2 ? fill(n, 2) : zeros(n, "ull");
  c.F = max_order >= 3 ? fill(0, 3) : zeros(n, "ulll");
  c.S3 = max_order >= 3 ? fill(n, 3) : zeros(n, "ulll");
  c.G = max_order >= 4 ? fill(0, 4) : zeros(n, "ullll");
  c.V = max_order >= 4 ? fill(n, 4) : zeros(n, "ullll");

  const auto& Gm = geo->gamma();
  c.P = zeros(n, "ul");
  c.S = zeros(n, "ul");
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k) {
      c.P(a, k) = c.Pt(a, k) - geo->d(c.X(a), k);
      Jet s = c.Pt(a, k);
      for (int b = 0; b < n; ++b) s += c.X(b) * Gm(a, b, k);
      c.S(a, k) = s;
    }
  c.T = zeros(n, "ull");
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k)
      for (int p = 0; p < n; ++p) {
        Jet v = c.Q(a, k, p);
        for (int b = 0; b < n; ++b) v += c.K(b, k) * Gm(a, b, p) + c.K(b, p) * Gm(a, b, k);
        c.T(a, k, p) = v;
      }
  c.W = zeros(n, "ulll");
  for (int a = 0; a < n; ++a)
    for (int k = 0; k < n; ++k)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
          Jet v = c.S3(a, k, p, q);
          for (int e = 0; e < n; ++e)
            v += c.E(e, p, k) * Gm(a, e, q) + c.E(e, q, k) * Gm(a, e, p) + c.E(e, p, q) * Gm(a, e, k);
          c.W(a, k, p, q) = v;
        }
  c.Zc = zeros(n, "ullll");
  if (max_order >= 4)
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < n; ++k)
        for (int p = 0; p < n; ++p)
          for (int q = 0; q < n; ++q)
            for (int r = 0; r < n; ++r) {
              Jet v = c.V(a, k, p, q, r);
              for (int e = 0; e < n; ++e)
                v += c.F(e, k, p, q) * Gm(a, e, r) + c.F(e, k, q, r) * Gm(a, e, p) + c.F(e, k, r, p) * Gm(a, e, q) +
                     c.F(e, p, q, r) * Gm(a, e, k);
              c.Zc(a, k, p, q, r) = v;
            }

  const auto& g = geo->g();
  c.Xl = lower_first(c.X, g);
  c.Yl = lower_first(c.Y, g);
  c.Kl = lower_first(c.K, g);
  c.El = lower_first(c.E, g);
  c.Fl = lower_first(c.F, g);
  c.Gl = lower_first(c.G, g);
  c.Pl = lower_first(c.P, g);
  c.Sl = lower_first(c.S, g);
  c.Tl = lower_first(c.T, g);
  c.Wl = lower_first(c.W, g);
  c.Zl = lower_first(c.Zc, g);
  return c;
}

// ---------------------------------------------------------------------------
// Case classification and the homogeneous system

std::string to_string(SplitCase c) {
  switch (c) {
    case SplitCase::case1: return "1";
    case SplitCase::case2: return "2";
    case SplitCase::case3: return "3";
    case SplitCase::case4: return "4";
    default: return "none";
  }
}

CaseVerdict classify_case(const ProfileScalars& s, double zt) {
  CaseVerdict v;
  v.a = s.a;
  v.b = s.b1 - s.a1p;
  v.disc = 2.0 * v.b * s.a2 - s.a1 * s.b2;
  v.a1a2b2 = s.a1 * s.a2 * s.b2;
  auto zero = [zt](double t) { return std::abs(t) <= zt; };
  v.a1_zero = zero(s.a1);
  v.a2_zero = zero(s.a2);
  v.b2_zero = zero(s.b2);
  v.b_zero = zero(v.b);
  v.disc_zero = zero(v.disc);
  if (zero(v.a)) throw DegenerateMetric("a = a1 A - a2^2 vanishes at t = 0; the splitting hypothesis fails", 0.0);
  if (!v.disc_zero)
    v.which = SplitCase::case1;
  else if (!v.a1_zero && !v.a2_zero && !v.b2_zero)
    v.which = SplitCase::case2;
  else if (!v.a2_zero && v.b2_zero)
    v.which = SplitCase::case2;
  else if (!v.a2_zero && !v.b2_zero && v.a1_zero && v.b_zero)
    v.which = SplitCase::case3;
  else if (v.a2_zero && v.b2_zero)
    v.which = SplitCase::case4;
  else
    throw std::logic_error("classify_case: discriminants match no case (a2 = 0, b2 != 0 with a != 0)");
  return v;
}

Macierz1Solution solve_macierz1(const ProfileScalars& s, double zt) {
  Macierz1Solution out;
  const double b = s.b1 - s.a1p;
  out.matrix << s.A, s.a2, 0, 0,  //
      s.a2, s.a1, s.a2, s.A,      //
      0, 0, s.a1, s.a2,           //
      0, 0, 2 * b, s.b2;
  Eigen::FullPivLU<Eigen::Matrix4d> lu(out.matrix);
  const double scale = std::max(1.0, out.matrix.cwiseAbs().maxCoeff());
  lu.setThreshold(zt / scale);
  out.det = out.matrix.determinant();
  out.unique_zero = lu.rank() == 4;
  if (!out.unique_zero) out.kernel = lu.kernel();
  return out;
}

std::map<std::string, double> scalar_coefficients(const ProfileScalars& s, int dim) {
  if (s.a == 0.0) throw DomainError("scalar coefficients: a = 0");
  const double A = s.A, B = s.B, Ap = s.Ap, Bp = s.Bp, a = s.a, ap = s.ap;
  const double a1 = s.a1, a2 = s.a2, b1 = s.b1, b2 = s.b2;
  const double a1p = s.a1p, a2p = s.a2p, b1p = s.b1p, b2p = s.b2p;
  const double n = dim;
  std::map<std::string, double> m;
  m["beta"] = 2 * A * (b1 * b1 - a1p * a1p - a1 * b1p) + (a1 * b2 - 2 * a2 * b1) * (3 * b2 + 2 * a2p) +
              2 * a2 * (2 * a1p * (b2 + a2p) + a2 * b1p);
  m["S1"] = a1 * (2 * a2 * a1p - a1 * (b2 + 2 * a2p));
  m["S2"] = -2 * (b2 * (-A * b1 + 3 * a2 * b2 + 5 * a1 * Ap - A * a1p - 4 * a2 * a2p) + 2 * b1 * (A * a2p - a2 * Ap) +
                  2 * (a1 * Ap + A * a1p - 2 * a2 * a2p) * a2p);
  m["S2_alt"] = -2 * (b2 * (-A * b1 + 3 * (a2 * b2 + a1 * Ap - A * a1p) + 2 * ap) + 2 * b1 * (A * a2p - a2 * Ap) +
                      2 * ap * a2p);
  m["S3"] = -3 * a1 * b2 * Ap - 2 * A * b2 * a1p + 2 * a2 * Ap * a1p + 4 * a2 * a2p * b2 - 2 * a1 * Ap * a2p + 4 * a * b2p;
  m["S3_alt"] = 2 * Ap * (a2 * a1p - a1 * a2p) - b2 * (2 * ap + a1 * Ap) + 4 * a * b2p;
  m["S4"] = b2 * (-2 * A * b1 + 6 * a2 * b2 + 7 * a1 * Ap - 4 * A * a1p - 4 * a2 * a2p) - 4 * a2 * b1 * Ap +
            2 * a2 * Ap * a1p + a2p * (4 * A * b1 + 2 * a1 * Ap + 4 * A * a1p - 8 * a2 * a2p) + 4 * a * b2p;
  m["Q1"] = -3 * a2 * (a1 * b2 - 2 * a2 * a1p + 2 * a1 * a2p) / a;
  m["Q4"] = 3 * (B * (a2 * b2 - 2 * A * a1p + 2 * a2 * a2p) + 2 * a * Bp) / a;
  m["Q2_theorem"] = a1 * b2 * (A * (b2 - 2 * a2p) - 2 * a2 * B) - 4 * a * B * (b1 - a1p);
  if (a1 != 0.0) {
    m["Q2"] = (a1 * b2 * (A * (b1 - a1p) - 2 * B * a2) - 4 * a * B * (b1 - a1p)) / (a * a1);
    m["Q3"] = 2 * (4 * a * B * (b1 - a1p) - a1 * (A * (b2 - 2 * a2p) + B * (a2 * b2 - 6 * A * a1p + 6 * a2 * a2p))) / (a * a1);
    m["psi"] = 2 * B * (B + Ap) - 3 * A * Bp + A * (B + n * Ap) * (2 * b1 + a1p) / a1;
  }
  return m;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::skipped: return "skipped";
    default: return "not applicable";
  }
}

// ---------------------------------------------------------------------------
// Registry

namespace {

struct Acc {
  double sum = 0.0, mx = 0.0;
  void operator()(double v) {
    sum += v;
    mx = std::max(mx, std::abs(v));
  }
};

struct Ctx {
  int n = 0;
  const ProfileScalars* s = nullptr;
  TensorValue g_, gi_, Xu_, Yu_, X_, Y_, DX_, DY_, DDX_, DDY_;
  TensorValue Ku_, K_, DK_, P_, DP_, S_, DS_, Eu_, E_, DE_, T_, DT_, F_, DF_, W_, DW_, G_, Z_;
  TensorValue R_, Ru_;

  double g(int i, int j) const { return g_(i, j); }
  double gi(int i, int j) const { return gi_(i, j); }
  double Xu(int a) const { return Xu_(a); }
  double Yu(int a) const { return Yu_(a); }
  double X(int a) const { return X_(a); }
  double Y(int a) const { return Y_(a); }
  double nX(int k, int l) const { return DX_(l, k); }  // nabla_k X_l
  double nY(int k, int l) const { return DY_(l, k); }
  double nnX(int k, int l, int p) const { return DDX_(p, l, k); }  // nabla_k nabla_l X_p
  double nnY(int k, int l, int p) const { return DDY_(p, l, k); }
  double LX(int k, int l) const { return nX(k, l) + nX(l, k); }
  double LY(int k, int l) const { return nY(k, l) + nY(l, k); }
  double Ku(int a, int p) const { return Ku_(a, p); }
  double K(int l, int p) const { return K_(l, p); }
  double nK(int k, int l, int p) const { return DK_(l, p, k); }
  double Kbar(int a, int b) const { return K(a, b) + K(b, a); }
  double Khat(int a, int b) const { return K(a, b) - K(b, a); }
  double nKbar(int k, int a, int b) const { return nK(k, a, b) + nK(k, b, a); }
  double P(int l, int k) const { return P_(l, k); }
  double nP(int k, int l, int m) const { return DP_(l, m, k); }
  double Pbar(int a, int b) const { return P(a, b) + P(b, a); }
  double S(int k, int p) const { return S_(k, p); }
  double nS(int k, int l, int p) const { return DS_(l, p, k); }
  double Sbar(int a, int b) const { return S(a, b) + S(b, a); }
  double nSbar(int k, int a, int b) const { return nS(k, a, b) + nS(k, b, a); }
  double Eu(int a, int p, int q) const { return Eu_(a, p, q); }
  double E(int k, int p, int q) const { return E_(k, p, q); }
  double nE(int k, int l, int p, int q) const { return DE_(l, p, q, k); }
  double T(int l, int k, int p) const { return T_(l, k, p); }
  double nT(int k, int l, int p, int q) const { return DT_(l, p, q, k); }
  double M(int p, int q, int r) const { return T(p, q, r) + T(q, r, p) + T(r, p, q); }
  double F(int l, int k, int p, int q) const { return F_(l, k, p, q); }
  double nF(int k, int l, int p, int q, int r) const { return DF_(l, p, q, r, k); }
  double W(int l, int k, int p, int q) const { return W_(l, k, p, q); }
  double nW(int k, int l, int p, int q, int r) const { return DW_(l, p, q, r, k); }
  double G(int l, int k, int p, int q, int r) const { return G_(l, k, p, q, r); }
  double Z(int l, int k, int p, int q, int r) const { return Z_(l, k, p, q, r); }
  double R(int a, int b, int c, int d) const { return R_(a, b, c, d); }
  double Ru(int a, int b, int c, int d) const { return Ru_(a, b, c, d); }  // R^a_{bcd}
  double trg(const TensorValue& t) const {
    double v = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) v += gi(a, b) * t(a, b);
    return v;
  }
  double trLX() const {
    double v = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) v += gi(a, b) * LX(a, b);
    return v;
  }
  double trLY() const {
    double v = 0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) v += gi(a, b) * LY(a, b);
    return v;
  }
  double trDX() const { return trLX() / 2.0; }
  double trDY() const { return trLY() / 2.0; }
  double trP() const { return trg(P_); }
  // (g_pk g_ql + g_qk g_pl) Y_r + cyclic in (p, q, r)
  double Y3(int k, int l, int p, int q, int r) const {
    return (g(p, k) * g(q, l) + g(q, k) * g(p, l)) * Y(r) + (g(q, k) * g(r, l) + g(r, k) * g(q, l)) * Y(p) +
           (g(r, k) * g(p, l) + g(p, k) * g(r, l)) * Y(q);
  }
  double gg(int u, int x, int y, int v) const {  // (g ∧ g)(U, X, Y, V)
    return 2.0 * (g(x, y) * g(u, v) - g(x, v) * g(u, y));
  }
};

Ctx make_ctx(const TaylorCoefficients& c, const ProfileScalars& s) {
  const LocalGeometry& geo = *c.geo;
  Ctx x;
  x.n = c.n;
  x.s = &s;
  x.g_ = values(geo.g());
  x.gi_ = values(geo.ginv());
  x.R_ = values(geo.riemann_low());
  x.Ru_ = values(geo.riemann());
  x.Xu_ = values(c.X);
  x.Yu_ = values(c.Y);
  x.X_ = values(c.Xl);
  x.Y_ = values(c.Yl);
  Tensor<Jet> dX = geo.nabla(c.Xl), dY = geo.nabla(c.Yl);
  x.DX_ = values(dX);
  x.DY_ = values(dY);
  x.DDX_ = values(geo.nabla(dX));
  x.DDY_ = values(geo.nabla(dY));
  x.Ku_ = values(c.K);
  x.K_ = values(c.Kl);
  x.DK_ = values(geo.nabla(c.Kl));
  x.P_ = values(c.Pl);
  x.DP_ = values(geo.nabla(c.Pl));
  x.S_ = values(c.Sl);
  x.DS_ = values(geo.nabla(c.Sl));
  x.Eu_ = values(c.E);
  x.E_ = values(c.El);
  x.DE_ = values(geo.nabla(c.El));
  x.T_ = values(c.Tl);
  x.DT_ = values(geo.nabla(c.Tl));
  x.F_ = values(c.Fl);
  x.W_ = values(c.Wl);
  if (c.order >= 3) {
    x.DF_ = values(geo.nabla(c.Fl));
    x.DW_ = values(geo.nabla(c.Wl));
  } else {
    x.DF_ = TensorValue(c.n, "lllll", 0.0);
    x.DW_ = TensorValue(c.n, "lllll", 0.0);
  }
  x.G_ = values(c.Gl);
  x.Z_ = values(c.Zl);
  return x;
}

using Idx = std::array<int, 5>;
using Body = std::function<void(const Ctx&, const Idx&, Acc&)>;
// Returns a reason when the identity's hypothesis fails.
using Gate = std::function<std::optional<std::string>(const ProfileScalars&, const CaseVerdict*, int dim, double zt)>;

struct Entry {
  IdentityInfo info;
  int free = 0;
  Gate gate;
  Body body;
  std::vector<std::string> parts;  // displayed groups: combined over the listed keys
};

bool nz(double v, double zt) { return std::abs(v) > zt; }

Gate no_gate() {
  return [](const ProfileScalars&, const CaseVerdict*, int, double) -> std::optional<std::string> { return std::nullopt; };
}
Gate need_a() {
  return [](const ProfileScalars& s, const CaseVerdict*, int, double zt) -> std::optional<std::string> {
    if (!nz(s.a, zt)) return "requires a != 0";
    return std::nullopt;
  };
}
Gate need_dim(int gt, bool a_nonzero = false) {
  return [gt, a_nonzero](const ProfileScalars& s, const CaseVerdict*, int dim, double zt) -> std::optional<std::string> {
    if (dim <= gt) return "requires dim > " + std::to_string(gt);
    if (a_nonzero && !nz(s.a, zt)) return "requires a != 0";
    return std::nullopt;
  };
}
Gate in_case(SplitCase which,
             std::function<std::optional<std::string>(const ProfileScalars&, double)> extra = nullptr) {
  return [which, extra](const ProfileScalars& s, const CaseVerdict* cv, int dim,
                        double zt) -> std::optional<std::string> {
    (void)dim;
    if (!cv) return "requires a != 0";
    if (cv->which != which) return "case " + to_string(which) + " identity; metric is in case " + to_string(cv->which);
    if (extra) return extra(s, zt);
    return std::nullopt;
  };
}

void scalar_terms(const std::string& id, const ProfileScalars& s, int dim, Acc& acc) {
  auto m = scalar_coefficients(s, dim);
  if (id == "S2-S3+S4") {
    acc(m["S2"]);
    acc(-m["S3"]);
    acc(m["S4"]);
  } else if (id == "S2-forms") {
    acc(m["S2"]);
    acc(-m["S2_alt"]);
  } else if (id == "S3-forms") {
    acc(m["S3"]);
    acc(-m["S3_alt"]);
  } else if (id == "P+Q") {
    acc(s.P);
    acc(s.Q);
    acc(-2.0 * s.a2p);
  } else {
    throw std::invalid_argument("unknown scalar identity '" + id + "'");
  }
}

std::vector<Entry> build_registry() {
  std::vector<Entry> r;
  auto add = [&r](std::string key, std::string family, std::string desc, int order, int free, Gate gate, Body body) {
    r.push_back({{std::move(key), std::move(family), std::move(desc), order}, free, std::move(gate), std::move(body)});
  };
  // Scalar helpers
  auto Y1 = [](const Ctx& c, double alpha, int k, Acc& a) { a(alpha * c.Y(k)); };

  // ---- zeroth order
  add("I1", "base", "hh block at u=0: A L_X g + a2 L_Y g", 1, 2, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1];
    a(s.A * c.LX(k, l));
    a(s.a2 * c.LY(k, l));
  });
  add("II1", "base", "vh block at u=0: A K_lk + a2(P_lk + L_Xg_kl) + a1 nabla_l Y_k", 1, 2, no_gate(),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int k = i[0], l = i[1];
        a(s.A * c.K(l, k));
        a(s.a2 * (c.P(l, k) + c.nX(k, l) + c.nX(l, k)));
        a(s.a1 * c.nY(l, k));
      });
  add("III1", "base", "vv block at u=0: a2 Kbar + a1 Sbar", 1, 2, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1];
    a(s.a2 * (c.K(l, k) + c.K(k, l)));
    a(s.a1 * (c.S(l, k) + c.S(k, l)));
  });

  // ---- first order
  add("I2", "base", "first u-derivative of the hh block", 2, 3, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2];
    a(s.A * (c.nK(k, l, p) + c.nK(l, k, p)));
    double xr = 0;
    for (int q = 0; q < c.n; ++q) xr += c.Xu(q) * (c.R(q, k, l, p) + c.R(q, l, k, p));
    a(s.a2 * (c.nS(k, l, p) + c.nS(l, k, p) - xr));
    a(2 * s.Ap * c.g(k, l) * c.Y(p));
    a(s.B * (c.Y(k) * c.g(l, p) + c.Y(l) * c.g(k, p)));
  });
  add("II2", "base", "first u-derivative of the vh block", 2, 3, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2];
    a(s.A * c.E(l, k, p));
    double xr = 0;
    for (int q = 0; q < c.n; ++q) xr += c.Xu(q) * c.R(q, l, k, p);
    a(s.a1 * (c.nS(l, k, p) - xr));
    a(s.a2 * (c.nK(l, k, p) + c.T(l, k, p)));
    a(2 * s.a2p * c.g(k, l) * c.Y(p));
    a(s.b2 * (c.Y(k) * c.g(l, p) + c.Y(l) * c.g(k, p)));
  });
  add("III2", "base", "first u-derivative of the vv block", 2, 3, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2];
    a(s.a1 * (c.T(l, k, p) + c.T(k, l, p)));
    a(s.a2 * (c.E(l, k, p) + c.E(k, l, p)));
    a(s.b1 * (c.Y(k) * c.g(l, p) + c.Y(l) * c.g(k, p)));
    a(2 * s.a1p * c.g(k, l) * c.Y(p));
  });

  // ---- second order
  add("I3", "base", "second u-derivative of the hh block", 2, 4, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2], q = i[3];
    a(s.A * (c.nE(k, l, p, q) + c.nE(l, k, p, q)));
    a(s.a2 * (c.nT(k, l, p, q) + c.nT(l, k, p, q)));
    a(2 * s.Ap * c.g(k, l) * c.Sbar(p, q));
    a(s.B * ((c.nX(k, p) + c.S(k, p)) * c.g(q, l) + (c.nX(k, q) + c.S(k, q)) * c.g(p, l) +
             (c.nX(l, p) + c.S(l, p)) * c.g(q, k) + (c.nX(l, q) + c.S(l, q)) * c.g(p, k)));
    a(s.b2 * (c.nY(k, p) * c.g(q, l) + c.nY(k, q) * c.g(p, l) + c.nY(l, p) * c.g(q, k) + c.nY(l, q) * c.g(p, k)));
    double kr = 0;
    for (int e = 0; e < c.n; ++e)
      kr += c.Ku(e, p) * (c.R(e, l, k, q) + c.R(e, k, l, q)) + c.Ku(e, q) * (c.R(e, l, k, p) + c.R(e, k, l, p));
    a(-s.a2 * kr);
  });
  auto ii3 = [](bool swapped) {
    return [swapped](const Ctx& c, const Idx& i, Acc& a) {
      const auto& s = *c.s;
      int k = i[0], l = i[1], p = i[2], q = i[3];
      a(s.A * c.F(l, k, p, q));
      a(s.a2 * c.W(l, k, p, q));
      a(s.a1 * c.nT(l, k, p, q));
      a(s.a2 * c.nE(l, k, p, q));
      a(2 * s.a2p * c.g(k, l) * c.Sbar(p, q));
      double kr = 0;
      for (int e = 0; e < c.n; ++e) kr += c.Ku(e, p) * c.R(e, l, k, q) + c.Ku(e, q) * c.R(e, l, k, p);
      a(-s.a1 * kr);
      const double cK = swapped ? s.b2 : s.B, cS = swapped ? s.B : s.b2;
      a(cK * (c.K(p, k) * c.g(q, l) + c.K(q, k) * c.g(p, l)));
      a(cS * (c.Sbar(p, k) * c.g(q, l) + c.Sbar(q, k) * c.g(p, l) + c.S(l, p) * c.g(q, k) + c.S(l, q) * c.g(p, k) +
              c.nX(l, p) * c.g(k, q) + c.nX(l, q) * c.g(k, p)));
      a(s.b1 * (c.nY(l, p) * c.g(k, q) + c.nY(l, q) * c.g(k, p)));
    };
  };
  add("II3", "base", "second u-derivative of the vh block", 3, 4, no_gate(), ii3(false));
  add("III3", "base", "second u-derivative of the vv block", 3, 4, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2], q = i[3];
    a(s.a2 * (c.F(l, k, p, q) + c.F(k, l, p, q)));
    a(s.a1 * (c.W(l, k, p, q) + c.W(k, l, p, q)));
    a(2 * s.a1p * c.g(k, l) * c.Sbar(p, q));
    a(s.b1 * (c.Sbar(k, p) * c.g(q, l) + c.Sbar(k, q) * c.g(p, l) + c.Sbar(l, p) * c.g(q, k) + c.Sbar(l, q) * c.g(p, k)));
    a(s.b2 * (c.K(p, k) * c.g(q, l) + c.K(q, k) * c.g(p, l) + c.K(p, l) * c.g(q, k) + c.K(q, l) * c.g(p, k)));
  });

  // ---- third order
  add("I4", "base", "third u-derivative of the hh block", 3, 5, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2], q = i[3], r = i[4];
    a(s.A * (c.nF(k, l, p, q, r) + c.nF(l, k, p, q, r)));
    a(s.a2 * (c.nW(k, l, p, q, r) + c.nW(l, k, p, q, r)));
    double er = 0;
    for (int e = 0; e < c.n; ++e)
      er += c.Eu(e, p, q) * (c.R(e, l, k, r) + c.R(e, k, l, r)) + c.Eu(e, q, r) * (c.R(e, l, k, p) + c.R(e, k, l, p)) +
            c.Eu(e, r, p) * (c.R(e, l, k, q) + c.R(e, k, l, q));
    a(-s.a2 * er);
    a(s.B * (c.nKbar(k, q, p) * c.g(l, r) + c.nKbar(k, r, q) * c.g(l, p) + c.nKbar(k, p, r) * c.g(l, q) +
             c.nKbar(l, q, p) * c.g(k, r) + c.nKbar(l, r, q) * c.g(k, p) + c.nKbar(l, p, r) * c.g(k, q)));
    a(s.b2 * (c.nSbar(k, q, p) * c.g(l, r) + c.nSbar(k, r, q) * c.g(l, p) + c.nSbar(k, p, r) * c.g(l, q) +
              c.nSbar(l, q, p) * c.g(k, r) + c.nSbar(l, r, q) * c.g(k, p) + c.nSbar(l, p, r) * c.g(k, q)));
    a(s.B * (c.g(l, p) * c.T(k, q, r) + c.g(l, q) * c.T(k, r, p) + c.g(l, r) * c.T(k, p, q) + c.g(k, p) * c.T(l, q, r) +
             c.g(k, q) * c.T(l, r, p) + c.g(k, r) * c.T(l, p, q)));
    a(2 * s.Bp * c.Y3(k, l, p, q, r));
    a(2 * s.Ap * c.g(k, l) * c.M(p, q, r));
  });
  add("II4", "base", "third u-derivative of the vh block", 4, 5, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2], q = i[3], r = i[4];
    a(s.A * c.G(l, k, p, q, r));
    a(s.a2 * c.Z(l, k, p, q, r));
    a(s.a2 * c.nF(l, k, p, q, r));
    a(s.a1 * c.nW(l, k, p, q, r));
    double er = 0;
    for (int e = 0; e < c.n; ++e)
      er += c.Eu(e, p, q) * c.R(e, l, k, r) + c.Eu(e, q, r) * c.R(e, l, k, p) + c.Eu(e, r, p) * c.R(e, l, k, q);
    a(-s.a1 * er);
    a(s.b2 * (c.nKbar(l, q, p) * c.g(k, r) + c.nKbar(l, r, q) * c.g(k, p) + c.nKbar(l, p, r) * c.g(k, q)));
    a(s.B * (c.g(l, r) * (c.E(q, k, p) + c.E(p, k, q)) + c.g(l, p) * (c.E(r, k, q) + c.E(q, k, r)) +
             c.g(l, q) * (c.E(p, k, r) + c.E(r, k, p))));
    a(s.b1 * (c.nSbar(l, q, p) * c.g(k, r) + c.nSbar(l, r, q) * c.g(k, p) + c.nSbar(l, p, r) * c.g(k, q)));
    a(s.b2 * (c.g(k, p) * c.T(l, q, r) + c.g(k, q) * c.T(l, r, p) + c.g(k, r) * c.T(l, p, q)));
    a(s.b2 * (c.g(l, p) * c.M(k, q, r) + c.g(l, q) * c.M(k, r, p) + c.g(l, r) * c.M(k, p, q)));
    a(2 * s.b2p * c.Y3(k, l, p, q, r));
    a(2 * s.a2p * c.g(k, l) * c.M(p, q, r));
  });
  add("III4", "base", "third u-derivative of the vv block", 4, 5, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2], q = i[3], r = i[4];
    a(s.a2 * (c.G(l, k, p, q, r) + c.G(k, l, p, q, r)));
    a(s.a1 * (c.Z(l, k, p, q, r) + c.Z(k, l, p, q, r)));
    a(s.b2 * (c.g(l, r) * (c.E(q, k, p) + c.E(p, k, q)) + c.g(l, p) * (c.E(r, k, q) + c.E(q, k, r)) +
              c.g(l, q) * (c.E(p, k, r) + c.E(r, k, p))));
    a(s.b2 * (c.g(k, r) * (c.E(q, l, p) + c.E(p, l, q)) + c.g(k, p) * (c.E(r, l, q) + c.E(q, l, r)) +
              c.g(k, q) * (c.E(p, l, r) + c.E(r, l, p))));
    a(s.b1 * (c.g(k, p) * c.M(l, q, r) + c.g(k, q) * c.M(l, r, p) + c.g(k, r) * c.M(l, p, q)));
    a(s.b1 * (c.g(l, p) * c.M(k, q, r) + c.g(l, q) * c.M(k, r, p) + c.g(l, r) * c.M(k, p, q)));
    a(2 * s.b1p * c.Y3(k, l, p, q, r));
    a(2 * s.a1p * c.g(k, l) * c.M(p, q, r));
  });

  // ---- lemma family built on the base identities
  add("L5", "lemma", "a1 T_lkp + a2 E_lkp against a1', b1 times Y", 2, 3, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], p = i[2];
    a(s.a1 * c.T(l, k, p));
    a(s.a2 * c.E(l, k, p));
    a(-s.a1p * (c.Y(l) * c.g(k, p) - c.Y(k) * c.g(l, p) - c.Y(p) * c.g(k, l)));
    a(s.b1 * c.Y(l) * c.g(k, p));
  });
  add("L5a", "lemma", "A E_lkp + a2 T_lkp against a2', b2 times Y", 2, 3, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], p = i[2];
    a(s.A * c.E(l, k, p));
    a(s.a2 * c.T(l, k, p));
    a(s.a2p * (c.g(k, l) * c.Y(p) + c.g(p, l) * c.Y(k)));
    a(0.5 * s.b2 * (2 * c.g(k, p) * c.Y(l) + c.g(l, p) * c.Y(k) + c.g(k, l) * c.Y(p)));
  });
  add("L5a1", "lemma", "E solved in terms of Y", 2, 3, need_a(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2];
    a(s.a * c.E(l, k, m));
    a(-(s.a2 * s.b1 - s.a1 * s.b2 - s.a2 * s.a1p) * c.g(k, m) * c.Y(l));
    a(0.5 * (s.a1 * s.b2 - 2 * s.a2 * s.a1p + 2 * s.a1 * s.a2p) * (c.g(l, m) * c.Y(k) + c.g(l, k) * c.Y(m)));
  });
  add("L5a2", "lemma", "T solved in terms of Y", 2, 3, need_a(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2];
    a(s.a * c.T(l, k, m));
    a(-(s.A * s.a1p + s.a2 * s.b2 - s.A * s.b1) * c.g(k, m) * c.Y(l));
    a(-0.5 * (s.a2 * s.b2 - 2 * s.A * s.a1p + 2 * s.a2 * s.a2p) * (c.g(l, m) * c.Y(k) + c.g(l, k) * c.Y(m)));
  });
  add("L5a2p", "lemma", "cyclic sum M solved in terms of Y", 2, 3, need_a(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2];
    a(s.a * c.M(l, k, m));
    a(-(2 * s.a2 * (s.b2 + s.a2p) - s.A * (s.b1 + s.a1p)) *
      (c.g(k, m) * c.Y(l) + c.g(l, k) * c.Y(m) + c.g(m, l) * c.Y(k)));
  });
  add("L5b", "lemma", "second covariant derivatives of X and Y against A', B times Y", 1, 3, no_gate(),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int k = i[0], l = i[1], p = i[2];
        a(s.a2 * (c.nnX(k, l, p) + c.nnX(k, p, l) + c.nnX(l, k, p) + c.nnX(l, p, k) - c.nnX(p, l, k) - c.nnX(p, k, l)));
        a(s.a1 * (c.nnY(k, l, p) + c.nnY(l, k, p)));
        a(-2 * s.Ap * c.g(k, l) * c.Y(p));
        a(-s.B * (c.Y(k) * c.g(l, p) + c.Y(l) * c.g(k, p)));
      });
  add("L5c", "lemma", "symmetrized nabla K against Y", 1, 3, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], p = i[2];
    a(s.a * (c.nK(k, l, p) + c.nK(l, k, p)));
    a((s.a2 * s.b2 + 2 * s.a1 * s.Ap - 2 * s.a2 * s.a2p) * c.Y(p) * c.g(k, l));
    a(0.5 * (-s.a2 * s.b2 + 2 * s.a1 * s.B + 2 * s.a2 * s.a2p) * (c.Y(k) * c.g(l, p) + c.Y(l) * c.g(k, p)));
  });
  add("L6a", "lemma", "nabla K against curvature and Y", 1, 3, need_a(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2];
    a(2 * s.a * c.nK(l, k, m));
    double yr = 0;
    for (int r = 0; r < c.n; ++r) yr += c.Yu(r) * c.R(r, m, k, l);
    a(-s.a1 * s.a1 * yr);
    a(s.a1 * s.B * c.g(k, m) * c.Y(l));
    a(-(-s.a1 * s.B + s.a2 * s.b2 - 2 * s.a2 * s.a2p) * c.g(l, m) * c.Y(k));
    a(-(-s.a2 * s.b2 - 2 * s.a1 * s.Ap + 2 * s.a2 * s.a2p) * c.g(k, l) * c.Y(m));
  });
  add("L6b", "lemma", "nabla S - X.R against curvature and Y", 1, 3, need_a(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2];
    double xr = 0, yr = 0;
    for (int r = 0; r < c.n; ++r) {
      xr += c.Xu(r) * c.R(r, l, k, m);
      yr += c.Yu(r) * c.R(r, m, k, l);
    }
    a(2 * s.a * (c.nS(l, k, m) - xr));
    a(s.a1 * s.a2 * yr);
    a(-s.a2 * s.B * c.g(k, m) * c.Y(l));
    a((-s.a2 * s.B + s.A * (s.b2 - 2 * s.a2p)) * c.g(l, m) * c.Y(k));
    a((-2 * s.a2 * s.Ap - s.A * (s.b2 - 2 * s.a2p)) * c.g(k, l) * c.Y(m));
  });
  add("LE5-1", "lemma", "2(b1 - a1') Sbar + b2 Kbar", 1, 2, need_dim(2), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1];
    a(2 * (s.b1 - s.a1p) * c.Sbar(k, l));
    a(s.b2 * c.Kbar(k, l));
  });
  add("LE5-2", "lemma", "a2 F + a1 W against K and S", 3, 4, need_dim(2), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], A = i[1], b = i[2], k = i[3];
    a(s.a2 * c.F(l, A, b, k));
    a(s.a1 * c.W(l, A, b, k));
    a(0.5 * s.b2 * (c.Khat(k, l) * c.g(A, b) + c.Khat(b, l) * c.g(A, k) + c.Khat(A, l) * c.g(b, k) + c.Kbar(A, k) * c.g(b, l)));
    a(s.b1 * c.g(b, l) * c.Sbar(A, k));
    a(s.a1p * (c.g(k, l) * c.Sbar(A, b) + c.g(A, l) * c.Sbar(b, k)));
  });
  add("beta", "lemma", "(n-1) beta Y", 1, 1,
      [](const ProfileScalars& s, const CaseVerdict*, int dim, double zt) -> std::optional<std::string> {
        if (dim <= 1) return "requires dim > 1";
        if (!nz(s.a, zt)) return "requires a != 0";
        return std::nullopt;
      },
      [Y1](const Ctx& c, const Idx& i, Acc& a) {
        Y1(c, (c.n - 1) * scalar_coefficients(*c.s, c.n).at("beta"), i[0], a);
      });
  add("LE6-1", "lemma", "3A F + 3a2 W against K, Y, X and S", 3, 4, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2], n = i[3];
    a(3 * s.A * c.F(l, k, m, n));
    a(3 * s.a2 * c.W(l, k, m, n));
    a(s.B * (c.g(k, l) * c.Kbar(m, n) + c.g(l, m) * c.Kbar(k, n) + c.g(l, n) * c.Kbar(k, m)));
    a((s.b1 - s.a1p) * (c.nY(l, n) * c.g(k, m) + c.nY(l, m) * c.g(k, n) + c.nY(l, k) * c.g(m, n)));
    a(2 * (s.b2 + s.a2p) * (c.g(k, l) * c.Sbar(m, n) + c.g(l, m) * c.Sbar(k, n) + c.g(l, n) * c.Sbar(k, m)));
    a(2 * s.b2 *
      (c.g(k, m) * (c.nX(l, n) + c.S(l, n)) + c.g(k, n) * (c.nX(l, m) + c.S(l, m)) + c.g(m, n) * (c.nX(l, k) + c.S(l, k))));
  });
  add("LE6p-1", "lemma", "curvature contracted with E against the auxiliary K, L tensors", 2, 5, no_gate(),
      [](const Ctx& c, const Idx& i, Acc& acc) {
        const auto& s = *c.s;
        int k = i[0], l = i[1], a = i[2], b = i[3], cc = i[4];
        // R^p_{lak} contracted with E^p_{bc} is read as E^q_{bc} R_{qlak}.
        auto er = [&](int x, int y, int z) {
          double v = 0;
          for (int p = 0; p < c.n; ++p) v += c.Eu(p, x, y) * (c.R(p, k, z, l) + c.R(p, l, z, k));
          return v;
        };
        auto Kt = [&](int kk, int aa, int ll) {
          return -2 * s.b2 * (c.nS(ll, kk, aa) + c.nS(kk, ll, aa) + c.nnX(ll, kk, aa) + c.nnX(kk, ll, aa)) -
                 (s.b1 - s.a1p) * (c.nnY(ll, kk, aa) + c.nnY(kk, ll, aa));
        };
        auto Lt = [&](int aa, int bb, int kk) {
          return 2 * s.B * c.nKbar(kk, aa, bb) + 3 * s.B * c.T(kk, aa, bb) + (s.b2 - 2 * s.a2p) * c.nSbar(kk, aa, bb) +
                 3 * s.Bp * (c.g(kk, aa) * c.Y(bb) + c.g(kk, bb) * c.Y(aa));
        };
        acc(3 * s.a2 * (er(b, cc, a) + er(a, cc, b) + er(a, b, cc)));
        acc(6 * s.Ap * c.g(k, l) * (c.T(a, b, cc) + c.T(b, cc, a) + c.T(cc, a, b)));
        acc(c.g(b, cc) * Kt(k, a, l) + c.g(cc, a) * Kt(k, b, l) + c.g(a, b) * Kt(k, cc, l));
        acc(c.g(cc, l) * Lt(a, b, k) + c.g(a, l) * Lt(b, cc, k) + c.g(b, l) * Lt(cc, a, k) + c.g(cc, k) * Lt(a, b, l) +
            c.g(a, k) * Lt(b, cc, l) + c.g(b, k) * Lt(cc, a, l));
      });
  add("LE6pp", "lemma", "curvature contracted with E against nabla Sbar, nabla K, M, T and Y", 2, 5, need_dim(2),
      [](const Ctx& c, const Idx& i, Acc& acc) {
        const auto& s = *c.s;
        int a = i[0], b = i[1], cc = i[2], k = i[3], l = i[4];
        double er = 0;
        for (int p = 0; p < c.n; ++p)
          er += 2 * c.Eu(p, a, b) * c.R(p, l, cc, k) - c.Eu(p, b, k) * c.R(p, l, a, cc) + c.Eu(p, b, cc) * c.R(p, l, a, k) -
                c.Eu(p, a, k) * c.R(p, l, b, cc) + c.Eu(p, a, cc) * c.R(p, l, b, k);
        acc(s.a1 * er);
        acc(s.B * ((c.E(cc, k, b) - c.E(k, cc, b)) * c.g(a, l) + (c.E(cc, a, k) - c.E(k, a, cc)) * c.g(b, l) +
                   (c.E(a, b, k) + c.E(b, a, k)) * c.g(cc, l) - (c.E(a, b, cc) + c.E(b, a, cc)) * c.g(k, l)));
        acc((s.b1 - s.a1p) * (c.nSbar(l, b, cc) * c.g(a, k) - c.nSbar(l, b, k) * c.g(a, cc)));
        acc(s.b2 * ((c.nK(l, k, cc) - c.nK(l, cc, k)) * c.g(a, b) +
                    c.g(a, k) * (1.5 * c.nK(l, b, cc) + 0.5 * c.nK(l, cc, b)) -
                    c.g(a, cc) * (1.5 * c.nK(l, b, k) + 0.5 * c.nK(l, k, b))));
        acc(s.b2 * (c.nK(l, a, cc) * c.g(b, k) - c.nK(l, a, k) * c.g(b, cc)));
        acc((s.b2 - 2 * s.a2p) * (c.M(a, b, k) * c.g(cc, l) - c.M(a, b, cc) * c.g(k, l)));
        acc(s.b2 * (c.g(b, k) * c.T(l, a, cc) - c.g(b, cc) * c.T(l, a, k) + c.g(a, k) * c.T(l, b, cc) -
                    c.g(a, cc) * c.T(l, b, k)));
        acc(2 * s.b2p * ((c.g(b, k) * c.g(cc, l) - c.g(b, cc) * c.g(k, l)) * c.Y(a) +
                         (c.g(a, k) * c.g(cc, l) - c.g(a, cc) * c.g(k, l)) * c.Y(b) +
                         (c.g(a, l) * c.g(b, k) + c.g(a, k) * c.g(b, l)) * c.Y(cc) -
                         (c.g(a, l) * c.g(b, cc) + c.g(a, cc) * c.g(b, l)) * c.Y(k)));
      });
  add("LE8a", "lemma", "bold A_km: nabla X, nabla Y, K and S", 1, 2, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], m = i[1];
    a((3 * s.a1 * s.B - s.a2 * s.b2) * c.nX(k, m));
    a((-2 * s.a2 * s.b1 + 1.5 * s.a1 * s.b2 + 2 * s.a2 * s.a1p - 3 * s.a1 * s.a2p) * c.nY(k, m));
    a(s.a2 * s.B * (c.K(k, m) - 2 * c.K(m, k)));
    a((3 * s.a1 * s.B - 2 * s.a2 * s.b2 + 2 * s.a2 * s.a2p) * c.S(k, m));
    a((-s.a2 * s.b2 + 2 * s.a2 * s.a2p) * c.S(m, k));
  });
  add("F+B", "lemma", "bold F + bold B: L_X g, L_Y g, Sbar and Kbar", 1, 2, no_gate(), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1];
    a(2 * s.a2 * s.b2 * c.LX(k, l));
    a((4 * s.a2 * s.b1 - 3 * s.a1 * s.b2 - 4 * s.a2 * s.a1p) * c.LY(k, l));
    a(2 * (3 * s.a2 * s.b2 + 3 * s.a1 * s.Ap - 4 * s.a2 * s.a2p) * c.Sbar(k, l));
    a(2 * s.a2 * s.B * c.Kbar(k, l));
  });

  // ---- pure algebraic identities
  for (const char* id : {"S2-S3+S4", "S2-forms", "S3-forms", "P+Q"}) {
    std::string key = id;
    add(key, "scalar", "algebraic identity in the weights: " + key, 0, 0, need_a(),
        [key](const Ctx& c, const Idx&, Acc& a) { scalar_terms(key, *c.s, c.n, a); });
  }

  // ---- splitting theorem
  using SC = SplitCase;
  auto tensor2 = [&](std::string key, SC cs, std::string desc, std::function<void(const Ctx&, int, int, Acc&)> f) {
    add(std::move(key), "case" + to_string(cs), std::move(desc), 1, 2, in_case(cs),
        [f](const Ctx& c, const Idx& i, Acc& a) { f(c, i[0], i[1], a); });
  };
  tensor2("split-14a", SC::case1, "L_X g", [](const Ctx& c, int k, int l, Acc& a) { a(c.LX(k, l)); });
  tensor2("split-14b", SC::case1, "L_Y g", [](const Ctx& c, int k, int l, Acc& a) { a(c.LY(k, l)); });
  tensor2("split-15a", SC::case1, "Pbar", [](const Ctx& c, int k, int l, Acc& a) { a(c.Pbar(k, l)); });
  tensor2("split-15b", SC::case1, "Kbar", [](const Ctx& c, int k, int l, Acc& a) { a(c.Kbar(k, l)); });
  for (auto [cs, k16, k17] : {std::tuple{SC::case2, "split-16", "split-17"}, std::tuple{SC::case3, "split-19", "split-20"}}) {
    tensor2(k16, cs, "Pbar + 2 L_X g", [](const Ctx& c, int k, int l, Acc& a) {
      a(c.Pbar(k, l));
      a(2 * c.LX(k, l));
    });
    tensor2(k17, cs, "a2 L_Y g + A L_X g", [](const Ctx& c, int k, int l, Acc& a) {
      a(c.s->a2 * c.LY(k, l));
      a(c.s->A * c.LX(k, l));
    });
  }
  tensor2("split-18", SC::case2, "a2 Kbar - a1 L_X g", [](const Ctx& c, int k, int l, Acc& a) {
    a(c.s->a2 * c.Kbar(k, l));
    a(-c.s->a1 * c.LX(k, l));
  });
  tensor2("split-21", SC::case3, "Kbar", [](const Ctx& c, int k, int l, Acc& a) { a(c.Kbar(k, l)); });
  tensor2("split-22a", SC::case4, "L_X g", [](const Ctx& c, int k, int l, Acc& a) { a(c.LX(k, l)); });
  tensor2("split-22b", SC::case4, "Pbar", [](const Ctx& c, int k, int l, Acc& a) { a(c.Pbar(k, l)); });
  tensor2("split-22c", SC::case4, "A K_lk + a1 nabla_l Y_k", [](const Ctx& c, int k, int l, Acc& a) {
    a(c.s->A * c.K(l, k));
    a(c.s->a1 * c.nY(l, k));
  });

  // ---- case 1
  auto scalarY = [&](std::string key, SC cs, std::string desc,
                     std::function<std::optional<std::string>(const ProfileScalars&, double)> extra,
                     std::function<double(const ProfileScalars&, int)> alpha) {
    add(std::move(key), "case" + to_string(cs), std::move(desc), 1, 1, in_case(cs, std::move(extra)),
        [alpha](const Ctx& c, const Idx& i, Acc& a) { a(alpha(*c.s, c.n) * c.Y(i[0])); });
  };
  scalarY("LEC1a1", SC::case1, "(B + A') Y", nullptr, [](const ProfileScalars& s, int) { return s.B + s.Ap; });
  add("LEC1a2", "case1", "2a nabla_l K_km against Y", 1, 3, in_case(SC::case1), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2];
    a(2 * s.a * c.nK(l, k, m));
    a(-(2 * s.a1 * s.Ap + s.a2 * (s.b2 - 2 * s.a2p)) * (c.g(l, m) * c.Y(k) - c.g(l, k) * c.Y(m)));
  });
  add("LEC1a3", "case1", "2a nabla_l P_km against Y", 1, 3, in_case(SC::case1), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], m = i[2];
    a(2 * s.a * c.nP(l, k, m));
    a((2 * s.a2 * s.Ap + s.A * (s.b2 - 2 * s.a2p)) * (c.g(l, m) * c.Y(k) - c.g(l, k) * c.Y(m)));
  });
  add("LEC1a4", "case1", "a1 nabla nabla Y against A' Y", 1, 3, in_case(SC::case1), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int m = i[0], l = i[1], k = i[2];
    a(s.a1 * c.nnY(m, l, k));
    a(-s.Ap * (c.g(m, l) * c.Y(k) - c.g(m, k) * c.Y(l)));
  });
  add("LAC1a5", "case1", "a1 Y.R against A' Y", 1, 3, in_case(SC::case1), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int k = i[0], l = i[1], m = i[2];
    double yr = 0;
    for (int r = 0; r < c.n; ++r) yr += c.Yu(r) * c.R(r, k, l, m);
    a(s.a1 * yr);
    a(-s.Ap * (c.g(k, m) * c.Y(l) - c.g(k, l) * c.Y(m)));
  });
  add("LEC1c", "case1", "S1 Y [a1 R + (B/2) g∧g]", 1, 5, in_case(SC::case1), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    const double S1 = s.a1 * (2 * s.a2 * s.a1p - s.a1 * (s.b2 + 2 * s.a2p));
    int e = i[0], p = i[1], q = i[2], r = i[3], t = i[4];
    a(S1 * c.Y(e) * s.a1 * c.R(p, q, r, t));
    a(S1 * c.Y(e) * 0.5 * s.B * c.gg(p, q, r, t));
  });
  add("LEC1b1", "case1", "bold A_km with a1 a2 != 0", 1, 2,
      in_case(SC::case1, [](const ProfileScalars& s, double zt) -> std::optional<std::string> {
        if (!nz(s.a1 * s.a2, zt)) return "requires a1 a2 != 0";
        return std::nullopt;
      }),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int k = i[0], m = i[1];
        a((2 * s.a2 * (s.b1 - s.a1p) - 1.5 * s.a1 * (s.b2 - 2 * s.a2p)) * c.nY(m, k));
        a((3 * s.a1 * s.B - s.a2 * s.b2) * c.P(k, m));
        a(3 * s.a2 * s.B * c.K(k, m));
      });
  add("LEC1b2", "case1", "bold A_km with a2 = 0, a1 b2 != 0", 1, 2,
      in_case(SC::case1, [](const ProfileScalars& s, double zt) -> std::optional<std::string> {
        if (nz(s.a2, zt) || !nz(s.a1 * s.b2, zt)) return "requires a2 = 0 and a1 b2 != 0";
        return std::nullopt;
      }),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int k = i[0], m = i[1];
        a(-0.5 * s.a1 * (s.b2 - 2 * s.a2p) * c.nY(m, k));
        a(s.a1 * s.B * c.P(k, m));
      });
  auto a1zero = [](const ProfileScalars& s, double zt) -> std::optional<std::string> {
    if (nz(s.a1, zt) || !nz((s.b1 - s.a1p) * s.a2, zt)) return "requires a1 = 0 and (b1 - a1') a2 != 0";
    return std::nullopt;
  };
  add("LEC1b3", "case1", "(n+1) B K - b2 P + 2(b1 - a1') nabla Y", 1, 2, in_case(SC::case1, a1zero),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int k = i[0], m = i[1];
        a((c.n + 1) * s.B * c.K(k, m));
        a(-s.b2 * c.P(k, m));
        a(2 * (s.b1 - s.a1p) * c.nY(m, k));
      });
  add("LEC1b4", "case1", "3 B K - (n-1) b2 P + 2(n-1)(b1 - a1') nabla Y", 1, 2, in_case(SC::case1, a1zero),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int l = i[0], m = i[1];
        a(3 * s.B * c.K(l, m));
        a(-(c.n - 1) * s.b2 * c.P(l, m));
        a(2 * (c.n - 1) * (s.b1 - s.a1p) * c.nY(m, l));
      });
  auto a1nz = [](const ProfileScalars& s, double zt) -> std::optional<std::string> {
    if (!nz(s.a1, zt)) return "requires a1 != 0";
    return std::nullopt;
  };
  scalarY("Th7C1-1", SC::case1, "Q2 Y with Q2 as stated in the theorem", a1nz,
          [](const ProfileScalars& s, int n) { return scalar_coefficients(s, n).at("Q2_theorem"); });
  scalarY("Th7C1-2", SC::case1, "B' Y", a1nz, [](const ProfileScalars& s, int) { return s.Bp; });
  scalarY("Th7C1-3", SC::case1, "B [a1 a2 (b2 + 2a2') - 2A a1 a1' + a a1'] Y", a1nz, [](const ProfileScalars& s, int) {
    return s.B * (s.a1 * s.a2 * (s.b2 + 2 * s.a2p) - 2 * s.A * s.a1 * s.a1p + s.a * s.a1p);
  });

  // ---- case 2
  tensor2("case2-1", SC::case2, "trace-free part of L_X g times a1 B - 2a2 b2 - 3a1 A' + 4a2 a2'",
          [](const Ctx& c, int k, int l, Acc& a) {
            const auto& s = *c.s;
            const double f = s.a1 * s.B - 2 * s.a2 * s.b2 - 3 * s.a1 * s.Ap + 4 * s.a2 * s.a2p;
            a(f * c.LX(k, l));
            a(-f * c.trLX() / c.n * c.g(k, l));
          });
  tensor2("case2-2", SC::case2, "trace-free part of L_Y g times a2(b1 - a1')", [](const Ctx& c, int k, int l, Acc& a) {
    const auto& s = *c.s;
    const double f = s.a2 * (s.b1 - s.a1p);
    a(f * c.LY(k, l));
    a(-f * c.trLY() / c.n * c.g(k, l));
  });
  tensor2("case2-3", SC::case2, "a1 [a2' L_Y g + A' L_X g]", [](const Ctx& c, int k, int l, Acc& a) {
    const auto& s = *c.s;
    a(s.a1 * s.a2p * c.LY(k, l));
    a(s.a1 * s.Ap * c.LX(k, l));
  });
  tensor2("case2-4", SC::case2, "[a1(B - 3A') + A(b1 - a1') - 2a2(b2 - 2a2')] L_X g", [](const Ctx& c, int k, int l, Acc& a) {
    const auto& s = *c.s;
    a((s.a1 * (s.B - 3 * s.Ap) + s.A * (s.b1 - s.a1p) - 2 * s.a2 * (s.b2 - 2 * s.a2p)) * c.LX(k, l));
  });

  // ---- case 3
  tensor2("case3-1-1a", SC::case3, "(b2 - 2a2') L_X g", [](const Ctx& c, int k, int l, Acc& a) {
    a((c.s->b2 - 2 * c.s->a2p) * c.LX(k, l));
  });
  add("case3-1-1b", "case3", "(b2 - 2a2') tr nabla X", 1, 0, in_case(SC::case3), [](const Ctx& c, const Idx&, Acc& a) {
    a((c.s->b2 - 2 * c.s->a2p) * c.trDX());
  });
  add("case3-1-1c", "case3", "(b2 - 2a2') tr P", 1, 0, in_case(SC::case3), [](const Ctx& c, const Idx&, Acc& a) {
    a((c.s->b2 - 2 * c.s->a2p) * c.trP());
  });
  tensor2("case3-1-2a", SC::case3, "B K", [](const Ctx& c, int k, int l, Acc& a) { a(c.s->B * c.K(k, l)); });
  tensor2("case3-1-2b", SC::case3, "L_X g + P", [](const Ctx& c, int k, int l, Acc& a) {
    a(c.LX(k, l));
    a(c.P(k, l));
  });
  tensor2("case3-1-3", SC::case3, "P skew part", [](const Ctx& c, int k, int l, Acc& a) {
    a(c.P(k, l));
    a(-c.P(l, k));
  });
  tensor2("case3-1-4", SC::case3, "a3 K", [](const Ctx& c, int k, int l, Acc& a) { a(c.s->a3 * c.K(k, l)); });
  scalarY("case3-4-1", SC::case3, "[(b2 - 2a2')(2A b1 - 3a2 b2 - 2a2 a2') - 2a2 B b1] Y", nullptr,
          [](const ProfileScalars& s, int) {
            return (s.b2 - 2 * s.a2p) * (2 * s.A * s.b1 - 3 * s.a2 * s.b2 - 2 * s.a2 * s.a2p) - 2 * s.a2 * s.B * s.b1;
          });
  scalarY("case3-4-2", SC::case3, "[a2 B b1 + A b1 b2 - 2a2(b2 a2' - a2 b2')] Y", nullptr, [](const ProfileScalars& s, int) {
    return s.a2 * s.B * s.b1 + s.A * s.b1 * s.b2 - 2 * s.a2 * (s.b2 * s.a2p - s.a2 * s.b2p);
  });
  scalarY("case3-4-3", SC::case3, "(b1 b2 - a2 b1') Y", nullptr,
          [](const ProfileScalars& s, int) { return s.b1 * s.b2 - s.a2 * s.b1p; });

  // ---- case 4
  add("LEC4-0-1", "case4", "a1 symmetrized nabla nabla Y against A', B times Y", 1, 3, in_case(SC::case4),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int k = i[0], l = i[1], p = i[2];
        a(s.a1 * (c.nnY(k, l, p) + c.nnY(l, k, p)));
        a(-2 * s.Ap * c.g(k, l) * c.Y(p));
        a(-s.B * (c.Y(k) * c.g(l, p) + c.Y(l) * c.g(k, p)));
      });
  add("LEC4-0-2a", "case4", "a1 nabla P against a2' Y", 1, 3, in_case(SC::case4), [](const Ctx& c, const Idx& i, Acc& a) {
    const auto& s = *c.s;
    int l = i[0], k = i[1], p = i[2];
    a(s.a1 * c.nP(l, k, p));
    a(-s.a2p * (c.g(l, p) * c.Y(k) - c.g(l, k) * c.Y(p)));
  });
  tensor2("LEC4-0-2b", SC::case4, "B P - a2' nabla Y", [](const Ctx& c, int k, int p, Acc& a) {
    a(c.s->B * c.P(k, p));
    a(-c.s->a2p * c.nY(k, p));
  });
  tensor2("LEC4-0-3a", SC::case4, "a2' L_Y g", [](const Ctx& c, int k, int l, Acc& a) { a(c.s->a2p * c.LY(k, l)); });
  add("LEC4-0-3b", "case4", "a2' tr nabla Y", 1, 0, in_case(SC::case4), [](const Ctx& c, const Idx&, Acc& a) {
    a(c.s->a2p * c.trDY());
  });
  // Printed as B nabla X; the preceding relation only yields the symmetric part.
  tensor2("LEC4-0-4", SC::case4, "B L_X g", [](const Ctx& c, int k, int m, Acc& a) { a(c.s->B * c.LX(k, m)); });
  add("LE12-1", "case4", "3a1^2 nabla Y contracted with curvature against B, b times nabla Y", 1, 4, in_case(SC::case4),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int l = i[0], k = i[1], p = i[2], q = i[3];
        auto upY = [&](int r, int x) {  // nabla^r Y_x
          double v = 0;
          for (int t = 0; t < c.n; ++t) v += c.gi(r, t) * c.nY(t, x);
          return v;
        };
        double cr = 0;
        for (int r = 0; r < c.n; ++r) cr += upY(r, q) * c.R(r, l, k, p) + upY(r, p) * c.R(r, l, k, q);
        a(3 * s.a1 * s.a1 * cr);
        a(-s.a1 * s.B *
          ((2 * c.nY(q, k) - c.nY(k, q)) * c.g(p, l) + (2 * c.nY(p, k) - c.nY(k, p)) * c.g(q, l) -
           (c.nY(p, q) + c.nY(q, p)) * c.g(k, l)));
        a(-2 * s.A * (s.b1 - s.a1p) * (2 * c.nY(l, k) * c.g(p, q) - c.nY(l, p) * c.g(k, q) - c.nY(l, q) * c.g(k, p)));
      });
  scalarY("LC4-1", SC::case4, "A'(2b1 + a1') Y", nullptr, [](const ProfileScalars& s, int) { return s.Ap * (2 * s.b1 + s.a1p); });
  scalarY("LC4-2", SC::case4, "{[2B(B + A') - 3A B'] a1 + A B (2b1 + a1')} Y", nullptr, [](const ProfileScalars& s, int) {
    return (2 * s.B * (s.B + s.Ap) - 3 * s.A * s.Bp) * s.a1 + s.A * s.B * (2 * s.b1 + s.a1p);
  });
  scalarY("LEC4-10-1", SC::case4, "[A a2'(b1 + a1') - 2a1(B a2' + A b2')] Y", nullptr, [](const ProfileScalars& s, int) {
    return s.A * s.a2p * (s.b1 + s.a1p) - 2 * s.a1 * (s.B * s.a2p + s.A * s.b2p);
  });
  add("LEC4-10-2", "case4", "Y [a1 a2' R - (B a2' + 2A b2')/2 g∧g]", 1, 5, in_case(SC::case4),
      [](const Ctx& c, const Idx& i, Acc& a) {
        const auto& s = *c.s;
        int e = i[0], p = i[1], q = i[2], r = i[3], t = i[4];
        a(c.Y(e) * s.a1 * s.a2p * c.R(p, q, r, t));
        a(-c.Y(e) * 0.5 * (s.B * s.a2p + 2 * s.A * s.b2p) * c.gg(p, q, r, t));
      });
  auto a2pnz = [](const ProfileScalars& s, double zt) -> std::optional<std::string> {
    if (!nz(s.a2p, zt)) return "requires a2' != 0";
    return std::nullopt;
  };
  add("LEC4-10-2-1a", "case4", "b2' nabla Y", 1, 2, in_case(SC::case4, a2pnz), [](const Ctx& c, const Idx& i, Acc& a) {
    a(c.s->b2p * c.nY(i[0], i[1]));
  });
  add("LEC4-10-2-1b", "case4", "(b1 - a1') nabla Y", 1, 2, in_case(SC::case4, a2pnz), [](const Ctx& c, const Idx& i, Acc& a) {
    a((c.s->b1 - c.s->a1p) * c.nY(i[0], i[1]));
  });
  for (const auto& [key, parts] : std::vector<std::pair<std::string, std::vector<std::string>>>{
           {"split-14", {"split-14a", "split-14b"}},
           {"split-15", {"split-15a", "split-15b"}},
           {"split-22", {"split-22a", "split-22b", "split-22c"}},
           {"case3-1-1", {"case3-1-1a", "case3-1-1b", "case3-1-1c"}},
           {"case3-1-2", {"case3-1-2a", "case3-1-2b"}},
           {"LEC4-0-3", {"LEC4-0-3a", "LEC4-0-3b"}},
           {"LEC4-10-2-1", {"LEC4-10-2-1a", "LEC4-10-2-1b"}}}) {
    const Entry* first = nullptr;
    int order = 0;
    for (const auto& e : r)
      for (const auto& p : parts)
        if (e.info.key == p) {
          if (!first) first = &e;
          order = std::max(order, e.info.order);
        }
    std::string desc = "all of";
    for (const auto& p : parts) desc += " " + p;
    Entry agg{{key, first->info.family, desc, order}, 0, first->gate, nullptr, parts};
    r.push_back(std::move(agg));
  }
  return r;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> r = build_registry();
  return r;
}

const Entry& find_entry(const std::string& id) {
  for (const auto& e : registry())
    if (e.info.key == id) return e;
  throw std::invalid_argument("unknown identity '" + id + "'");
}

// Sum and scale over all free-index tuples; fills `sums` row-major when non-null.
Acc run(const Entry& e, const Ctx& c, std::vector<double>* sums = nullptr) {
  Acc total;
  total.sum = 0;
  const std::size_t count = TensorValue::count(c.n, e.free);
  if (sums) sums->assign(count, 0.0);
  Idx idx{};
  for (std::size_t off = 0; off < count; ++off) {
    std::size_t rem = off;
    for (int s = e.free - 1; s >= 0; --s) {
      idx[static_cast<std::size_t>(s)] = static_cast<int>(rem % static_cast<std::size_t>(c.n));
      rem /= static_cast<std::size_t>(c.n);
    }
    Acc a;
    e.body(c, idx, a);
    total.sum = std::max(total.sum, std::abs(a.sum));
    total.mx = std::max(total.mx, a.mx);
    if (sums) (*sums)[off] = a.sum;
  }
  return total;
}

void digest_bytes(std::uint64_t& h, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 1099511628211ULL;
  }
}

std::string digest(const TaylorCoefficients& c, const ProfileScalars& s) {
  std::uint64_t h = 1469598103934665603ULL;
  digest_bytes(h, c.x.data(), c.x.size() * sizeof(double));
  digest_bytes(h, s.w.data(), sizeof(s.w));
  digest_bytes(h, s.w1.data(), sizeof(s.w1));
  digest_bytes(h, s.w2.data(), sizeof(s.w2));
  for (const Tensor<Jet>* t : {&c.X, &c.Y, &c.K, &c.Pt, &c.E, &c.Q, &c.F, &c.S3, &c.G, &c.V})
    for (const Jet& j : t->data()) {
      const double v = j.value();
      digest_bytes(h, &v, sizeof v);
    }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

IdentityReport evaluate_entry(const Entry& e, const Ctx& ctx, const TaylorCoefficients& c, const ProfileScalars& s,
                              const CaseVerdict* cv, double tol, double zt, const std::string& dig) {
  IdentityReport rep;
  rep.identity_id = e.info.key;
  rep.inputs_digest = dig;
  if (auto why = e.gate(s, cv, c.n, zt)) {
    rep.verdict = Verdict::not_applicable;
    rep.note = *why;
    return rep;
  }
  if (e.info.order > c.order) {
    rep.verdict = Verdict::skipped;
    rep.note = "needs u-order " + std::to_string(e.info.order) + " coefficients";
    return rep;
  }
  if (!e.parts.empty()) {
    rep.verdict = Verdict::pass;
    for (const auto& p : e.parts) {
      IdentityReport sub = evaluate_entry(find_entry(p), ctx, c, s, cv, tol, zt, dig);
      rep.residual = std::max(rep.residual, sub.residual);
      rep.scale = std::max(rep.scale, sub.scale);
      if (sub.verdict == Verdict::fail) rep.verdict = Verdict::fail;
    }
    return rep;
  }
  Acc a = run(e, ctx);
  rep.residual = a.sum;
  rep.scale = a.mx;
  rep.verdict = rep.residual <= tol * std::max(rep.scale, 1.0) ? Verdict::pass : Verdict::fail;
  return rep;
}

std::optional<CaseVerdict> try_classify(const ProfileScalars& s, double zt) {
  try {
    return classify_case(s, zt);
  } catch (const DegenerateMetric&) {
    return std::nullopt;
  }
}

}  // namespace

const std::vector<IdentityInfo>& identity_registry() {
  static const std::vector<IdentityInfo> infos = [] {
    std::vector<IdentityInfo> v;
    for (const auto& e : registry()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

IdentityReport evaluate_identity(const std::string& id, const TaylorCoefficients& c, const ProfileScalars& s, double tol,
                                 double zt) {
  const Entry& e = find_entry(id);
  auto cv = try_classify(s, zt);
  Ctx ctx = make_ctx(c, s);
  return evaluate_entry(e, ctx, c, s, cv ? &*cv : nullptr, tol, zt, digest(c, s));
}

std::vector<IdentityReport> evaluate_all(const TaylorCoefficients& c, const ProfileScalars& s, double tol, double zt) {
  auto cv = try_classify(s, zt);
  Ctx ctx = make_ctx(c, s);
  const std::string dig = digest(c, s);
  const auto& reg = registry();
  std::vector<IdentityReport> out(reg.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < reg.size(); ++i) out[i] = evaluate_entry(reg[i], ctx, c, s, cv ? &*cv : nullptr, tol, zt, dig);
  return out;
}

IdentityReport evaluate_scalar_identity(const std::string& id, const ProfileScalars& s, int dim, double tol) {
  Acc a;
  scalar_terms(id, s, dim, a);
  IdentityReport rep;
  rep.identity_id = id;
  rep.residual = std::abs(a.sum);
  rep.scale = a.mx;
  rep.verdict = rep.residual <= tol * std::max(rep.scale, 1.0) ? Verdict::pass : Verdict::fail;
  return rep;
}

// ---------------------------------------------------------------------------
// Derivation diagnostic

std::vector<DerivationCheck> derivation_diagnostic(const WeightProfile& profile, const Chart& chart,
                                                   std::span<const double> x, const BundleVectorField& Z) {
  const int n = chart.dim();
  const int m = 2 * n;
  std::vector<double> u0(static_cast<std::size_t>(n), 0.0);
  require_nondegenerate(profile, u0, chart, x);
  BundleJets bj(profile, chart, x, u0, 4);
  VarList bvars = bundle_vars(chart);
  std::vector<Jet> Zj;
  for (const auto& comp : Z.components) Zj.push_back(comp.rebind(bvars).eval<Jet>(bj.coords()));

  std::vector<Jet> L(static_cast<std::size_t>(m * m), Jet(0.0));
  for (int A = 0; A < m; ++A)
    for (int B = 0; B < m; ++B) {
      Jet v(0.0);
      for (int C = 0; C < m; ++C)
        v += Zj[C] * bj.d(bj.G(A, B), C) + bj.G(C, B) * bj.d(Zj[C], A) + bj.G(A, C) * bj.d(Zj[C], B);
      L[A * m + B] = v;
    }
  auto Lc = [&](int A, int B) -> const Jet& { return L[static_cast<std::size_t>(A * m + B)]; };
  std::array<std::vector<Jet>, 3> blk;  // hh, vh, vv as (k, l)
  for (auto& b : blk) b.assign(static_cast<std::size_t>(n * n), Jet(0.0));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) {
      Jet hh = Lc(k, l), vh = Lc(n + k, l);
      for (int j = 0; j < n; ++j) {
        hh -= bj.N(j, l) * Lc(k, n + j) + bj.N(j, k) * Lc(n + j, l);
        vh -= bj.N(j, l) * Lc(n + k, n + j);
        for (int i = 0; i < n; ++i) hh += bj.N(i, k) * bj.N(j, l) * Lc(n + i, n + j);
      }
      blk[0][k * n + l] = hh;
      blk[1][k * n + l] = vh;
      blk[2][k * n + l] = Lc(n + k, n + l);
    }
  const JetSpace* sp = bj.space();
  auto uderiv = [&](const Jet& f, std::span<const int> us) {
    if (f.is_constant()) return us.empty() ? f.value() : 0.0;
    std::vector<std::uint8_t> e(static_cast<std::size_t>(m), 0);
    for (int p : us) ++e[static_cast<std::size_t>(n + p)];
    double fact = 1;
    for (auto c : e)
      for (int i = 2; i <= c; ++i) fact *= i;
    return f.coef(sp->index_of(e)) * fact;
  };

  TaylorCoefficients c = extract_coefficients(Z, chart, x, 4);
  ProfileScalars s = derived_scalars(profile, 0.0);
  Ctx ctx = make_ctx(c, s);
  const ProfileScalars sh = scalars_from_values(s.w1, s.w2);
  Ctx shifted = ctx;
  shifted.s = &sh;

  std::vector<DerivationCheck> out;
  const char* ids[] = {"I1", "II1", "III1", "I2", "II2", "III2", "I3", "II3", "III3", "I4", "II4", "III4"};
  for (int which = 0; which < 13; ++which) {
    const bool alt = which == 12;
    const std::string id = alt ? "II3" : ids[which];
    const Entry& e = find_entry(id);
    Entry use = e;
    if (alt) {
      use.info.key = "II3-swapped";
      use.body = [](const Ctx& cc, const Idx& i, Acc& a) {
        const auto& s = *cc.s;
        int k = i[0], l = i[1], p = i[2], q = i[3];
        a(s.A * cc.F(l, k, p, q));
        a(s.a2 * cc.W(l, k, p, q));
        a(s.a1 * cc.nT(l, k, p, q));
        a(s.a2 * cc.nE(l, k, p, q));
        a(2 * s.a2p * cc.g(k, l) * cc.Sbar(p, q));
        double kr = 0;
        for (int t = 0; t < cc.n; ++t) kr += cc.Ku(t, p) * cc.R(t, l, k, q) + cc.Ku(t, q) * cc.R(t, l, k, p);
        a(-s.a1 * kr);
        a(s.b2 * (cc.K(p, k) * cc.g(q, l) + cc.K(q, k) * cc.g(p, l)));
        a(s.B * (cc.Sbar(p, k) * cc.g(q, l) + cc.Sbar(q, k) * cc.g(p, l) + cc.S(l, p) * cc.g(q, k) +
                 cc.S(l, q) * cc.g(p, k) + cc.nX(l, p) * cc.g(k, q) + cc.nX(l, q) * cc.g(k, p)));
        a(s.b1 * (cc.nY(l, p) * cc.g(k, q) + cc.nY(l, q) * cc.g(k, p)));
      };
    }
    const int b = alt ? 1 : which % 3;
    const int order = alt ? 3 : which / 3 + 1;
    std::vector<double> sums;
    Acc acc = run(use, ctx, &sums);
    // Completion: the order-(m-2) identity with every weight replaced by its t-derivative, times 2 g_pq.
    std::vector<double> low;
    if (order >= 3) run(find_entry(ids[(order - 3) * 3 + b]), shifted, &low);
    DerivationCheck chk;
    chk.id = use.info.key;
    chk.scale = acc.mx;
    const std::size_t count = sums.size();
    for (std::size_t off = 0; off < count; ++off) {
      std::vector<int> idx(static_cast<std::size_t>(use.free));
      std::size_t rem = off;
      for (int t = use.free - 1; t >= 0; --t) {
        idx[static_cast<std::size_t>(t)] = static_cast<int>(rem % static_cast<std::size_t>(n));
        rem /= static_cast<std::size_t>(n);
      }
      double corr = 0;
      if (order == 3) {
        corr = 2 * ctx.g(idx[2], idx[3]) * low[static_cast<std::size_t>(idx[0] * n + idx[1])];
      } else if (order == 4) {
        auto lo = [&](int r) { return low[static_cast<std::size_t>((idx[0] * n + idx[1]) * n + r)]; };
        const int p = idx[2], q = idx[3], r = idx[4];
        corr = 2 * (ctx.g(p, q) * lo(r) + ctx.g(q, r) * lo(p) + ctx.g(r, p) * lo(q));
      }
      chk.omitted = std::max(chk.omitted, std::abs(corr));
      const double ref = uderiv(blk[static_cast<std::size_t>(b)][idx[0] * n + idx[1]],
                                std::span<const int>(idx.data() + 2, idx.size() - 2));
      chk.max_diff = std::max(chk.max_diff, std::abs(sums[off] + corr - ref));
      chk.printed_gap = std::max(chk.printed_gap, std::abs(sums[off] - ref));
      chk.scale = std::max(chk.scale, std::abs(ref));
    }
    out.push_back(chk);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Algebraic helpers

WalkerResult walker_check(const Eigen::VectorXd& A, const Eigen::MatrixXd& B, double tol) {
  const int n = static_cast<int>(A.size());
  if (B.rows() != n || B.cols() != n) throw std::invalid_argument("walker_check: shape mismatch");
  if ((B - B.transpose()).cwiseAbs().maxCoeff() > tol) throw std::invalid_argument("walker_check: B is not symmetric");
  WalkerResult r;
  for (int l = 0; l < n; ++l)
    for (int h = 0; h < n; ++h)
      for (int k = 0; k < n; ++k) {
        const double v = A(l) * B(h, k) + A(h) * B(k, l) + A(k) * B(l, h);
        if (std::abs(v) > r.max_value) {
          r.max_value = std::abs(v);
          if (r.max_value > tol && r.consistent) {
            r.consistent = false;
            r.witness = {l, h, k};
          }
        }
      }
  return r;
}

Apen3Result apen3_check(const Eigen::MatrixXd& g, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& F, double tol) {
  const int n = static_cast<int>(g.rows());
  if (n <= 2) throw std::invalid_argument("apen3_check: requires dim > 2");
  for (const auto* M : {&g, &A, &B, &F})
    if (M->rows() != n || M->cols() != n) throw std::invalid_argument("apen3_check: shape mismatch");
  Apen3Result r;
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l)
      for (int m = 0; m < n; ++m)
        for (int q = 0; q < n; ++q) {
          const double v = g(k, l) * F(m, q) + g(m, q) * B(k, l) + g(l, q) * A(k, m) + g(k, q) * A(l, m) +
                           g(l, m) * A(k, q) + g(k, m) * A(l, q);
          r.hypothesis_residual = std::max(r.hypothesis_residual, std::abs(v));
        }
  r.hypothesis = r.hypothesis_residual <= tol;
  const Eigen::MatrixXd gi = g.inverse();
  const double trF = (gi.transpose().cwiseProduct(F)).sum();
  r.conclusion_residual = std::max({A.cwiseAbs().maxCoeff(), (B + F).cwiseAbs().maxCoeff(),
                                    (n * F - trF * g).cwiseAbs().maxCoeff()});
  r.conclusions = r.conclusion_residual <= tol;
  return r;
}

TensorValue kulkarni_nomizu(const TensorValue& A, const TensorValue& B) {
  if (A.rank() != 2 || B.rank() != 2 || A.dim() != B.dim()) throw std::invalid_argument("kulkarni_nomizu: shape mismatch");
  const int n = A.dim();
  TensorValue out(n, "llll", 0.0);
  for (int u = 0; u < n; ++u)
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int v = 0; v < n; ++v)
          out(u, x, y, v) = A(x, y) * B(u, v) - A(x, v) * B(u, y) + A(u, v) * B(x, y) - A(u, y) * B(x, v);
  return out;
}

bool generalized_curvature_predicate(const TensorValue& B, double tol) {
  if (B.rank() != 4) throw std::invalid_argument("generalized_curvature_predicate: rank 4 required");
  const int n = B.dim();
  for (int v = 0; v < n; ++v)
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
          if (std::abs(B(v, x, y, z) + B(v, y, z, x) + B(v, z, x, y)) > tol) return false;
          if (std::abs(B(v, x, y, z) + B(x, v, y, z)) > tol) return false;
          if (std::abs(B(v, x, y, z) - B(y, z, v, x)) > tol) return false;
        }
  return true;
}

TensorValue r_dot_t(const Chart& chart, std::span<const double> x, const std::vector<ScalarExpr>& T,
                    const std::string& variance) {
  const int n = chart.dim();
  if (T.size() != TensorValue::count(n, static_cast<int>(variance.size())))
    throw std::invalid_argument("r_dot_t: component count does not match the variance");
  LocalGeometry geo(chart, x, 3);
  Tensor<Jet> t = geo.evaluate(T, variance);
  TensorValue nn = values(geo.nabla(geo.nabla(t)));  // slots (T, a, b) = nabla_b nabla_a T
  const int k = static_cast<int>(variance.size());
  TensorValue out(n, variance + "ll", 0.0);
  for (std::size_t off = 0; off < out.size(); ++off) {
    std::vector<int> idx = out.unflat(off);
    std::vector<int> sw = idx;
    std::swap(sw[static_cast<std::size_t>(k)], sw[static_cast<std::size_t>(k + 1)]);
    out.data()[off] = nn.at(idx) - nn.at(sw);
  }
  return out;
}

}  // namespace gnat
