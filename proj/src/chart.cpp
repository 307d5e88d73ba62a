#include "gnat/chart.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace gnat {

Chart::Chart(std::string name, std::vector<std::string> coords, std::vector<Interval> box,
             const std::vector<std::vector<std::string>>& metric_text)
    : name_(std::move(name)), coords_(make_var_list(std::move(coords))), box_(std::move(box)) {
  const int n = dim();
  if (static_cast<int>(metric_text.size()) != n) throw GeometryError("metric must have " + std::to_string(n) + " rows");
  for (const auto& row : metric_text) {
    if (static_cast<int>(row.size()) != n) throw GeometryError("metric rows must have " + std::to_string(n) + " entries");
    for (const auto& text : row) g_.push_back(parse_expression(text, coords_));
  }
  validate();
}

Chart::Chart(std::string name, VarList coords, std::vector<Interval> box, std::vector<ScalarExpr> metric)
    : name_(std::move(name)), coords_(std::move(coords)), box_(std::move(box)), g_(std::move(metric)) {
  for (auto& e : g_) e = e.rebind(coords_);
  validate();
}

void Chart::validate() const {
  const int n = dim();
  if (n < 2) throw GeometryError("chart dimension must be at least 2");
  if (static_cast<int>(box_.size()) != n) throw GeometryError("domain box must have one interval per coordinate");
  for (const auto& iv : box_)
    if (!(iv.lo <= iv.hi)) throw GeometryError("domain interval with lo > hi");
  if (static_cast<int>(g_.size()) != n * n) throw GeometryError("metric must have n*n components");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (print_expression(g(i, j)) != print_expression(g(j, i)))
        throw GeometryError("metric is not symmetric: g[" + std::to_string(i) + "][" + std::to_string(j) + "] = " +
                            print_expression(g(i, j)) + " but g[" + std::to_string(j) + "][" + std::to_string(i) +
                            "] = " + print_expression(g(j, i)));
}

bool Chart::contains(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < box_[i].lo || x[i] > box_[i].hi) return false;
  return true;
}

Chart flat_chart(int n) {
  std::vector<std::string> coords;
  std::vector<Interval> box;
  std::vector<std::vector<std::string>> g(static_cast<std::size_t>(n), std::vector<std::string>(static_cast<std::size_t>(n), "0"));
  for (int i = 0; i < n; ++i) {
    coords.push_back("x" + std::to_string(i + 1));
    box.push_back({-1.0, 1.0});
    g[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = "1";
  }
  return Chart("flat" + std::to_string(n), coords, box, g);
}

Chart round_sphere(int n) {
  if (n == 2) {
    return Chart("sphere2", {"θ", "φ"}, {{0.3, M_PI - 0.3}, {0.0, 2.0 * M_PI}},
                 {{"1", "0"}, {"0", "sin(θ)^2"}});
  }
  if (n == 3) {
    return Chart("sphere3", {"χ", "θ", "φ"}, {{0.3, M_PI - 0.3}, {0.3, M_PI - 0.3}, {0.0, 2.0 * M_PI}},
                 {{"1", "0", "0"}, {"0", "sin(χ)^2", "0"}, {"0", "0", "sin(χ)^2*sin(θ)^2"}});
  }
  throw GeometryError("round_sphere: supported dimensions are 2 and 3");
}

VectorFieldDef parse_vector_field(const Chart& chart, const std::vector<std::string>& texts) {
  if (static_cast<int>(texts.size()) != chart.dim())
    throw GeometryError("vector field needs " + std::to_string(chart.dim()) + " components");
  VectorFieldDef X;
  for (const auto& t : texts) X.components.push_back(parse_expression(t, chart.coords()));
  return X;
}

// ---------------------------------------------------------------------------

TensorValue values(const Tensor<Jet>& t) {
  TensorValue v(t.dim(), t.variance());
  for (std::size_t k = 0; k < t.size(); ++k) v.data()[k] = t.data()[k].value();
  return v;
}

Tensor<Jet> invert(const Tensor<Jet>& m, const std::string& variance) {
  const int n = m.dim();
  std::vector<std::vector<Jet>> a(static_cast<std::size_t>(n), std::vector<Jet>(static_cast<std::size_t>(2 * n), Jet(0.0)));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[i][j] = m(i, j);
    a[i][n + i] = Jet(1.0);
  }
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(a[r][c].value()) > std::abs(a[piv][c].value())) piv = r;
    if (a[piv][c].value() == 0.0) throw GeometryError("singular matrix");
    std::swap(a[c], a[piv]);
    Jet inv = Jet(1.0) / a[c][c];
    for (int j = 0; j < 2 * n; ++j) a[c][j] = a[c][j] * inv;
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      Jet f = a[r][c];
      if (f.is_constant() && f.value() == 0.0) continue;
      for (int j = 0; j < 2 * n; ++j) a[r][j] -= f * a[c][j];
    }
  }
  Tensor<Jet> out(n, variance, Jet(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = a[i][n + j];
  return out;
}

static void check_positive_definite(const Tensor<Jet>& g) {
  const int n = g.dim();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(i, j).value();
  for (int k = 1; k <= n; ++k) {
    double det = m.topLeftCorner(k, k).determinant();
    if (!(det > 0.0))
      throw GeometryError("metric is not positive-definite (leading minor " + std::to_string(k) + " = " +
                          std::to_string(det) + ")");
  }
}

LocalGeometry::LocalGeometry(const Chart& chart, std::span<const double> x, int order, const JetSpace* space,
                             int offset)
    : n_(chart.dim()), space_(space ? space : JetSpace::get(chart.dim(), order)), offset_(offset) {
  const int n = n_;
  for (int i = 0; i < n; ++i) bindings_.push_back(Jet::variable(space_, offset + i, x[static_cast<std::size_t>(i)], order));
  g_ = Tensor<Jet>(n, "ll");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g_(i, j) = eval_jet(chart.g(i, j), bindings_);
  check_positive_definite(g_);
  ginv_ = invert(g_, "uu");
  if (order >= 1) {
    // Γ^r_{jk} = ½ g^{rs}(∂_j g_{sk} + ∂_k g_{sj} − ∂_s g_{jk})
    Tensor<Jet> dg(n, "lll");  // dg(s,k,j) = ∂_j g_{sk}
    for (int s = 0; s < n; ++s)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j) dg(s, k, j) = d(g_(s, k), j);
    gamma_ = Tensor<Jet>(n, "ull", Jet(0.0));
    for (int j = 0; j < n; ++j)
      for (int k = j; k < n; ++k) {
        std::vector<Jet> first(static_cast<std::size_t>(n));
        for (int s = 0; s < n; ++s) first[s] = (dg(s, k, j) + dg(s, j, k) - dg(j, k, s)) * Jet(0.5);
        for (int r = 0; r < n; ++r) {
          Jet acc(0.0);
          for (int s = 0; s < n; ++s) acc += ginv_(r, s) * first[s];
          gamma_(r, j, k) = acc;
          gamma_(r, k, j) = acc;
        }
      }
  }
  if (order >= 2) {
    // R^r_{kji} = ∂_iΓ^r_{jk} − ∂_jΓ^r_{ik} + Γ^r_{is}Γ^s_{jk} − Γ^r_{js}Γ^s_{ik}
    riemann_ = Tensor<Jet>(n, "ulll", Jet(0.0));
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) {
            Jet v = d(gamma_(r, j, k), i) - d(gamma_(r, i, k), j);
            for (int s = 0; s < n; ++s) v += gamma_(r, i, s) * gamma_(s, j, k) - gamma_(r, j, s) * gamma_(s, i, k);
            riemann_(r, k, j, i) = v;
          }
    riemann_low_ = Tensor<Jet>(n, "llll", Jet(0.0));
    for (int a = 0; a < n; ++a)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i) {
            Jet v(0.0);
            for (int r = 0; r < n; ++r) v += g_(a, r) * riemann_(r, k, j, i);
            riemann_low_(a, k, j, i) = v;
          }
  }
}

Tensor<Jet> LocalGeometry::evaluate(const std::vector<ScalarExpr>& components, const std::string& variance) const {
  Tensor<Jet> t(n_, variance);
  if (components.size() != t.size())
    throw GeometryError("tensor field has " + std::to_string(components.size()) + " components, expected " +
                        std::to_string(t.size()));
  for (std::size_t k = 0; k < t.size(); ++k) t.data()[k] = eval_jet(components[k], bindings_);
  return t;
}

Tensor<Jet> LocalGeometry::nabla(const Tensor<Jet>& t) const {
  if (t.dim() != n_) throw GeometryError("nabla: dimension mismatch");
  const int rank = t.rank();
  Tensor<Jet> out(n_, t.variance() + "l");
  std::vector<int> idx(static_cast<std::size_t>(rank) + 1);
  for (std::size_t off = 0; off < out.size(); ++off) {
    idx = out.unflat(off);
    const int k = idx.back();
    std::vector<int> src(idx.begin(), idx.end() - 1);
    Jet v = d(t.at(src), k);
    for (int s = 0; s < rank; ++s) {
      const int orig = src[static_cast<std::size_t>(s)];
      for (int m = 0; m < n_; ++m) {
        src[static_cast<std::size_t>(s)] = m;
        if (t.variance()[static_cast<std::size_t>(s)] == 'u')
          v += gamma_(orig, k, m) * t.at(src);
        else
          v -= gamma_(m, k, orig) * t.at(src);
      }
      src[static_cast<std::size_t>(s)] = orig;
    }
    out.data()[off] = v;
  }
  return out;
}

// ---------------------------------------------------------------------------

static void require_inside(const Chart& chart, std::span<const double> x) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
}

MetricValue metric_at(const Chart& chart, std::span<const double> x) {
  require_inside(chart, x);
  LocalGeometry geo(chart, x, 0);
  return {values(geo.g()), values(geo.ginv())};
}

TensorValue christoffel_at(const Chart& chart, std::span<const double> x) {
  require_inside(chart, x);
  LocalGeometry geo(chart, x, 1);
  return values(geo.gamma());
}

CurvatureValue riemann_at(const Chart& chart, std::span<const double> x) {
  require_inside(chart, x);
  LocalGeometry geo(chart, x, 2);
  return {values(geo.riemann()), values(geo.riemann_low())};
}

TensorValue covariant_derivative_at(const Chart& chart, std::span<const double> x,
                                    const std::vector<ScalarExpr>& components, const std::string& variance) {
  require_inside(chart, x);
  LocalGeometry geo(chart, x, 1);
  return values(geo.nabla(geo.evaluate(components, variance)));
}

static Tensor<Jet> lower_vector(const LocalGeometry& geo, const Tensor<Jet>& X) {
  const int n = geo.dim();
  Tensor<Jet> out(n, "l", Jet(0.0));
  for (int k = 0; k < n; ++k)
    for (int r = 0; r < n; ++r) out(k) += geo.g()(k, r) * X(r);
  return out;
}

static Tensor<Jet> lie_metric_jets(const LocalGeometry& geo, const Tensor<Jet>& X) {
  const int n = geo.dim();
  Tensor<Jet> dX = geo.nabla(lower_vector(geo, X));  // (j, i) = ∇_i X_j
  Tensor<Jet> L(n, "ll");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L(i, j) = dX(j, i) + dX(i, j);
  return L;
}

TensorValue lie_metric_at(const Chart& chart, std::span<const double> x, const VectorFieldDef& X) {
  require_inside(chart, x);
  LocalGeometry geo(chart, x, 1);
  return values(lie_metric_jets(geo, geo.evaluate(X.components, "u")));
}

LieConnectionValue lie_connection_at(const Chart& chart, std::span<const double> x, const VectorFieldDef& X) {
  require_inside(chart, x);
  const int n = chart.dim();
  LocalGeometry geo(chart, x, 3);
  Tensor<Jet> Xj = geo.evaluate(X.components, "u");
  TensorValue ddX = values(geo.nabla(geo.nabla(Xj)));  // (h, i, j) = ∇_j∇_i X^h
  TensorValue Rl = values(geo.riemann_low());
  TensorValue gi = values(geo.ginv());
  TensorValue Xv = values(Xj);
  TensorValue dL = values(geo.nabla(lie_metric_jets(geo, Xj)));  // (i, r, j) = ∇_j (L_Xg)_{ir}

  LieConnectionValue out{TensorValue(n, "ull", 0.0), TensorValue(n, "ull", 0.0), 0.0};
  double scale = 0.0;
  for (int h = 0; h < n; ++h)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        double curv = 0.0;
        for (int r = 0; r < n; ++r)
          for (int s = 0; s < n; ++s) curv += Xv(r) * Rl(r, j, i, s) * gi(s, h);
        double left = ddX(h, i, j) + curv;
        double right = 0.0;
        for (int r = 0; r < n; ++r) right += 0.5 * gi(h, r) * (dL(i, r, j) + dL(j, r, i) - dL(j, i, r));
        out.via_curvature(h, j, i) = left;
        out.via_metric(h, j, i) = right;
        out.discrepancy = std::max(out.discrepancy, std::abs(left - right));
        scale = std::max({scale, std::abs(ddX(h, i, j)), std::abs(curv), std::abs(right)});
      }
  (void)scale;
  return out;
}

double ricci_identity_residual(const Chart& chart, std::span<const double> x, const VectorFieldDef& X) {
  require_inside(chart, x);
  const int n = chart.dim();
  LocalGeometry geo(chart, x, 2);
  Tensor<Jet> Xj = geo.evaluate(X.components, "u");
  TensorValue dd = values(geo.nabla(geo.nabla(lower_vector(geo, Xj))));  // (k, j, i) = X_{k,ji} = ∇_i∇_j X_k
  TensorValue Rl = values(geo.riemann_low());
  TensorValue Xv = values(Xj);
  double worst = 0.0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        double v = dd(k, j, i) - dd(k, i, j);
        for (int s = 0; s < n; ++s) v += Xv(s) * Rl(s, k, j, i);
        worst = std::max(worst, std::abs(v));
      }
  return worst;
}

// ---------------------------------------------------------------------------

static ScalarExpr symbolic_det(const std::vector<ScalarExpr>& m, int n, const std::vector<int>& rows,
                               const std::vector<int>& cols) {
  if (rows.size() == 1) return m[static_cast<std::size_t>(rows[0] * n + cols[0])];
  ScalarExpr acc = ScalarExpr::constant(0.0, m[0].var_list());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const ScalarExpr& entry = m[static_cast<std::size_t>(rows[0] * n + cols[c])];
    if (entry.is_zero()) continue;
    std::vector<int> r2(rows.begin() + 1, rows.end());
    std::vector<int> c2;
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (k != c) c2.push_back(cols[k]);
    ScalarExpr term = entry * symbolic_det(m, n, r2, c2);
    acc = (c % 2 == 0) ? acc + term : acc - term;
  }
  return acc;
}

std::vector<ScalarExpr> symbolic_inverse_metric(const Chart& chart) {
  const int n = chart.dim();
  const auto& m = chart.metric();
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
  ScalarExpr det = symbolic_det(m, n, all, all);
  std::vector<ScalarExpr> inv(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      // inverse(i,j) = cofactor(j,i) / det
      std::vector<int> rows, cols;
      for (int k = 0; k < n; ++k) {
        if (k != j) rows.push_back(k);
        if (k != i) cols.push_back(k);
      }
      ScalarExpr minor = symbolic_det(m, n, rows, cols);
      if ((i + j) % 2) minor = -minor;
      inv[static_cast<std::size_t>(i * n + j)] = minor / det;
    }
  return inv;
}

std::vector<ScalarExpr> symbolic_christoffel(const Chart& chart) {
  const int n = chart.dim();
  auto inv = symbolic_inverse_metric(chart);
  std::vector<ScalarExpr> out(static_cast<std::size_t>(n * n * n));
  auto half = ScalarExpr::constant(0.5, chart.coords());
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int r = 0; r < n; ++r) {
        ScalarExpr acc = ScalarExpr::constant(0.0, chart.coords());
        for (int s = 0; s < n; ++s) {
          if (inv[static_cast<std::size_t>(r * n + s)].is_zero()) continue;
          ScalarExpr first = differentiate(chart.g(s, k), j) + differentiate(chart.g(s, j), k) -
                             differentiate(chart.g(j, k), s);
          if (first.is_zero()) continue;
          acc = acc + inv[static_cast<std::size_t>(r * n + s)] * first;
        }
        out[static_cast<std::size_t>((r * n + j) * n + k)] = half * acc;
      }
  return out;
}

}  // namespace gnat
