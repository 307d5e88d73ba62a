#pragma once

#include <span>
#include <string>
#include <vector>

#include "gnat/expr.hpp"
#include "gnat/jet.hpp"
#include "gnat/tensor.hpp"

namespace gnat {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

class Chart {
 public:
  Chart(std::string name, std::vector<std::string> coords, std::vector<Interval> box,
        const std::vector<std::vector<std::string>>& metric_text);
  Chart(std::string name, VarList coords, std::vector<Interval> box, std::vector<ScalarExpr> metric);

  const std::string& name() const { return name_; }
  int dim() const { return static_cast<int>(coords_->size()); }
  const VarList& coords() const { return coords_; }
  const std::vector<Interval>& box() const { return box_; }
  const ScalarExpr& g(int i, int j) const { return g_[static_cast<std::size_t>(i * dim() + j)]; }
  const std::vector<ScalarExpr>& metric() const { return g_; }
  bool contains(std::span<const double> x) const;

 private:
  void validate() const;
  std::string name_;
  VarList coords_;
  std::vector<Interval> box_;
  std::vector<ScalarExpr> g_;
};

Chart flat_chart(int n);
// Unit sphere in hyperspherical coordinates, angles clipped 0.3 away from the poles.
Chart round_sphere(int n);

struct VectorFieldDef {
  std::vector<ScalarExpr> components;  // X^r over the chart coordinates
};

VectorFieldDef parse_vector_field(const Chart& chart, const std::vector<std::string>& texts);

// Jets of the base geometry around x. Chart coordinate i is jet variable offset+i of space.
class LocalGeometry {
 public:
  LocalGeometry(const Chart& chart, std::span<const double> x, int order, const JetSpace* space = nullptr,
                int offset = 0);

  int dim() const { return n_; }
  const JetSpace* space() const { return space_; }
  int offset() const { return offset_; }
  std::span<const Jet> bindings() const { return bindings_; }

  const Tensor<Jet>& g() const { return g_; }
  const Tensor<Jet>& ginv() const { return ginv_; }
  const Tensor<Jet>& gamma() const { return gamma_; }         // Γ^r_{jk}, slots (r, j, k)
  const Tensor<Jet>& riemann() const { return riemann_; }     // R^r_{kji}, slots (r, k, j, i)
  const Tensor<Jet>& riemann_low() const { return riemann_low_; }  // R_{akji} = g_{ar} R^r_{kji}

  // Evaluates component expressions (over the chart coordinates) as jets.
  Tensor<Jet> evaluate(const std::vector<ScalarExpr>& components, const std::string& variance) const;
  // Covariant derivative; the derivative index is appended as the last slot.
  Tensor<Jet> nabla(const Tensor<Jet>& t) const;
  Jet d(const Jet& f, int k) const { return f.derivative(offset_ + k); }

 private:
  int n_;
  const JetSpace* space_;
  int offset_;
  std::vector<Jet> bindings_;
  Tensor<Jet> g_, ginv_, gamma_, riemann_, riemann_low_;
};

TensorValue values(const Tensor<Jet>& t);
// Gauss-Jordan inverse of a square jet matrix stored as a rank-2 tensor.
Tensor<Jet> invert(const Tensor<Jet>& m, const std::string& variance);

struct MetricValue {
  TensorValue g;
  TensorValue g_inv;
};

struct CurvatureValue {
  TensorValue R;      // R^r_{kji}
  TensorValue R_low;  // R_{akji}
};

struct LieConnectionValue {
  TensorValue via_curvature;  // ∇_j∇_i X^h + X^r R_{rjis} g^{sh}, slots (h, j, i)
  TensorValue via_metric;     // ½ g^{hr}[∇_j(L_Xg)_{ir} + ∇_i(L_Xg)_{jr} − ∇_r(L_Xg)_{ji}]
  double discrepancy = 0.0;
};

MetricValue metric_at(const Chart& chart, std::span<const double> x);
TensorValue christoffel_at(const Chart& chart, std::span<const double> x);
CurvatureValue riemann_at(const Chart& chart, std::span<const double> x);
TensorValue covariant_derivative_at(const Chart& chart, std::span<const double> x,
                                    const std::vector<ScalarExpr>& components, const std::string& variance);
TensorValue lie_metric_at(const Chart& chart, std::span<const double> x, const VectorFieldDef& X);
LieConnectionValue lie_connection_at(const Chart& chart, std::span<const double> x, const VectorFieldDef& X);
double ricci_identity_residual(const Chart& chart, std::span<const double> x, const VectorFieldDef& X);

// Symbolic inverse metric (cofactor expansion) and Christoffel symbols, for building lifted fields.
std::vector<ScalarExpr> symbolic_inverse_metric(const Chart& chart);
std::vector<ScalarExpr> symbolic_christoffel(const Chart& chart);  // flat (r, j, k)

}  // namespace gnat
