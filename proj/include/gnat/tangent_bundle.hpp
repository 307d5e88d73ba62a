#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "gnat/chart.hpp"
#include "gnat/gnatural.hpp"

namespace gnat {

// Fiber coordinate names u1..un; the induced chart on TM has variables (coords, u1..un).
std::vector<std::string> fiber_names(const Chart& chart);
VarList bundle_vars(const Chart& chart);

struct FrameChange {
  Eigen::MatrixXd N;               // N(j, k) = u^r Gamma^j_{rk}
  Eigen::MatrixXd to_coordinates;  // columns: d_k^h, d_l^v in components along (d_k, delta_l)
  Eigen::MatrixXd to_adapted;      // inverse of to_coordinates
};

FrameChange frame_change_at(const Chart& chart, std::span<const double> x, std::span<const double> u);

enum class LiftKind { horizontal, vertical };
Eigen::VectorXd lift_vector_at(const Chart& chart, std::span<const double> x, std::span<const double> u,
                               std::span<const double> X, LiftKind kind);

// Jets of G around (x,u) in the 2n variables (x^1..x^n, u^1..u^n).
// G components carry jet order `order`; the base metric is expanded one order higher.
class BundleJets {
 public:
  BundleJets(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
             std::span<const double> u, int order);

  int dim() const { return n_; }
  const JetSpace* space() const { return space_; }
  const LocalGeometry& base() const { return base_; }
  std::span<const Jet> coords() const { return coords_; }
  const Jet& u(int i) const { return coords_[static_cast<std::size_t>(n_ + i)]; }
  const Jet& u_low(int a) const { return u_low_[static_cast<std::size_t>(a)]; }
  const Jet& t() const { return t_; }
  const Jet& weight(Weight w) const { return w_[static_cast<std::size_t>(w)]; }
  const Jet& N(int j, int k) const { return N_[static_cast<std::size_t>(j * n_ + k)]; }

  // Adapted-frame blocks, each n x n: hh, hv (= vh), vv.
  const Jet& hh(int k, int l) const { return hh_[static_cast<std::size_t>(k * n_ + l)]; }
  const Jet& hv(int k, int l) const { return hv_[static_cast<std::size_t>(k * n_ + l)]; }
  const Jet& vv(int k, int l) const { return vv_[static_cast<std::size_t>(k * n_ + l)]; }
  // Coordinate components G(A, B), A, B in 0..2n-1.
  const Jet& G(int A, int B) const { return G_[static_cast<std::size_t>(A * 2 * n_ + B)]; }
  // Derivative along bundle coordinate A (0..n-1 for x, n..2n-1 for u).
  Jet d(const Jet& f, int A) const { return f.derivative(A); }

  Eigen::MatrixXd adapted_values() const;
  Eigen::MatrixXd coordinate_values() const;

 private:
  int n_;
  const JetSpace* space_;
  LocalGeometry base_;
  std::vector<Jet> coords_, u_low_, w_, N_, hh_, hv_, vv_, G_;
  Jet t_;
};

// Throws DegenerateMetric when a or F vanishes at t = g(u,u).
void require_nondegenerate(const WeightProfile& profile, std::span<const double> u, const Chart& chart,
                           std::span<const double> x);

// Christoffel symbols of G in the induced coordinates, slots (C, A, B).
TensorValue generic_connection_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                                  std::span<const double> u);

enum class ConnectionSlot { hh, hv, vh, vv };
ConnectionSlot parse_slot(const std::string& name);

// nabla~_{X^a} Y^b from the closed-form tensors A..F; result in induced coordinate components.
Eigen::VectorXd closed_form_connection_at(const WeightProfile& profile, const Chart& chart,
                                          std::span<const double> x, std::span<const double> u,
                                          const VectorFieldDef& X, const VectorFieldDef& Y, ConnectionSlot slot);
// The same covariant derivative from the generic Christoffel symbols and the lifted fields.
Eigen::VectorXd generic_covariant_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                                     std::span<const double> u, const VectorFieldDef& X, const VectorFieldDef& Y,
                                     ConnectionSlot slot);

// Max residual of the three bracket identities for lifts of X, Y.
double bracket_residual(const Chart& chart, std::span<const double> x, std::span<const double> u,
                        const VectorFieldDef& X, const VectorFieldDef& Y);

}  // namespace gnat
