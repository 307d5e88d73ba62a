#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnat/chart.hpp"
#include "gnat/gnatural.hpp"
#include "gnat/tangent_bundle.hpp"

namespace gnat {

enum class LiftType { complete_lift, vertical_lift, iota_P, iota_C, grad_Y, affine_sum, custom };
std::string to_string(LiftType kind);
LiftType parse_lift_type(const std::string& name);

class HypothesisViolated : public std::runtime_error {
 public:
  HypothesisViolated(const std::string& msg, double residual) : std::runtime_error(msg), residual(residual) {}
  double residual;
};

// Vector field on TM in induced coordinates: Z = Z^a d_a + Z~^a delta_a.
struct BundleVectorField {
  LiftType kind = LiftType::custom;
  VarList vars;                        // chart coordinates followed by u1..un
  std::vector<ScalarExpr> components;  // 2n entries: Z^1..Z^n, Z~^1..Z~^n
  std::optional<VectorFieldDef> field;  // X (or Y for grad_Y) over the chart coordinates
  std::vector<ScalarExpr> tensor;       // P_{ij} row-major over the chart coordinates (iota_P)
};

BundleVectorField make_lift(LiftType kind, const Chart& chart, const VectorFieldDef& X);
BundleVectorField make_iota_P(const Chart& chart, const std::vector<ScalarExpr>& P);
BundleVectorField make_custom_field(const Chart& chart, const std::vector<std::string>& texts);

// Adapted-frame blocks indexed (k, l): hh = (d_k^h, d_l^h), vh = (d_k^v, d_l^h), vv = (d_k^v, d_l^v).
struct LieBlocks {
  Eigen::MatrixXd hh, vh, vv;
  double max_abs() const;
};
double max_abs_diff(const LieBlocks& a, const LieBlocks& b);

// Coordinate Lie derivative Z^C d_C G_AB + G_CB d_A Z^C + G_AC d_B Z^C.
Eigen::MatrixXd lie_G_generic_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                                 std::span<const double> u, const BundleVectorField& Z);
LieBlocks adapted_blocks(const Chart& chart, std::span<const double> x, std::span<const double> u,
                         const Eigen::MatrixXd& coordinate);
// The three adapted-frame formulas in H^a, V^a.
LieBlocks lie_G_adapted_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                           std::span<const double> u, const BundleVectorField& Z);

enum class ClosedForm {
  complete_lift,                   // any X
  complete_lift_conformal,         // L_X g = f g, mixed-block term read as printed (-grad_k of u_l, zero)
  complete_lift_conformal_df,      // same, with that term read as -(grad_k f) u_l
  vertical_lift,                   // any X
  iota_P,                          // any P
  iota_P_skew,                     // skew-symmetric P
  iota_C,                          // any X
  grad_Y,                          // Killing Y, hh block as printed
  grad_Y_symmetrized,              // Killing Y, hh block with both orders of the second derivative
  affine_sum                       // infinitesimal affine X
};
std::string to_string(ClosedForm form);
// Closed forms applicable to a field of the given kind, preferred first.
std::vector<ClosedForm> closed_forms_for(LiftType kind);

struct ClosedFormResult {
  LieBlocks blocks;
  double hypothesis_residual = 0.0;  // e.g. |L_X g - f g|, 0 when the form has no hypothesis
  double f = 0.0;                    // conformal factor at x (complete_lift_conformal*)
};

ClosedFormResult closed_form_lift_LG_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                                        std::span<const double> u, const BundleVectorField& Z, ClosedForm form,
                                        double hypothesis_tol = 1e-8);

struct BundlePoint {
  std::vector<double> x, u;
};

struct KillingVerdict {
  bool killing = false;
  double max_residual = 0.0;
  BundlePoint witness;
  std::optional<bool> predicted;  // from the iff-condition for recognized kinds
  std::string predicate;          // description of the condition used
  bool agrees() const { return !predicted || *predicted == killing; }
};

// Condition under which a recognized lift is Killing, or nullopt when the field does not meet the
// hypothesis of any stated criterion. `tgrid` is the t-range scanned for conditions on weights.
std::optional<bool> predicted_killing(const WeightProfile& profile, const Chart& chart, const BundleVectorField& Z,
                                      std::span<const BundlePoint> samples, double t_max, std::string* description,
                                      double tol = 1e-9);

KillingVerdict killing_verdict(const WeightProfile& profile, const Chart& chart, const BundleVectorField& Z,
                               std::span<const BundlePoint> samples, double tol = 1e-9, double t_max = 10.0);

}  // namespace gnat
