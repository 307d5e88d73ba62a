#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnat/chart.hpp"
#include "gnat/gnatural.hpp"
#include "gnat/lifts_killing.hpp"

namespace gnat {

// Taylor coefficients of Z = Z^a d_a + Z~^a delta_a at (x, 0), as jets in x around the base point.
// Upper index first, then the u-derivative indices. Lowered forms carry g_{al} in the first slot.
struct TaylorCoefficients {
  int n = 0;
  int order = 0;  // highest u-order extracted
  std::vector<double> x;
  std::shared_ptr<const LocalGeometry> geo;

  Tensor<Jet> X, Y;                  // "u"
  Tensor<Jet> K, E, F, G;            // horizontal orders 1..4
  Tensor<Jet> Pt, Q, S3, V;          // vertical orders 1..4 (P~, Q, S_{pqr}, V)
  Tensor<Jet> P, S, T, W, Zc;        // derived, upper index first
  Tensor<Jet> Xl, Yl, Kl, El, Fl, Gl, Pl, Sl, Tl, Wl, Zl;  // lowered
};

// Symbolic u-derivatives of the components at u = 0, up to max_order (<= 4).
TaylorCoefficients extract_coefficients(const BundleVectorField& Z, const Chart& chart, std::span<const double> x,
                                        int max_order = 4);

enum class SplitCase { case1 = 1, case2 = 2, case3 = 3, case4 = 4, none = 0 };

struct CaseVerdict {
  SplitCase which = SplitCase::none;
  double a = 0, b = 0, disc = 0, a1a2b2 = 0;  // disc = 2 b a2 - a1 b2, b = b1 - a1'
  bool a1_zero = false, a2_zero = false, b2_zero = false, b_zero = false, disc_zero = false;
};

CaseVerdict classify_case(const ProfileScalars& s, double zero_tol = 1e-12);
std::string to_string(SplitCase c);

struct Macierz1Solution {
  Eigen::Matrix4d matrix;
  double det = 0.0;
  bool unique_zero = true;
  Eigen::MatrixXd kernel;  // columns in the order (Xbar, Ybar, Sbar, Kbar)
};
Macierz1Solution solve_macierz1(const ProfileScalars& s, double zero_tol = 1e-12);

// beta, S1..S4, Q1..Q4, Q2_theorem, psi. Entries dividing by a1 are omitted when a1 = 0.
std::map<std::string, double> scalar_coefficients(const ProfileScalars& s, int dim);

enum class Verdict { pass, fail, not_applicable, skipped };
std::string to_string(Verdict v);

struct IdentityReport {
  std::string identity_id;
  double residual = 0.0;
  double scale = 0.0;
  Verdict verdict = Verdict::not_applicable;
  std::string note;
  std::string inputs_digest;
};

struct IdentityInfo {
  std::string key;
  std::string family;       // base, lemma, scalar, case1..case4
  std::string description;  // content of the identity
  int order = 0;            // u-order of coefficients required
};

const std::vector<IdentityInfo>& identity_registry();

IdentityReport evaluate_identity(const std::string& id, const TaylorCoefficients& c, const ProfileScalars& s,
                                 double tol = 1e-7, double zero_tol = 1e-12);
std::vector<IdentityReport> evaluate_all(const TaylorCoefficients& c, const ProfileScalars& s, double tol = 1e-7,
                                         double zero_tol = 1e-12);
// Pure algebraic identities in the weights only.
IdentityReport evaluate_scalar_identity(const std::string& id, const ProfileScalars& s, int dim, double tol = 1e-12);

// Printed left sides of I1..III4 against u-derivatives at u = 0 of the generic adapted Lie blocks.
// From order 3 on the printed forms omit 2 g_pq times the order m-2 identity with differentiated weights;
// max_diff includes that completion, printed_gap does not.
struct DerivationCheck {
  std::string id;
  double max_diff = 0.0;
  double printed_gap = 0.0;
  double omitted = 0.0;
  double scale = 0.0;
};
std::vector<DerivationCheck> derivation_diagnostic(const WeightProfile& profile, const Chart& chart,
                                                   std::span<const double> x, const BundleVectorField& Z);

struct WalkerResult {
  bool consistent = true;
  std::vector<int> witness;  // (l, h, k) of the first nonvanishing combination
  double max_value = 0.0;
};
WalkerResult walker_check(const Eigen::VectorXd& A, const Eigen::MatrixXd& B, double tol = 1e-12);

struct Apen3Result {
  bool hypothesis = false;
  double hypothesis_residual = 0.0;
  bool conclusions = false;  // A = 0, B + F = 0, nF - tr F g = 0 (asserted only under the hypothesis)
  double conclusion_residual = 0.0;
};
Apen3Result apen3_check(const Eigen::MatrixXd& g, const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& F, double tol = 1e-10);

TensorValue kulkarni_nomizu(const TensorValue& A, const TensorValue& B);
bool generalized_curvature_predicate(const TensorValue& B, double tol = 1e-12);
// (R.T)(X1..Xk; X, Y) = nabla_Y nabla_X T - nabla_X nabla_Y T; slots (T slots, X, Y).
TensorValue r_dot_t(const Chart& chart, std::span<const double> x, const std::vector<ScalarExpr>& T,
                    const std::string& variance);

}  // namespace gnat
