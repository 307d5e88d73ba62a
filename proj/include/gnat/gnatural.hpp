#pragma once

#include <Eigen/Dense>
#include <array>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>

#include "gnat/chart.hpp"
#include "gnat/expr.hpp"
#include "gnat/jet.hpp"

namespace gnat {

enum class Weight { a1 = 0, a2, a3, b1, b2, b3 };
inline constexpr std::array<const char*, 6> kWeightNames = {"a1", "a2", "a3", "b1", "b2", "b3"};

class DegenerateMetric : public std::runtime_error {
 public:
  DegenerateMetric(const std::string& msg, double t) : std::runtime_error(msg), t(t) {}
  double t;
};

// The six weight functions of a g-natural metric, each an expression in t = g(u,u).
class WeightProfile {
 public:
  explicit WeightProfile(const std::array<std::string, 6>& texts, std::string name = "custom");
  WeightProfile(const WeightProfile& other);
  WeightProfile& operator=(const WeightProfile& other);

  const std::string& name() const { return name_; }
  const ScalarExpr& fn(Weight w) const { return fns_[static_cast<std::size_t>(w)]; }
  std::string text(Weight w) const { return print_expression(fn(w)); }

  // k-th derivative in t, differentiated symbolically and cached.
  const ScalarExpr& derivative(Weight w, int k) const;
  double value(Weight w, double t, int k = 0) const;
  // Composition a_w(t(x,u)) as a jet: sum_k a_w^(k)(t0)/k! (t - t0)^k.
  Jet compose_weight(Weight w, const Jet& t) const;

 private:
  std::string name_;
  std::array<ScalarExpr, 6> fns_;
  mutable std::mutex mu_;
  mutable std::array<std::deque<ScalarExpr>, 6> cache_;
};

struct ProfileScalars {
  double t = 0.0;
  std::array<double, 6> w{};   // a1 a2 a3 b1 b2 b3
  std::array<double, 6> w1{};  // first derivatives
  std::array<double, 6> w2{};  // second derivatives
  double a1 = 0, a2 = 0, a3 = 0, b1 = 0, b2 = 0, b3 = 0;
  double a1p = 0, a2p = 0, a3p = 0, b1p = 0, b2p = 0, b3p = 0;
  double A = 0, B = 0, Ap = 0, Bp = 0;
  double a = 0, ap = 0;
  double F1 = 0, F2 = 0, F3 = 0, F = 0;
  double P = 0, Q = 0;
  double b = 0;  // b1 - a1'
};

ProfileScalars derived_scalars(const WeightProfile& profile, double t);
// Scalars from raw values (a_j, b_j, first and second derivatives); used for random scalar sweeps.
ProfileScalars scalars_from_values(const std::array<double, 6>& w, const std::array<double, 6>& w1,
                                   const std::array<double, 6>& w2 = {}, double t = 0.0);

struct NondegeneracyVerdict {
  bool nondegenerate = true;
  double t_star = 0.0;  // first failing t
  double a = 0.0, F = 0.0;
};

inline constexpr double kZeroFloor = 1e-12;

NondegeneracyVerdict nondegeneracy_scan(const WeightProfile& profile, double t0, double t1, int samples);

WeightProfile preset_profile(const std::string& name);
WeightProfile profile_from_table(const std::map<std::string, std::string>& table);

struct AssembledMetric {
  Eigen::MatrixXd adapted;     // basis (d_k^h, d_l^v)
  Eigen::MatrixXd coordinate;  // basis (d_k, delta_l)
};

AssembledMetric assemble_G_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                              std::span<const double> u);

}  // namespace gnat
