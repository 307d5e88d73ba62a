#include "gnat/gnatural.hpp"

#include <cmath>
#include <limits>

#include "gnat/tangent_bundle.hpp"

namespace gnat {

static VarList t_vars() {
  static const VarList vars = make_var_list({"t"});
  return vars;
}

WeightProfile::WeightProfile(const std::array<std::string, 6>& texts, std::string name) : name_(std::move(name)) {
  for (std::size_t i = 0; i < 6; ++i) {
    try {
      fns_[i] = parse_expression(texts[i], t_vars());
    } catch (const ParseError& e) {
      throw ParseError(std::string("weight ") + kWeightNames[i] + ": " + e.what(), e.position);
    }
    cache_[i].push_back(fns_[i]);
  }
}

WeightProfile::WeightProfile(const WeightProfile& other) : name_(other.name_), fns_(other.fns_) {
  std::lock_guard<std::mutex> lock(other.mu_);
  cache_ = other.cache_;
}

WeightProfile& WeightProfile::operator=(const WeightProfile& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  name_ = other.name_;
  fns_ = other.fns_;
  cache_ = other.cache_;
  return *this;
}

const ScalarExpr& WeightProfile::derivative(Weight w, int k) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto& c = cache_[static_cast<std::size_t>(w)];
  while (static_cast<int>(c.size()) <= k) c.push_back(differentiate(c.back(), 0));
  return c[static_cast<std::size_t>(k)];
}

double WeightProfile::value(Weight w, double t, int k) const {
  const double v[1] = {t};
  return derivative(w, k).evaluate(std::span<const double>(v, 1));
}

Jet WeightProfile::compose_weight(Weight w, const Jet& t) const {
  if (t.is_constant()) return Jet(value(w, t.value()));
  std::vector<double> d(static_cast<std::size_t>(t.order()) + 1);
  for (int k = 0; k <= t.order(); ++k) d[static_cast<std::size_t>(k)] = value(w, t.value(), k);
  return compose(t, d);
}

ProfileScalars scalars_from_values(const std::array<double, 6>& w, const std::array<double, 6>& w1,
                                   const std::array<double, 6>& w2, double t) {
  ProfileScalars s;
  s.t = t;
  s.w = w;
  s.w1 = w1;
  s.w2 = w2;
  s.a1 = w[0], s.a2 = w[1], s.a3 = w[2], s.b1 = w[3], s.b2 = w[4], s.b3 = w[5];
  s.a1p = w1[0], s.a2p = w1[1], s.a3p = w1[2], s.b1p = w1[3], s.b2p = w1[4], s.b3p = w1[5];
  s.A = s.a1 + s.a3;
  s.B = s.b1 + s.b3;
  s.Ap = s.a1p + s.a3p;
  s.Bp = s.b1p + s.b3p;
  s.a = s.a1 * s.A - s.a2 * s.a2;
  s.ap = s.a1p * s.A + s.a1 * s.Ap - 2.0 * s.a2 * s.a2p;
  s.F1 = s.a1 + t * s.b1;
  s.F2 = s.a2 + t * s.b2;
  s.F3 = s.a3 + t * s.b3;
  s.F = s.F1 * (s.F1 + s.F3) - s.F2 * s.F2;
  s.P = s.a2p - s.b2 / 2.0;
  s.Q = s.a2p + s.b2 / 2.0;
  s.b = s.b1 - s.a1p;

  const double eps = 8.0 * std::numeric_limits<double>::epsilon();
  auto near = [&](double x, double y) { return std::abs(x - y) <= eps * std::max({1.0, std::abs(x), std::abs(y)}); };
  if (!near(s.P + s.Q, 2.0 * s.a2p) || !near(s.Q - s.P, s.b2) || s.A != s.a1 + s.a3 || s.B != s.b1 + s.b3)
    throw std::logic_error("profile scalar identities violated");
  return s;
}

ProfileScalars derived_scalars(const WeightProfile& profile, double t) {
  if (t < 0.0) throw DomainError("derived_scalars: t must be non-negative");
  std::array<double, 6> w{}, w1{}, w2{};
  for (int i = 0; i < 6; ++i) {
    auto k = static_cast<Weight>(i);
    w[static_cast<std::size_t>(i)] = profile.value(k, t, 0);
    w1[static_cast<std::size_t>(i)] = profile.value(k, t, 1);
    w2[static_cast<std::size_t>(i)] = profile.value(k, t, 2);
  }
  return scalars_from_values(w, w1, w2, t);
}

NondegeneracyVerdict nondegeneracy_scan(const WeightProfile& profile, double t0, double t1, int samples) {
  if (samples < 2) throw std::invalid_argument("nondegeneracy_scan: samples must be at least 2");
  NondegeneracyVerdict v;
  for (int i = 0; i < samples; ++i) {
    double t = t0 + (t1 - t0) * i / (samples - 1);
    auto s = derived_scalars(profile, t);
    if (std::abs(s.a) <= kZeroFloor || std::abs(s.F) <= kZeroFloor) {
      v.nondegenerate = false;
      v.t_star = t;
      v.a = s.a;
      v.F = s.F;
      return v;
    }
  }
  return v;
}

WeightProfile preset_profile(const std::string& name) {
  if (name == "sasaki") return WeightProfile({"1", "0", "0", "0", "0", "0"}, "sasaki");
  if (name == "cheeger_gromoll")
    return WeightProfile({"1/(1+t)", "0", "1-1/(1+t)", "1/(1+t)", "0", "1-1/(1+t)"}, "cheeger_gromoll");
  throw std::invalid_argument("unknown profile preset '" + name + "'");
}

WeightProfile profile_from_table(const std::map<std::string, std::string>& table) {
  std::array<std::string, 6> texts;
  for (std::size_t i = 0; i < 6; ++i) {
    auto it = table.find(kWeightNames[i]);
    texts[i] = it == table.end() ? "0" : it->second;
  }
  for (const auto& [key, _] : table) {
    bool known = false;
    for (const char* w : kWeightNames) known = known || key == w;
    if (!known) throw std::invalid_argument("unknown weight '" + key + "' (expected a1 a2 a3 b1 b2 b3)");
  }
  return WeightProfile(texts, "custom");
}

AssembledMetric assemble_G_at(const WeightProfile& profile, const Chart& chart, std::span<const double> x,
                              std::span<const double> u) {
  if (!chart.contains(x)) throw GeometryError("point outside the domain of chart '" + chart.name() + "'");
  BundleJets bj(profile, chart, x, u, 0);
  return {bj.adapted_values(), bj.coordinate_values()};
}

}  // namespace gnat
