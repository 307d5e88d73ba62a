#include "gnat/jet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace gnat {

const JetSpace* JetSpace::get(int nvars, int order) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<JetSpace>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{nvars, order}];
  if (!slot) slot.reset(new JetSpace(nvars, order));
  return slot.get();
}

static void enumerate(int nvars, int degree, int var, std::vector<std::uint8_t>& cur,
                      std::vector<std::vector<std::uint8_t>>& out) {
  if (var == nvars - 1) {
    cur[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(degree);
    out.push_back(cur);
    return;
  }
  for (int e = degree; e >= 0; --e) {
    cur[static_cast<std::size_t>(var)] = static_cast<std::uint8_t>(e);
    enumerate(nvars, degree - e, var + 1, cur, out);
  }
  cur[static_cast<std::size_t>(var)] = 0;
}

JetSpace::JetSpace(int nvars, int order) : nvars_(nvars), order_(order) {
  if (nvars < 1 || order < 0) throw std::invalid_argument("JetSpace: bad dimensions");
  degree_start_.push_back(0);
  for (int d = 0; d <= order; ++d) {
    std::vector<std::uint8_t> cur(static_cast<std::size_t>(nvars), 0);
    enumerate(nvars, d, 0, cur, exps_);
    degree_start_.push_back(static_cast<int>(exps_.size()));
    while (degree_.size() < exps_.size()) degree_.push_back(d);
  }
  std::map<std::vector<std::uint8_t>, int> lookup;
  for (std::size_t k = 0; k < exps_.size(); ++k) lookup[exps_[k]] = static_cast<int>(k);
  raise_.assign(static_cast<std::size_t>(nvars), std::vector<int>(exps_.size(), -1));
  for (int i = 0; i < nvars; ++i) {
    for (std::size_t k = 0; k < exps_.size(); ++k) {
      if (degree_[k] == order) continue;
      auto e = exps_[k];
      e[static_cast<std::size_t>(i)]++;
      raise_[static_cast<std::size_t>(i)][k] = lookup.at(e);
    }
  }
  for (std::size_t i = 0; i < exps_.size(); ++i) {
    for (std::size_t j = 0; j < exps_.size(); ++j) {
      if (degree_[i] + degree_[j] > order) continue;
      std::vector<std::uint8_t> e(static_cast<std::size_t>(nvars));
      for (std::size_t v = 0; v < e.size(); ++v) e[v] = static_cast<std::uint8_t>(exps_[i][v] + exps_[j][v]);
      products_.push_back({static_cast<int>(i), static_cast<int>(j), lookup.at(e)});
    }
  }
  std::stable_sort(products_.begin(), products_.end(), [](const Term& a, const Term& b) { return a.k < b.k; });
  product_end_.assign(exps_.size() + 1, 0);
  for (std::size_t s = 0; s <= exps_.size(); ++s) {
    product_end_[s] = static_cast<std::size_t>(
        std::lower_bound(products_.begin(), products_.end(), static_cast<int>(s),
                         [](const Term& t, int v) { return t.k < v; }) -
        products_.begin());
  }
}

int JetSpace::index_of(const std::vector<std::uint8_t>& exps) const {
  auto it = std::find(exps_.begin(), exps_.end(), exps);
  return it == exps_.end() ? -1 : static_cast<int>(it - exps_.begin());
}

std::size_t JetSpace::products_below(int size) const { return product_end_[static_cast<std::size_t>(size)]; }

// ---------------------------------------------------------------------------

Jet Jet::variable(const JetSpace* space, int i, double at, int order) {
  Jet j(space, order);
  j.coef_.assign(static_cast<std::size_t>(space->size(order)), 0.0);
  j.coef_[0] = at;
  if (order >= 1) j.coef_[static_cast<std::size_t>(1 + i)] = 1.0;
  return j;
}

Jet Jet::constant(const JetSpace* space, double c, int order) {
  Jet j(space, order);
  j.coef_.assign(static_cast<std::size_t>(space->size(order)), 0.0);
  j.coef_[0] = c;
  return j;
}

int Jet::order() const { return space_ ? order_ : -1; }

double Jet::coef(int k) const {
  if (!space_) return k == 0 ? value_ : 0.0;
  if (k >= static_cast<int>(coef_.size())) throw std::out_of_range("Jet: coefficient beyond truncation order");
  return coef_[static_cast<std::size_t>(k)];
}

double Jet::partial(int i) const {
  if (!space_) return 0.0;
  if (order_ < 1) throw std::out_of_range("Jet: first derivative beyond truncation order");
  return coef_[static_cast<std::size_t>(1 + i)];
}

double Jet::partial(int i, int j) const {
  if (!space_) return 0.0;
  if (order_ < 2) throw std::out_of_range("Jet: second derivative beyond truncation order");
  int k = space_->raise(j, 1 + i);
  return coef_[static_cast<std::size_t>(k)] * (i == j ? 2.0 : 1.0);
}

Jet Jet::derivative(int i) const {
  if (!space_) return Jet(0.0);
  if (order_ < 1) throw std::out_of_range("Jet: derivative beyond truncation order");
  Jet d(space_, order_ - 1);
  int n = space_->size(order_ - 1);
  d.coef_.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    int up = space_->raise(i, k);
    double mult = space_->exponents(up)[static_cast<std::size_t>(i)];
    d.coef_[static_cast<std::size_t>(k)] = mult * coef_[static_cast<std::size_t>(up)];
  }
  return d;
}

Jet Jet::truncated(int order) const {
  if (!space_ || order >= order_) return *this;
  Jet t(space_, order);
  t.coef_.assign(coef_.begin(), coef_.begin() + space_->size(order));
  return t;
}

static const JetSpace* common_space(const Jet& a, const Jet& b) {
  if (a.space() && b.space() && a.space() != b.space()) throw std::invalid_argument("Jet: mixed spaces");
  return a.space() ? a.space() : b.space();
}

Jet& Jet::operator+=(const Jet& o) {
  if (!o.space_) {
    if (space_) coef_[0] += o.value_;
    else value_ += o.value_;
    return *this;
  }
  if (!space_) {
    double c = value_;
    *this = o;
    coef_[0] += c;
    return *this;
  }
  common_space(*this, o);
  if (o.order_ < order_) *this = truncated(o.order_);
  for (std::size_t k = 0; k < coef_.size(); ++k) coef_[k] += o.coef_[k];
  return *this;
}

Jet& Jet::operator-=(const Jet& o) { return *this += -o; }

Jet operator-(const Jet& a) {
  Jet r = a;
  if (!r.space_) r.value_ = -r.value_;
  for (double& c : r.coef_) c = -c;
  return r;
}

Jet operator*(const Jet& a, const Jet& b) {
  if (!a.space_ || !b.space_) {
    const Jet& s = a.space_ ? b : a;
    const Jet& j = a.space_ ? a : b;
    if (!j.space_) return Jet(a.value_ * b.value_);
    Jet r = j;
    for (double& c : r.coef_) c *= s.value_;
    return r;
  }
  const JetSpace* sp = common_space(a, b);
  int order = std::min(a.order_, b.order_);
  Jet r(sp, order);
  int n = sp->size(order);
  r.coef_.assign(static_cast<std::size_t>(n), 0.0);
  const auto& terms = sp->products();
  std::size_t end = sp->products_below(n);
  for (std::size_t t = 0; t < end; ++t) {
    const auto& p = terms[t];
    r.coef_[static_cast<std::size_t>(p.k)] += a.coef_[static_cast<std::size_t>(p.i)] * b.coef_[static_cast<std::size_t>(p.j)];
  }
  return r;
}

Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }

Jet compose(const Jet& x, std::span<const double> derivs) {
  if (!x.space_) return Jet(derivs[0]);
  int order = x.order_;
  if (static_cast<int>(derivs.size()) < order + 1) throw std::invalid_argument("compose: too few derivatives");
  Jet h = x;
  h.coef_[0] = 0.0;
  Jet r = Jet::constant(x.space_, derivs[0], order);
  Jet hp = h;
  double fact = 1.0;
  for (int k = 1; k <= order; ++k) {
    fact *= k;
    double c = derivs[static_cast<std::size_t>(k)] / fact;
    for (std::size_t i = 0; i < r.coef_.size(); ++i) r.coef_[i] += c * hp.coef_[i];
    if (k < order) hp = hp * h;
  }
  return r;
}

static int jet_order(const Jet& x) { return std::max(x.order(), 0); }

Jet rational_power(const Jet& x, long num, long den) {
  if (x.is_constant()) return Jet(detail::rational_pow(x.value(), num, den));
  if (den == 1 && num >= 0) {
    Jet r = Jet::constant(x.space(), 1.0, x.order());
    Jet base = x;
    for (long e = num; e > 0; e >>= 1) {
      if (e & 1) r = r * base;
      if (e > 1) base = base * base;
    }
    return r;
  }
  int order = jet_order(x);
  double a = x.value();
  double r = static_cast<double>(num) / static_cast<double>(den);
  std::vector<double> d(static_cast<std::size_t>(order) + 1);
  d[0] = detail::rational_pow(a, num, den);
  if (a == 0.0 && order > 0) throw DomainError("non-smooth power at zero");
  double falling = 1.0;
  for (int k = 1; k <= order; ++k) {
    falling *= r - (k - 1);
    d[static_cast<std::size_t>(k)] = falling * d[0] / std::pow(a, k);
  }
  return compose(x, d);
}

Jet operator/(const Jet& a, const Jet& b) {
  if (b.value() == 0.0) throw DomainError("division by zero");
  if (!b.space()) return a * Jet(1.0 / b.value());
  return a * rational_power(b, -1, 1);
}

Jet unary_function(Op fn, const Jet& x) {
  double a = x.value();
  if (x.is_constant()) return Jet(detail::apply_unary(fn, a));
  int order = jet_order(x);
  std::vector<double> d(static_cast<std::size_t>(order) + 1);
  switch (fn) {
    case Op::Sin:
    case Op::Cos: {
      double s = std::sin(a), c = std::cos(a);
      const double cyc_sin[4] = {s, c, -s, -c};
      const double cyc_cos[4] = {c, -s, -c, s};
      for (int k = 0; k <= order; ++k)
        d[static_cast<std::size_t>(k)] = fn == Op::Sin ? cyc_sin[k % 4] : cyc_cos[k % 4];
      return compose(x, d);
    }
    case Op::Tan: {
      if (std::cos(a) == 0.0) throw DomainError("tan at a pole");
      return unary_function(Op::Sin, x) / unary_function(Op::Cos, x);
    }
    case Op::Exp:
      std::fill(d.begin(), d.end(), std::exp(a));
      return compose(x, d);
    case Op::Log: {
      if (!(a > 0.0)) throw DomainError("log of a non-positive number");
      d[0] = std::log(a);
      double f = 1.0;
      for (int k = 1; k <= order; ++k) {
        d[static_cast<std::size_t>(k)] = ((k % 2) ? 1.0 : -1.0) * f / std::pow(a, k);
        f *= k;
      }
      return compose(x, d);
    }
    case Op::Sqrt:
      if (a < 0.0) throw DomainError("sqrt of a negative number");
      return rational_power(x, 1, 2);
    default: throw std::logic_error("unary_function: not a function");
  }
}

}  // namespace gnat
