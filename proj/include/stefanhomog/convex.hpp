#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stefanhomog/catalog.hpp"
#include "stefanhomog/common.hpp"
#include "stefanhomog/oscillatory.hpp"

namespace homog {

struct Interval {
  double lo = 0.0, hi = 0.0;
  bool contains(double w, double tol = 0.0) const { return w >= lo - tol && w <= hi + tol; }
  double clamp(double w) const { return std::min(std::max(w, lo), hi); }
  double width() const { return hi - lo; }
};

// V = H(u) = int_0^u h, with h a nonnegative catalog density; H strictly
// increasing, H(0) = 0.
class KirchhoffMap {
 public:
  KirchhoffMap() : h_{ScalarKind::Constant, 1.0} {}
  explicit KirchhoffMap(ScalarFunction h) : h_(h) {
    if (!h.nonnegative())
      throw std::invalid_argument("Kirchhoff density must be nonnegative a.e.");
    if (h.kind == ScalarKind::Constant && h.param <= 0.0)
      throw std::invalid_argument("Kirchhoff density must be positive");
  }

  double forward(double u) const { return h_.antiderivative(u); }
  double density(double u) const { return h_(u); }
  const ScalarFunction& h() const { return h_; }
  bool is_identity() const {
    return h_.kind == ScalarKind::Constant && h_.param == 1.0;
  }

  double inverse(double V) const {
    switch (h_.kind) {
      case ScalarKind::Constant: return V / h_.param;
      case ScalarKind::Power:
        return std::copysign(std::pow(std::abs(V), 1.0 / h_.param), V);
      default: break;
    }
    // Monotone bisection + Newton fallback.
    double lo = 0.0, hi = 0.0;
    double step = 1.0;
    if (V >= 0.0) {
      while (forward(hi) < V) { hi += step; step *= 2.0; }
    } else {
      while (forward(lo) > V) { lo -= step; step *= 2.0; }
    }
    if (V >= 0.0) lo = 0.0; else hi = 0.0;
    double u = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      double f = forward(u) - V;
      if (f > 0) hi = u; else lo = u;
      double d = density(u);
      double un = d > 1e-14 ? u - f / d : 0.5 * (lo + hi);
      u = (un > lo && un < hi) ? un : 0.5 * (lo + hi);
      if (hi - lo < 1e-15 * (1.0 + std::abs(V))) break;
    }
    return u;
  }

 private:
  ScalarFunction h_;
};

// Scalar convex potential Psi(z, x, u) = g(z) Psi_base(u) with g >= g0 > 0.
// Base kinds: quadratic a u^2/2; Stefan u^2/2 + L u^+; Kirchhoff transform
// of a base potential; tabulated piecewise-quadratic (strictly increasing
// piecewise-linear derivative).
class ConvexPotential {
 public:
  enum class Kind { Quadratic, Stefan, Kirchhoff, Tabulated };

  static ConvexPotential quadratic(double a) {
    if (!(a > 0.0)) throw std::invalid_argument("quadratic potential requires a > 0");
    ConvexPotential p;
    p.kind_ = Kind::Quadratic;
    p.a_ = a;
    return p;
  }

  static ConvexPotential stefan(double latent) {
    if (!(latent > 0.0)) throw std::invalid_argument("stefan potential requires L > 0");
    ConvexPotential p;
    p.kind_ = Kind::Stefan;
    p.latent_ = latent;
    return p;
  }

  // Potential whose subdifferential at V is the base subdifferential at
  // H^{-1}(V): the transformed inclusion of the Kirchhoff substitution.
  static ConvexPotential kirchhoff_of(ConvexPotential base, KirchhoffMap map) {
    if (base.kind_ == Kind::Kirchhoff)
      throw std::invalid_argument("nested Kirchhoff potentials not supported");
    ConvexPotential p;
    p.kind_ = Kind::Kirchhoff;
    p.base_ = std::make_shared<ConvexPotential>(std::move(base));
    p.map_ = map;
    return p;
  }

  // breakpoints: strictly increasing knots of the derivative; slopes: the
  // strictly increasing derivative values there.  The derivative is the
  // piecewise-linear interpolant (linearly extended outside), so the
  // potential is strictly convex piecewise-quadratic.
  static ConvexPotential tabulated(std::vector<double> breakpoints,
                                   std::vector<double> slopes) {
    if (breakpoints.size() < 2 || breakpoints.size() != slopes.size())
      throw std::invalid_argument("tabulated potential needs >= 2 matching knots");
    for (size_t i = 1; i < breakpoints.size(); ++i) {
      if (!(breakpoints[i] > breakpoints[i - 1]))
        throw std::invalid_argument("tabulated breakpoints must increase");
      if (!(slopes[i] > slopes[i - 1]))
        throw std::invalid_argument("tabulated derivative must strictly increase");
    }
    ConvexPotential p;
    p.kind_ = Kind::Tabulated;
    p.knots_ = std::move(breakpoints);
    p.slopes_ = std::move(slopes);
    return p;
  }

  ConvexPotential with_oscillation(OscillatoryField g) const {
    if (!(g.min_bound() > 0.0))
      throw std::invalid_argument("potential multiplier must be bounded below by g0 > 0");
    ConvexPotential p = *this;
    p.g_ = std::move(g);
    return p;
  }

  Kind kind() const { return kind_; }
  bool has_oscillation() const { return g_.has_value(); }
  const OscillatoryField& oscillation() const { return *g_; }
  double multiplier(const Vec& z) const { return g_ ? (*g_)(z) : 1.0; }
  double multiplier_min() const { return g_ ? g_->min_bound() : 1.0; }
  double multiplier_max() const { return g_ ? g_->sup_bound() : 1.0; }
  double quadratic_coeff() const { return a_; }
  double latent_heat() const { return latent_; }
  const ConvexPotential& base_potential() const { return *base_; }
  const KirchhoffMap& kirchhoff_map() const { return map_; }

  // ---- base (multiplier-free) operations; gval variants scale by g(z) ----

  double value_base(double u) const {
    switch (kind_) {
      case Kind::Quadratic: return 0.5 * a_ * u * u;
      case Kind::Stefan: return 0.5 * u * u + latent_ * std::max(u, 0.0);
      case Kind::Kirchhoff: return kirchhoff_value(u);
      case Kind::Tabulated: return tabulated_value(u);
    }
    return 0.0;
  }

  Interval subdiff_base(double u) const {
    switch (kind_) {
      case Kind::Quadratic: return {a_ * u, a_ * u};
      case Kind::Stefan:
        if (u < 0.0) return {u, u};
        if (u > 0.0) return {u + latent_, u + latent_};
        return {0.0, latent_};
      case Kind::Kirchhoff: return base_->subdiff_base(map_.inverse(u));
      case Kind::Tabulated: {
        double s = tabulated_slope(u);
        return {s, s};
      }
    }
    return {};
  }

  // Unique u with w in subdiff(u): derivative of the conjugate.  Monotone
  // nondecreasing in w, flat exactly on subdifferential gaps.
  double beta_base(double w) const {
    switch (kind_) {
      case Kind::Quadratic: return w / a_;
      case Kind::Stefan:
        if (w < 0.0) return w;
        if (w > latent_) return w - latent_;
        return 0.0;
      case Kind::Kirchhoff: return map_.forward(base_->beta_base(w));
      case Kind::Tabulated: return tabulated_beta(w);
    }
    return 0.0;
  }

  // d/dw of beta_base; zero on subdifferential gaps.
  double beta_slope_base(double w) const {
    switch (kind_) {
      case Kind::Quadratic: return 1.0 / a_;
      case Kind::Stefan: return (w >= 0.0 && w <= latent_) ? 0.0 : 1.0;
      case Kind::Kirchhoff: {
        double u = base_->beta_base(w);
        return map_.density(u) * base_->beta_slope_base(w);
      }
      case Kind::Tabulated: return tabulated_beta_slope(w);
    }
    return 0.0;
  }

  // Fenchel conjugate through the maximizer u* = beta(w):
  // Psi*(w) = w beta(w) - Psi(beta(w)).
  double conjugate_base(double w) const {
    double u = beta_base(w);
    return w * u - value_base(u);
  }

  // Unique u solving u + tau s = v for some s in subdiff(u).
  double resolvent_base(double v, double tau) const {
    if (!(tau > 0.0)) throw std::invalid_argument("resolvent requires tau > 0");
    switch (kind_) {
      case Kind::Quadratic: return v / (1.0 + tau * a_);
      case Kind::Stefan:
        if (v < 0.0) return v / (1.0 + tau);
        if (v > tau * latent_) return (v - tau * latent_) / (1.0 + tau);
        return 0.0;
      default: return resolvent_bisect(v, tau);
    }
  }

  // ---- operations with the oscillation multiplier ----

  double value(const Vec& z, const Vec& /*x*/, double u) const {
    return multiplier(z) * value_base(u);
  }
  Interval subdifferential(const Vec& z, const Vec& /*x*/, double u) const {
    double g = multiplier(z);
    Interval s = subdiff_base(u);
    return {g * s.lo, g * s.hi};
  }
  double conjugate(const Vec& z, const Vec& /*x*/, double w) const {
    double g = multiplier(z);
    return g * conjugate_base(w / g);
  }
  double beta(const Vec& z, const Vec& /*x*/, double w) const {
    return beta_base(w / multiplier(z));
  }
  double beta_slope(const Vec& z, const Vec& /*x*/, double w) const {
    double g = multiplier(z);
    return beta_slope_base(w / g) / g;
  }
  double resolvent(const Vec& z, const Vec& /*x*/, double v, double tau) const {
    return resolvent_base(v, tau * multiplier(z));
  }

  // gval-parameterized variants for node loops with precomputed multipliers.
  double value_at(double gval, double u) const { return gval * value_base(u); }
  Interval subdiff_at(double gval, double u) const {
    Interval s = subdiff_base(u);
    return {gval * s.lo, gval * s.hi};
  }
  double conjugate_at(double gval, double w) const {
    return gval * conjugate_base(w / gval);
  }
  double beta_at(double gval, double w) const { return beta_base(w / gval); }
  double beta_slope_at(double gval, double w) const {
    return beta_slope_base(w / gval) / gval;
  }

  // Copy without the oscillation multiplier (g stripped, not averaged).
  ConvexPotential without_oscillation() const {
    ConvexPotential p = *this;
    p.g_.reset();
    return p;
  }

  // Averaged potential: mean(g) Psi_base; strict convexity is preserved.
  ConvexPotential averaged() const {
    ConvexPotential p = *this;
    if (g_) p.g_ = OscillatoryField::constant(g_->dimension(), g_->mean());
    return p;
  }

  // Fenchel gap Psi(u) + Psi*(w) - u w; zero iff w in subdiff(u).
  double fenchel_gap_at(double gval, double u, double w) const {
    return value_at(gval, u) + conjugate_at(gval, w) - u * w;
  }

  // Growth constants for the structural hypotheses (Lipschitz-in-growth
  // bound |Psi(l)-Psi(m)| <= |l-m| (c max(|l|,|m|) + h), quadratic lower
  // bound Psi >= ctilde u^2 + w_lin u + htilde), including the multiplier.
  struct Growth {
    double c = 1.0, h = 0.0;
    double ctilde = 0.5, w_lin = 0.0, htilde = 0.0;
  };
  Growth growth() const {
    Growth gr;
    double gmin = multiplier_min(), gmax = multiplier_max();
    switch (kind_) {
      case Kind::Quadratic:
        gr.c = gmax * a_;
        gr.h = 0.0;
        gr.ctilde = 0.5 * gmin * a_;
        break;
      case Kind::Stefan:
        gr.c = gmax;
        gr.h = gmax * latent_;
        gr.ctilde = 0.5 * gmin;
        break;
      case Kind::Tabulated: {
        double smax = 0.0, smin = 1e300;
        for (size_t i = 1; i < knots_.size(); ++i) {
          double sl = (slopes_[i] - slopes_[i - 1]) / (knots_[i] - knots_[i - 1]);
          smax = std::max(smax, sl);
          smin = std::min(smin, sl);
        }
        double s0 = tabulated_slope(0.0);
        gr.c = gmax * smax;
        gr.h = gmax * std::abs(s0);
        gr.ctilde = 0.5 * gmin * smin;
        gr.w_lin = gmin * s0;
        gr.htilde = gmin * value_base(0.0);
        break;
      }
      case Kind::Kirchhoff: {
        // Sampled estimate on [-10, 10]: the Kirchhoff family is only used
        // where the validator re-checks the constants anyway.
        double c = 0.0, h = std::max(std::abs(subdiff_base(0.0).lo),
                                     std::abs(subdiff_base(0.0).hi));
        double ctilde = 1e300;
        for (int i = 1; i <= 100; ++i) {
          double u = 0.1 * i;
          for (double uu : {u, -u}) {
            double s = std::max(std::abs(subdiff_base(uu).lo), std::abs(subdiff_base(uu).hi));
            c = std::max(c, (s - h) / std::abs(uu));
            ctilde = std::min(ctilde, value_base(uu) / (uu * uu));
          }
        }
        gr.c = gmax * std::max(c, 1e-6);
        gr.h = gmax * h;
        gr.ctilde = gmin * std::max(ctilde, 1e-12);
        break;
      }
    }
    return gr;
  }

 private:
  double kirchhoff_value(double V) const {
    // Psi~(V) = int_0^V s_base(H^{-1}(sigma)) d sigma
    //         = int_0^{H^{-1}(V)} s_base(u) h(u) du  (substitution).
    double ub = map_.inverse(V);
    auto f = [&](double u) {
      Interval s = base_->subdiff_base(u);
      return 0.5 * (s.lo + s.hi) * map_.density(u);
    };
    return adaptive_simpson(f, 0.0, ub, 1e-12, 24);
  }

  template <class F>
  static double adaptive_simpson(F f, double a, double b, double tol, int depth) {
    double c = 0.5 * (a + b);
    double fa = f(a), fb = f(b), fc = f(c);
    double whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    return simpson_rec(f, a, b, fa, fb, fc, whole, tol, depth);
  }
  template <class F>
  static double simpson_rec(F f, double a, double b, double fa, double fb,
                            double fc, double whole, double tol, int depth) {
    double c = 0.5 * (a + b);
    double d = 0.5 * (a + c), e = 0.5 * (c + b);
    double fd = f(d), fe = f(e);
    double left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    double right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
      return left + right + (left + right - whole) / 15.0;
    return simpson_rec(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1);
  }

  double tabulated_slope(double u) const {
    const auto& b = knots_;
    const auto& s = slopes_;
    size_t k = b.size();
    if (u <= b.front()) {
      double sl = (s[1] - s[0]) / (b[1] - b[0]);
      return s[0] + sl * (u - b[0]);
    }
    if (u >= b.back()) {
      double sl = (s[k - 1] - s[k - 2]) / (b[k - 1] - b[k - 2]);
      return s[k - 1] + sl * (u - b[k - 1]);
    }
    size_t i = std::upper_bound(b.begin(), b.end(), u) - b.begin() - 1;
    double t = (u - b[i]) / (b[i + 1] - b[i]);
    return s[i] + t * (s[i + 1] - s[i]);
  }

  double tabulated_value(double u) const {
    // int_0^u of the piecewise-linear derivative, accumulated segmentwise.
    double lo = std::min(0.0, u), hi = std::max(0.0, u);
    double acc = 0.0;
    // segment boundaries clipped to [lo, hi]
    std::vector<double> pts{lo};
    for (double k : knots_)
      if (k > lo && k < hi) pts.push_back(k);
    pts.push_back(hi);
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
      double a = pts[i], b2 = pts[i + 1];
      acc += 0.5 * (tabulated_slope(a) + tabulated_slope(b2)) * (b2 - a);
    }
    return u >= 0.0 ? acc : -acc;
  }

  double tabulated_beta(double w) const {
    const auto& b = knots_;
    const auto& s = slopes_;
    size_t k = b.size();
    if (w <= s.front()) {
      double sl = (s[1] - s[0]) / (b[1] - b[0]);
      return b[0] + (w - s[0]) / sl;
    }
    if (w >= s.back()) {
      double sl = (s[k - 1] - s[k - 2]) / (b[k - 1] - b[k - 2]);
      return b[k - 1] + (w - s[k - 1]) / sl;
    }
    size_t i = std::upper_bound(s.begin(), s.end(), w) - s.begin() - 1;
    double t = (w - s[i]) / (s[i + 1] - s[i]);
    return b[i] + t * (b[i + 1] - b[i]);
  }

  double tabulated_beta_slope(double w) const {
    const auto& b = knots_;
    const auto& s = slopes_;
    size_t k = b.size();
    size_t i;
    if (w <= s.front()) i = 0;
    else if (w >= s.back()) i = k - 2;
    else i = std::upper_bound(s.begin(), s.end(), w) - s.begin() - 1;
    return (b[i + 1] - b[i]) / (s[i + 1] - s[i]);
  }

  double resolvent_bisect(double v, double tau) const {
    Interval s0 = subdiff_base(0.0);
    double lo = std::min(0.0, v - tau * s0.hi) - 1.0;
    double hi = std::max(0.0, v - tau * s0.lo) + 1.0;
    // classify(u): -1 if u too small, +1 if too big, 0 if solution
    auto classify = [&](double u) {
      Interval s = subdiff_base(u);
      if (u + tau * s.hi < v) return -1;
      if (u + tau * s.lo > v) return +1;
      return 0;
    };
    while (classify(lo) > 0) lo -= std::abs(lo) + 1.0;
    while (classify(hi) < 0) hi += std::abs(hi) + 1.0;
    double u = 0.5 * (lo + hi);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(v)); ++it) {
      u = 0.5 * (lo + hi);
      int c = classify(u);
      if (c == 0) break;
      if (c < 0) lo = u; else hi = u;
    }
    return u;
  }

  Kind kind_ = Kind::Quadratic;
  double a_ = 1.0;
  double latent_ = 1.0;
  std::shared_ptr<ConvexPotential> base_;
  KirchhoffMap map_;
  std::vector<double> knots_, slopes_;
  std::optional<OscillatoryField> g_;
};

}  // namespace homog
