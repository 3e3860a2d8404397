#pragma once

#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "stefanhomog/catalog.hpp"
#include "stefanhomog/common.hpp"
#include "stefanhomog/config.hpp"
#include "stefanhomog/convex.hpp"
#include "stefanhomog/oscillatory.hpp"

namespace homog {

struct ConditionResult {
  std::string name;
  bool pass = true;
  std::string witness;   // sample point on failure
  double constant = 0.0; // the structural constant found / used
};

struct ValidationReport {
  std::vector<ConditionResult> conditions;

  bool all_pass() const {
    for (const auto& c : conditions)
      if (!c.pass) return false;
    return true;
  }
  const ConditionResult* find(const std::string& name) const {
    for (const auto& c : conditions)
      if (c.name == name) return &c;
    return nullptr;
  }
};

namespace detail {

inline std::string point1(const char* tag, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s=%.6g", tag, v);
  return buf;
}
inline std::string point2(const char* t1, double v1, const char* t2, double v2) {
  return point1(t1, v1) + ", " + point1(t2, v2);
}

// deterministic lattice plus seeded probes of scalar sample values in [-R, R]
inline std::vector<double> scalar_samples(double R, int lattice, std::mt19937_64& rng,
                                          int probes) {
  std::vector<double> s;
  for (int i = 0; i <= lattice; ++i) s.push_back(-R + 2.0 * R * i / lattice);
  std::uniform_real_distribution<double> d(-R, R);
  for (int i = 0; i < probes; ++i) s.push_back(d(rng));
  return s;
}

inline std::vector<Vec> z_samples(int dim, std::mt19937_64& rng, int probes) {
  std::vector<Vec> zs;
  const int m = 13;
  for (int i = 0; i < m; ++i) {
    if (dim == 1) {
      zs.push_back(vec1(double(i) / m));
    } else {
      for (int j = 0; j < m; ++j) zs.push_back(vec2(double(i) / m, double(j) / m));
    }
  }
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int i = 0; i < probes; ++i)
    zs.push_back(dim == 1 ? vec1(d(rng)) : vec2(d(rng), d(rng)));
  return zs;
}

}  // namespace detail

// Sampled verification of the structural hypotheses on a problem spec:
// (Psi2) strict convexity, (Psi3) growth, (Psi4) quadratic lower bound,
// (alpha3) coercivity, (alpha5) continuity, (f3) sublinear source growth,
// and the declared ellipticity bounds (6.1').
inline ValidationReport validate_hypotheses(const ProblemSpec& spec) {
  ValidationReport rep;
  std::mt19937_64 rng(spec.seed);
  const int dim = spec.dim;
  const ConvexPotential& psi = spec.potential;
  ConvexPotential::Growth gr = psi.growth();

  auto zs = detail::z_samples(dim, rng, 32);
  auto us = detail::scalar_samples(10.0, 40, rng, 64);

  // (Psi2) strict convexity at midpoints
  {
    ConditionResult c{"Psi2_strict_convexity"};
    for (std::size_t i = 0; i < us.size() && c.pass; ++i)
      for (std::size_t j = i + 1; j < us.size(); ++j) {
        double a = us[i], b = us[j];
        if (std::abs(a - b) < 1e-3) continue;
        double mid = psi.value_base(0.5 * (a + b));
        double avg = 0.5 * psi.value_base(a) + 0.5 * psi.value_base(b);
        if (!(mid < avg - 1e-14 * (1.0 + std::abs(avg)))) {
          c.pass = false;
          c.witness = detail::point2("u1", a, "u2", b);
          break;
        }
      }
    rep.conditions.push_back(c);
  }

  // (Psi3) growth bound with the potential's constants
  {
    ConditionResult c{"Psi3_growth"};
    c.constant = gr.c;
    for (const Vec& z : zs) {
      double g = psi.multiplier(z);
      for (std::size_t i = 0; i < us.size() && c.pass; ++i)
        for (std::size_t j = 0; j < us.size(); ++j) {
          double l = us[i], m = us[j];
          double lhs = std::abs(psi.value_at(g, l) - psi.value_at(g, m));
          double rhs = std::abs(l - m) *
                       (gr.c * std::max(std::abs(l), std::abs(m)) + gr.h);
          if (lhs > rhs + 1e-9 * (1.0 + rhs)) {
            c.pass = false;
            c.witness = detail::point2("lambda", l, "mu", m) + ", " +
                        detail::point1("z1", z[0]);
            break;
          }
        }
      if (!c.pass) break;
    }
    rep.conditions.push_back(c);
  }

  // (Psi4) quadratic lower bound
  {
    ConditionResult c{"Psi4_lower_bound"};
    c.constant = gr.ctilde;
    for (const Vec& z : zs) {
      double g = psi.multiplier(z);
      double gmin = psi.multiplier_min();
      for (double u : us) {
        // constants were computed with the minimal multiplier
        double lhs = psi.value_at(g, u);
        double rhs = gr.ctilde * u * u + gr.w_lin * u + gr.htilde;
        (void)gmin;
        if (lhs < rhs - 1e-9 * (1.0 + std::abs(rhs))) {
          c.pass = false;
          c.witness = detail::point2("u", u, "z1", z[0]);
          break;
        }
      }
      if (!c.pass) break;
    }
    rep.conditions.push_back(c);
  }

  // flux samples: eta lattice
  std::vector<Vec> etas;
  for (double e0 : {-2.0, -1.0, -0.25, 0.25, 1.0, 2.0}) {
    if (dim == 1) {
      etas.push_back(vec1(e0));
    } else {
      for (double e1 : {-2.0, 0.0, 1.5}) etas.push_back(vec2(e0, e1));
    }
  }
  auto flux_eval = [&](const Vec& z, double u, const Vec& eta) -> Vec {
    if (spec.flux_linear) {
      Mat K = spec.flux_tensor.eval(z);
      if (spec.flux_modulated) K = K.scaled(spec.flux_modulation(u));
      return matvec(K, eta, dim);
    }
    return spec.dissipation.grad_eta(z, eta, dim);
  };

  // (alpha3) coercivity: a(eta) . eta >= c_alpha |eta|^2 (c_alpha may
  // degenerate to 0 for u-modulated fluxes at the zeros of h)
  {
    ConditionResult c{"alpha3_coercivity"};
    double c_alpha = spec.flux_linear
                         ? spec.flux_tensor.lower_bound() * (spec.flux_modulated ? 0.0 : 1.0)
                         : 0.0;
    c.constant = c_alpha;
    for (const Vec& z : zs) {
      for (double u : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
        for (const Vec& eta : etas) {
          Vec a = flux_eval(z, u, eta);
          double lhs = dot(a, eta, dim);
          double rhs = c_alpha * dot(eta, eta, dim);
          if (lhs < rhs - 1e-9 * (1.0 + std::abs(rhs))) {
            c.pass = false;
            c.witness = detail::point2("u", u, "eta1", eta[0]);
            break;
          }
        }
        if (!c.pass) break;
      }
      if (!c.pass) break;
    }
    rep.conditions.push_back(c);
  }

  // (alpha5) continuity: |a(v1,eta1) - a(v2,eta2)| <= d (|v1-v2|^sigma +
  // |eta1-eta2|) on the sample; d is reported, blow-up fails
  {
    ConditionResult c{"alpha5_continuity"};
    double sigma = spec.flux_linear && spec.flux_modulated
                       ? std::min(spec.flux_modulation.hoelder_exponent(), 1.0)
                       : 1.0;
    double d_alpha = 0.0;
    for (const Vec& z : zs) {
      for (double u1 : {-2.0, 0.0, 1.0})
        for (double u2 : {-1.0, 0.5, 3.0})
          for (std::size_t i = 0; i < etas.size(); ++i)
            for (std::size_t j = i; j < etas.size(); ++j) {
              Vec a1 = flux_eval(z, u1, etas[i]);
              Vec a2 = flux_eval(z, u2, etas[j]);
              Vec da{a1[0] - a2[0], a1[1] - a2[1]};
              Vec de{etas[i][0] - etas[j][0], etas[i][1] - etas[j][1]};
              double den = std::pow(std::abs(u1 - u2), sigma) + norm(de, dim);
              if (den < 1e-12) continue;
              d_alpha = std::max(d_alpha, norm(da, dim) / den);
            }
    }
    c.constant = d_alpha;
    if (!(d_alpha < 1e6)) {
      c.pass = false;
      c.witness = "continuity modulus exceeds 1e6 on the sample";
    }
    rep.conditions.push_back(c);
  }

  // (f3) sublinear source growth |f(u)| <= c_f |u|^sigma + h_f, sigma < 1
  {
    ConditionResult c{"f3_source_growth"};
    if (spec.has_source) {
      const double sigma = 0.9;
      double c_f = 0.0, h_f = 0.0;
      double fmax = spec.source_factor.sup_bound();
      for (double u : us) {
        double v = fmax * std::abs(spec.source_nonlinearity(u));
        if (std::abs(u) >= 1.0)
          c_f = std::max(c_f, v / std::pow(std::abs(u), sigma));
        else
          h_f = std::max(h_f, v);
      }
      h_f += spec.source_offset.sup_bound();
      c.constant = c_f;
      for (double u : {1e2, 1e4, 1e6}) {
        for (double uu : {u, -u}) {
          double v = fmax * std::abs(spec.source_nonlinearity(uu));
          double bound = c_f * std::pow(std::abs(uu), sigma) + h_f;
          if (v > bound + 1e-9 * (1.0 + bound)) {
            c.pass = false;
            c.witness = detail::point1("u", uu);
            break;
          }
        }
        if (!c.pass) break;
      }
    }
    rep.conditions.push_back(c);
  }

  // declared ellipticity bounds (6.1'): k0 |xi|^2 <= [K xi].xi <= k1 |xi|^2
  {
    ConditionResult c{"ellipticity_bounds"};
    if (spec.flux_linear ||
        spec.dissipation.kind() == DissipationPotential::Kind::Quadratic) {
      const MatrixField& K =
          spec.flux_linear ? spec.flux_tensor : spec.dissipation.matrix();
      c.constant = K.lower_bound();
      std::uniform_real_distribution<double> d(-1.0, 1.0);
      std::vector<Vec> xis = etas;
      for (int i = 0; i < 32; ++i)
        xis.push_back(dim == 1 ? vec1(d(rng)) : vec2(d(rng), d(rng)));
      for (const Vec& z : zs) {
        Mat m = K.eval(z);
        for (const Vec& xi : xis) {
          double n2 = dot(xi, xi, dim);
          if (n2 < 1e-12) continue;
          double q = quad_form(m, xi, dim);
          if (q < K.lower_bound() * n2 - 1e-9 * n2 ||
              q > K.upper_bound() * n2 + 1e-9 * n2) {
            c.pass = false;
            c.witness = detail::point2("z1", z[0], "xi1", xi[0]);
            break;
          }
        }
        if (!c.pass) break;
      }
    }
    rep.conditions.push_back(c);
  }

  // potential multiplier positivity (enforced at construction; re-checked)
  {
    ConditionResult c{"potential_multiplier_positive"};
    c.constant = psi.multiplier_min();
    if (!(psi.multiplier_min() > 0.0)) {
      c.pass = false;
      c.witness = "min bound of the oscillation multiplier is not positive";
    }
    rep.conditions.push_back(c);
  }

  return rep;
}

}  // namespace homog
