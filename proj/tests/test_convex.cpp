#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "stefanhomog/convex.hpp"

using namespace homog;

namespace {

// Brute-force Fenchel conjugate: sup over a fine u-grid of w u - Psi(u).
double conjugate_oracle(const ConvexPotential& psi, double w, double umax = 30.0) {
  double best = -1e300;
  const int n = 60000;
  for (int i = 0; i <= n; ++i) {
    double u = -umax + 2.0 * umax * i / n;
    best = std::max(best, w * u - psi.value_base(u));
  }
  return best;
}

std::vector<double> lattice(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

TEST_CASE("stefan conjugate has the classical three-branch closed form") {
  const double L = 1.5;
  ConvexPotential psi = ConvexPotential::stefan(L);
  auto closed = [&](double w) {
    if (w <= 0.0) return 0.5 * w * w;
    if (w <= L) return 0.0;
    return 0.5 * (w - L) * (w - L);
  };
  for (double w : lattice(-4.0, 5.0, 181)) {
    CHECK(psi.conjugate_base(w) == doctest::Approx(closed(w)).epsilon(1e-12));
    // independent sup oracle
    CHECK(psi.conjugate_base(w) == doctest::Approx(conjugate_oracle(psi, w)).epsilon(1e-6));
  }
}

TEST_CASE("fenchel identity holds along the graph of the subdifferential") {
  std::vector<ConvexPotential> pots;
  pots.push_back(ConvexPotential::quadratic(2.0));
  pots.push_back(ConvexPotential::stefan(1.0));
  pots.push_back(ConvexPotential::tabulated({-1.0, 0.0, 1.0}, {-2.0, 0.5, 3.0}));
  pots.push_back(ConvexPotential::kirchhoff_of(
      ConvexPotential::quadratic(1.0), KirchhoffMap(make_scalar("power", 2.0))));
  for (const auto& psi : pots) {
    for (double u : lattice(-3.0, 3.0, 100)) {
      Interval s = psi.subdiff_base(u);
      for (double w : {s.lo, s.hi, 0.5 * (s.lo + s.hi)}) {
        double gap = psi.value_base(u) + psi.conjugate_base(w) - u * w;
        CHECK(std::abs(gap) < 1e-8 * (1.0 + u * u + w * w));
      }
    }
    // Fenchel-Young inequality off the graph
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
      double u = d(rng), w = d(rng);
      double gap = psi.value_base(u) + psi.conjugate_base(w) - u * w;
      CHECK(gap > -1e-9);
    }
  }
}

TEST_CASE("beta is the monotone inverse of the subdifferential") {
  ConvexPotential psi = ConvexPotential::stefan(2.0);
  // flat exactly on the mushy interval [0, L]
  CHECK(psi.beta_base(0.0) == 0.0);
  CHECK(psi.beta_base(1.0) == 0.0);
  CHECK(psi.beta_base(2.0) == 0.0);
  CHECK(psi.beta_base(-0.5) == doctest::Approx(-0.5));
  CHECK(psi.beta_base(2.5) == doctest::Approx(0.5));
  CHECK(psi.beta_slope_base(1.0) == 0.0);
  CHECK(psi.beta_slope_base(3.0) == 1.0);

  for (const auto& p :
       {ConvexPotential::quadratic(0.7), ConvexPotential::stefan(1.0),
        ConvexPotential::tabulated({-2.0, -1.0, 0.5}, {-3.0, -0.5, 1.0})}) {
    double prev = -1e300;
    for (double w : lattice(-5.0, 5.0, 301)) {
      double u = p.beta_base(w);
      CHECK(u >= prev - 1e-12);  // monotone
      prev = u;
      // w lands in the subdifferential at beta(w)
      Interval s = p.subdiff_base(u);
      CHECK(s.contains(w, 1e-9));
    }
  }
}

TEST_CASE("kirchhoff transform closed forms") {
  KirchhoffMap map(make_scalar("power", 2.0));  // H(u) = sign(u) u^2
  CHECK(map.forward(3.0) == doctest::Approx(9.0));
  CHECK(map.inverse(9.0) == doctest::Approx(3.0));
  CHECK(map.forward(-2.0) == doctest::Approx(-4.0));

  // constant density: forward/inverse roundtrip
  KirchhoffMap lin{ScalarFunction{ScalarKind::Constant, 2.0}};
  for (double u : lattice(-4.0, 4.0, 41))
    CHECK(lin.inverse(lin.forward(u)) == doctest::Approx(u).epsilon(1e-10));
  // signed densities are not admissible Kirchhoff data
  CHECK_THROWS_AS(KirchhoffMap(make_scalar("saturating", 1.0)), std::invalid_argument);

  // transformed potential of the quadratic base:
  // Psi~(V) = int_0^{H^{-1}(V)} u h(u) du = (2/3)|V|^{3/2}
  ConvexPotential psi = ConvexPotential::kirchhoff_of(
      ConvexPotential::quadratic(1.0), map);
  for (double V : lattice(-4.0, 4.0, 33)) {
    double exact = 2.0 / 3.0 * std::pow(std::abs(V), 1.5);
    CHECK(psi.value_base(V) == doctest::Approx(exact).epsilon(1e-9));
  }
  // its beta: w -> H(beta_base(w)) = sign(w) w^2
  for (double w : lattice(-2.0, 2.0, 21))
    CHECK(psi.beta_base(w) == doctest::Approx(std::copysign(w * w, w)).epsilon(1e-12));
}

TEST_CASE("tabulated potential interpolates its derivative data") {
  ConvexPotential psi = ConvexPotential::tabulated({-1.0, 0.0, 2.0}, {-1.0, 0.0, 4.0});
  // derivative at the knots
  CHECK(psi.subdiff_base(-1.0).lo == doctest::Approx(-1.0));
  CHECK(psi.subdiff_base(0.0).lo == doctest::Approx(0.0));
  CHECK(psi.subdiff_base(2.0).lo == doctest::Approx(4.0));
  // value by finite differences of the stated derivative
  for (double u : lattice(-3.0, 4.0, 57)) {
    double h = 1e-6;
    double fd = (psi.value_base(u + h) - psi.value_base(u - h)) / (2.0 * h);
    CHECK(fd == doctest::Approx(psi.subdiff_base(u).lo).epsilon(1e-5));
  }
  // invalid data rejected
  CHECK_THROWS_AS(ConvexPotential::tabulated({0.0, 1.0}, {1.0, 1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ConvexPotential::tabulated({1.0, 0.0}, {0.0, 1.0}),
                  std::invalid_argument);
}

TEST_CASE("resolvents are nonexpansive and consistent") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> d(-5.0, 5.0);
  for (const auto& p :
       {ConvexPotential::quadratic(1.3), ConvexPotential::stefan(0.8),
        ConvexPotential::tabulated({-1.0, 1.0}, {-0.5, 2.0}),
        ConvexPotential::kirchhoff_of(ConvexPotential::quadratic(1.0),
                                      KirchhoffMap(make_scalar("power", 2.0)))}) {
    for (double tau : {0.1, 1.0, 7.0}) {
      for (int i = 0; i < 100; ++i) {
        double v1 = d(rng), v2 = d(rng);
        double u1 = p.resolvent_base(v1, tau);
        double u2 = p.resolvent_base(v2, tau);
        CHECK(std::abs(u1 - u2) <= std::abs(v1 - v2) + 1e-9);
        // u + tau s = v for some s in the subdifferential
        Interval s = p.subdiff_base(u1);
        CHECK(v1 >= u1 + tau * s.lo - 1e-7 * (1.0 + std::abs(v1)));
        CHECK(v1 <= u1 + tau * s.hi + 1e-7 * (1.0 + std::abs(v1)));
      }
    }
  }
  // quadratic closed form
  ConvexPotential q = ConvexPotential::quadratic(2.0);
  CHECK(q.resolvent_base(3.0, 0.5) == doctest::Approx(3.0 / 2.0));
  CHECK_THROWS_AS(q.resolvent_base(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("oscillation multiplier scales the whole convex calculus") {
  Mode m;
  m.amplitude = 0.5;
  m.frequency = vec1(2.0 * M_PI);
  OscillatoryField gfield(1, 1.5, {m});  // in [1, 2]
  ConvexPotential base = ConvexPotential::stefan(1.0);
  ConvexPotential psi = base.with_oscillation(gfield);
  CHECK(psi.has_oscillation());
  CHECK(psi.multiplier_min() == doctest::Approx(1.0));
  CHECK(psi.multiplier_max() == doctest::Approx(2.0));

  Vec z = vec1(0.37);
  double g = gfield(z);
  for (double u : lattice(-2.0, 2.0, 21))
    CHECK(psi.value(z, Vec{}, u) == doctest::Approx(g * base.value_base(u)));
  // conjugate of g Psi is g Psi*(w/g): check against the sup oracle
  for (double w : lattice(-2.0, 3.0, 26)) {
    double best = -1e300;
    for (double u : lattice(-30.0, 30.0, 60001))
      best = std::max(best, w * u - g * base.value_base(u));
    CHECK(psi.conjugate(z, Vec{}, w) == doctest::Approx(best).epsilon(1e-6));
  }
  // fenchel gap vanishes exactly on the graph, is positive off it
  for (double u : lattice(-2.0, 2.0, 100)) {
    Interval s = psi.subdifferential(z, Vec{}, u);
    CHECK(std::abs(psi.fenchel_gap_at(g, u, s.lo)) < 1e-10 * (1.0 + u * u));
    CHECK(psi.fenchel_gap_at(g, u, s.hi + 1.0) > 1e-3);
  }
  // a multiplier that can vanish is rejected
  Mode big;
  big.amplitude = 2.0;
  big.frequency = vec1(1.0);
  CHECK_THROWS_AS(base.with_oscillation(OscillatoryField(1, 1.0, {big})),
                  std::invalid_argument);

  // averaged potential uses the exact mean of g
  ConvexPotential avg = psi.averaged();
  CHECK(avg.multiplier(vec1(0.9)) == doctest::Approx(1.5));
  // stripping restores the base values
  ConvexPotential stripped = psi.without_oscillation();
  CHECK(stripped.value(z, Vec{}, 1.3) == doctest::Approx(base.value_base(1.3)));
}

TEST_CASE("growth constants bound the potential") {
  for (const auto& p :
       {ConvexPotential::quadratic(2.0), ConvexPotential::stefan(1.5),
        ConvexPotential::tabulated({-1.0, 0.0, 1.0}, {-2.0, 0.1, 2.5})}) {
    auto gr = p.growth();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(-8.0, 8.0);
    for (int i = 0; i < 300; ++i) {
      double l = d(rng), mm = d(rng);
      double lhs = std::abs(p.value_base(l) - p.value_base(mm));
      double rhs = std::abs(l - mm) * (gr.c * std::max(std::abs(l), std::abs(mm)) + gr.h);
      CHECK(lhs <= rhs + 1e-9);
      double low = gr.ctilde * l * l + gr.w_lin * l + gr.htilde;
      CHECK(p.value_base(l) >= low - 1e-9);
    }
  }
}

TEST_CASE("invalid potential parameters are rejected") {
  CHECK_THROWS_AS(ConvexPotential::quadratic(0.0), std::invalid_argument);
  CHECK_THROWS_AS(ConvexPotential::stefan(-1.0), std::invalid_argument);
  CHECK_THROWS_AS(
      ConvexPotential::kirchhoff_of(
          ConvexPotential::kirchhoff_of(ConvexPotential::quadratic(1.0), KirchhoffMap()),
          KirchhoffMap()),
      std::invalid_argument);
}
