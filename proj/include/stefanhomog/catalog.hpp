#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "stefanhomog/common.hpp"

namespace homog {

// Closed-form scalar nonlinearities usable as Kirchhoff density h(u),
// as coefficient modulation in u, and as source nonlinearity.
enum class ScalarKind {
  Identity,    // u
  Constant,    // c
  Power,       // m |u|^(m-1), m > 1  (density of u |-> sign(u)|u|^m)
  Saturating,  // u / (1 + |u|)
  HolderSign,  // sign(u) |u|^sigma, 0 < sigma < 1
};

struct ScalarFunction {
  ScalarKind kind = ScalarKind::Identity;
  double param = 1.0;  // c for Constant, m for Power, sigma for HolderSign

  double operator()(double u) const {
    switch (kind) {
      case ScalarKind::Identity: return u;
      case ScalarKind::Constant: return param;
      case ScalarKind::Power: return param * std::pow(std::abs(u), param - 1.0);
      case ScalarKind::Saturating: return u / (1.0 + std::abs(u));
      case ScalarKind::HolderSign:
        return u == 0.0 ? 0.0 : std::copysign(std::pow(std::abs(u), param), u);
    }
    return 0.0;
  }

  // H(u) = int_0^u h(s) ds, in closed form.
  double antiderivative(double u) const {
    switch (kind) {
      case ScalarKind::Identity: return 0.5 * u * u;
      case ScalarKind::Constant: return param * u;
      case ScalarKind::Power:
        return std::copysign(std::pow(std::abs(u), param), u);
      case ScalarKind::Saturating:
        return std::copysign(std::abs(u) - std::log1p(std::abs(u)), u);
      case ScalarKind::HolderSign:
        return std::pow(std::abs(u), param + 1.0) / (param + 1.0);
    }
    return 0.0;
  }

  double derivative(double u) const {
    switch (kind) {
      case ScalarKind::Identity: return 1.0;
      case ScalarKind::Constant: return 0.0;
      case ScalarKind::Power:
        if (u == 0.0) return param > 2.0 ? 0.0 : (param == 2.0 ? 2.0 : 1e300);
        return std::copysign(
            param * (param - 1.0) * std::pow(std::abs(u), param - 2.0), u);
      case ScalarKind::Saturating: {
        double d = 1.0 + std::abs(u);
        return 1.0 / (d * d);
      }
      case ScalarKind::HolderSign:
        if (u == 0.0) return 1e300;
        return param * std::pow(std::abs(u), param - 1.0);
    }
    return 0.0;
  }

  // Growth class used by the hypothesis validators: Hoelder exponent of the
  // modulus of continuity (1 = Lipschitz on bounded sets).
  double hoelder_exponent() const {
    return kind == ScalarKind::HolderSign ? param : 1.0;
  }
  bool nonnegative() const {
    return kind == ScalarKind::Power ||
           (kind == ScalarKind::Constant && param >= 0.0);
  }
};

inline ScalarFunction make_scalar(const std::string& name, double param) {
  if (name == "identity") return {ScalarKind::Identity, 1.0};
  if (name == "constant") return {ScalarKind::Constant, param};
  if (name == "power") {
    if (!(param > 1.0)) throw std::invalid_argument("power catalog entry requires m > 1");
    return {ScalarKind::Power, param};
  }
  if (name == "saturating") return {ScalarKind::Saturating, 1.0};
  if (name == "holder") {
    if (!(param > 0.0 && param < 1.0))
      throw std::invalid_argument("holder catalog entry requires 0 < sigma < 1");
    return {ScalarKind::HolderSign, param};
  }
  throw std::invalid_argument("unknown catalog entry: " + name);
}

inline std::string scalar_name(const ScalarFunction& f) {
  switch (f.kind) {
    case ScalarKind::Identity: return "identity";
    case ScalarKind::Constant: return "constant";
    case ScalarKind::Power: return "power";
    case ScalarKind::Saturating: return "saturating";
    case ScalarKind::HolderSign: return "holder";
  }
  return "identity";
}

// Closed-form slow-variable profiles on the unit box: used for initial data,
// source offsets and test functions.
enum class ProfileKind {
  Constant,    // b + a
  Coordinate,  // b + a x_1
  SinePi,      // b + a prod_d sin(pi x_d)
  Bump,        // b + a prod_d x_d (1 - x_d)
};

struct SlowProfile {
  ProfileKind kind = ProfileKind::Constant;
  double amplitude = 1.0;
  double offset = 0.0;

  double operator()(const Vec& x, int n) const {
    double p = 1.0;
    switch (kind) {
      case ProfileKind::Constant: p = 1.0; break;
      case ProfileKind::Coordinate: p = x[0]; break;
      case ProfileKind::SinePi:
        p = std::sin(M_PI * x[0]);
        if (n > 1) p *= std::sin(M_PI * x[1]);
        break;
      case ProfileKind::Bump:
        p = x[0] * (1.0 - x[0]);
        if (n > 1) p *= x[1] * (1.0 - x[1]);
        break;
    }
    return offset + amplitude * p;
  }

  double sup_bound() const { return std::abs(offset) + std::abs(amplitude); }
};

inline SlowProfile make_profile(const std::string& name, double amplitude,
                                double offset) {
  if (name == "constant") return {ProfileKind::Constant, amplitude, offset};
  if (name == "coordinate") return {ProfileKind::Coordinate, amplitude, offset};
  if (name == "sine") return {ProfileKind::SinePi, amplitude, offset};
  if (name == "bump") return {ProfileKind::Bump, amplitude, offset};
  throw std::invalid_argument("unknown profile: " + name);
}

inline std::string profile_name(const SlowProfile& p) {
  switch (p.kind) {
    case ProfileKind::Constant: return "constant";
    case ProfileKind::Coordinate: return "coordinate";
    case ProfileKind::SinePi: return "sine";
    case ProfileKind::Bump: return "bump";
  }
  return "constant";
}

}  // namespace homog
