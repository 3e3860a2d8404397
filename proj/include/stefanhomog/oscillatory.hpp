#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "stefanhomog/catalog.hpp"
#include "stefanhomog/common.hpp"

namespace homog {

// Trigonometric-polynomial-plus-constant function of the fast variable z.
// This is the concrete realization of an ergodic-algebra element: periodic
// fields use commensurate frequencies, quasi-periodic fields incommensurate
// ones; either way the exact mean value is the constant term.
struct Mode {
  double amplitude = 0.0;
  Vec frequency{};  // radians per unit length, nonzero vector
  double phase = 0.0;
  bool cosine = false;  // sine otherwise
};

class OscillatoryField {
 public:
  OscillatoryField() = default;
  OscillatoryField(int dim, double constant_term, std::vector<Mode> modes)
      : dim_(dim), constant_(constant_term), modes_(std::move(modes)) {
    if (dim_ < 1 || dim_ > 2) throw std::invalid_argument("dimension must be 1 or 2");
    for (const Mode& m : modes_) {
      if (norm(m.frequency, dim_) == 0.0)
        throw std::invalid_argument("oscillatory mode with zero frequency");
    }
  }

  static OscillatoryField constant(int dim, double c) { return {dim, c, {}}; }

  int dimension() const { return dim_; }
  double constant_term() const { return constant_; }
  const std::vector<Mode>& modes() const { return modes_; }

  double operator()(const Vec& z) const {
    double s = constant_;
    for (const Mode& m : modes_) {
      double arg = dot(m.frequency, z, dim_) + m.phase;
      s += m.amplitude * (m.cosine ? std::cos(arg) : std::sin(arg));
    }
    return s;
  }
  double operator()(double z) const { return (*this)(vec1(z)); }

  // |field| <= this everywhere.
  double sup_bound() const {
    double s = std::abs(constant_);
    for (const Mode& m : modes_) s += std::abs(m.amplitude);
    return s;
  }
  double min_bound() const {
    double s = constant_;
    for (const Mode& m : modes_) s -= std::abs(m.amplitude);
    return s;
  }

  // Exact Besicovitch mean value: every nonconstant trig mode averages to
  // zero over expanding boxes.
  double mean() const { return constant_; }

  // Average over [-L, L]^n by composite midpoint quadrature resolving the
  // fastest mode (>= 16 samples per shortest wavelength per axis).
  double mean_numeric(double L, int samples_per_wavelength = 16) const {
    if (!(L > 0.0)) throw std::invalid_argument("mean_numeric requires L > 0");
    int n0 = axis_samples(L, 0, samples_per_wavelength);
    double sum = 0.0;
    if (dim_ == 1) {
      double h = 2.0 * L / n0;
      for (int i = 0; i < n0; ++i) sum += (*this)(-L + (i + 0.5) * h);
      return sum / n0;
    }
    int n1 = axis_samples(L, 1, samples_per_wavelength);
    double h0 = 2.0 * L / n0, h1 = 2.0 * L / n1;
    for (int i = 0; i < n0; ++i)
      for (int j = 0; j < n1; ++j)
        sum += (*this)(vec2(-L + (i + 0.5) * h0, -L + (j + 0.5) * h1));
    return sum / (double(n0) * n1);
  }

  // Translation by y, implemented exactly through phase adjustment.
  OscillatoryField shifted(const Vec& y) const {
    OscillatoryField f = *this;
    for (Mode& m : f.modes_) m.phase += dot(m.frequency, y, dim_);
    return f;
  }

  OscillatoryField scaled(double s) const {
    OscillatoryField f = *this;
    f.constant_ *= s;
    for (Mode& m : f.modes_) m.amplitude *= s;
    return f;
  }

  double max_frequency() const {
    double w = 0.0;
    for (const Mode& m : modes_) w = std::max(w, norm(m.frequency, dim_));
    return w;
  }

  // Average of the field over the ball B(0,t), as a function of the ball
  // center: again a trig field, with mode amplitudes damped by sinc factors
  // (1D) or 2 J_1(wt)/(wt) (2D).
  OscillatoryField ball_averaged(double t) const {
    if (!(t > 0.0)) throw std::invalid_argument("ball average requires t > 0");
    OscillatoryField f = *this;
    for (Mode& m : f.modes_) {
      double wt = norm(m.frequency, dim_) * t;
      double factor = dim_ == 1 ? std::sin(wt) / wt : 2.0 * std::cyl_bessel_j(1, wt) / wt;
      m.amplitude *= factor;
    }
    return f;
  }

 private:
  int axis_samples(double L, int axis, int spw) const {
    double wmax = 0.0;
    for (const Mode& m : modes_) wmax = std::max(wmax, std::abs(m.frequency[axis]));
    if (wmax == 0.0) return 16;
    double wavelength = 2.0 * M_PI / wmax;
    double needed = 2.0 * L / wavelength * spw;
    return std::max(16, int(std::ceil(needed)));
  }

  int dim_ = 1;
  double constant_ = 0.0;
  std::vector<Mode> modes_;
};

// Finite-t quantity of the ergodicity criterion: the mean over y in
// [-sample_L, sample_L]^n of |avg_{B(0,t)} f(x+y) dx - M(f)|^2.  Tends to 0
// as t -> infinity for every field in the trigonometric class.
inline double ergodicity_defect(const OscillatoryField& f, double t,
                                double sample_L) {
  if (!(t > 0.0) || !(sample_L > 0.0))
    throw std::invalid_argument("ergodicity_defect requires t > 0, sample_L > 0");
  OscillatoryField g = f.ball_averaged(t);
  const double m = f.mean();
  const int dim = f.dimension();
  // Quadrature resolution: the squared deviation oscillates at up to twice
  // the fastest frequency.
  double wmax = 2.0 * g.max_frequency();
  auto samples = [&](void) {
    if (wmax == 0.0) return 16;
    double wavelength = 2.0 * M_PI / wmax;
    return std::max(16, int(std::ceil(2.0 * sample_L / wavelength * 32)));
  };
  int n = samples();
  double sum = 0.0;
  if (dim == 1) {
    double h = 2.0 * sample_L / n;
    for (int i = 0; i < n; ++i) {
      double d = g(-sample_L + (i + 0.5) * h) - m;
      sum += d * d;
    }
    return sum / n;
  }
  // 2D: same rule on each axis; keep sample counts moderate.
  int n2 = std::min(n, 4096);
  double h = 2.0 * sample_L / n2;
  for (int i = 0; i < n2; ++i)
    for (int j = 0; j < n2; ++j) {
      double d = g(vec2(-sample_L + (i + 0.5) * h, -sample_L + (j + 0.5) * h)) - m;
      sum += d * d;
    }
  return sum / (double(n2) * n2);
}

// n x n matrix of oscillatory entries, optionally modulated by a scalar
// catalog function of u: K(z, u) = entries(z) * h(u).
class MatrixField {
 public:
  MatrixField() = default;
  MatrixField(int dim, std::vector<OscillatoryField> entries, double k0,
              double k1)
      : dim_(dim), entries_(std::move(entries)), k0_(k0), k1_(k1) {
    if (int(entries_.size()) != dim_ * dim_)
      throw std::invalid_argument("matrix field needs dim*dim entries");
    if (!(0.0 < k0_ && k0_ <= k1_))
      throw std::invalid_argument("ellipticity bounds must satisfy 0 < k0 <= k1");
  }

  static MatrixField constant(int dim, const Mat& K, double k0, double k1) {
    std::vector<OscillatoryField> e;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        e.push_back(OscillatoryField::constant(dim, K(i, j)));
    return {dim, std::move(e), k0, k1};
  }
  static MatrixField isotropic(const OscillatoryField& k, double k0, double k1) {
    int dim = k.dimension();
    std::vector<OscillatoryField> e;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        e.push_back(i == j ? k : OscillatoryField::constant(dim, 0.0));
    return {dim, std::move(e), k0, k1};
  }

  int dimension() const { return dim_; }
  double lower_bound() const { return k0_; }
  double upper_bound() const { return k1_; }
  const OscillatoryField& entry(int i, int j) const { return entries_[i * dim_ + j]; }

  void set_modulation(ScalarFunction h) { modulation_ = h; has_modulation_ = true; }
  bool has_modulation() const { return has_modulation_; }
  const ScalarFunction& modulation() const { return modulation_; }
  double modulation_value(double u) const {
    return has_modulation_ ? modulation_(u) : 1.0;
  }

  Mat eval(const Vec& z) const {
    Mat m;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) m(i, j) = entries_[i * dim_ + j](z);
    return m;
  }
  Mat eval(const Vec& z, double u) const {
    return eval(z).scaled(modulation_value(u));
  }

  double max_frequency() const {
    double w = 0.0;
    for (const auto& e : entries_) w = std::max(w, e.max_frequency());
    return w;
  }

  bool constant_in_z() const {
    for (const auto& e : entries_)
      if (!e.modes().empty()) return false;
    return true;
  }

  // Mean-value matrix (arithmetic mean, entrywise).
  Mat mean() const {
    Mat m;
    for (int i = 0; i < dim_; ++i)
      for (int j = 0; j < dim_; ++j) m(i, j) = entries_[i * dim_ + j].mean();
    return m;
  }

 private:
  int dim_ = 1;
  std::vector<OscillatoryField> entries_;
  double k0_ = 1.0, k1_ = 1.0;
  ScalarFunction modulation_{};
  bool has_modulation_ = false;
};

// Commensurate approximation of a quasi-periodic field: each reduced
// frequency nu = w/(2 pi) is replaced by the nearest rational p/q with
// q <= max_denominator (continued-fraction convergents); the field is then
// exactly periodic on the supercell [0, L_d)^n with L_d the lcm of the
// denominators along axis d.
struct Rationalization {
  OscillatoryField field;
  Vec cell_length{1.0, 1.0};
  double frequency_error = 0.0;  // max |w - w'| over modes and axes
};

namespace detail {
inline void best_rational(double x, long max_den, long& p, long& q) {
  // Continued-fraction convergents of |x|.
  double ax = std::abs(x);
  long p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  double v = ax;
  for (int it = 0; it < 64; ++it) {
    double fa = std::floor(v);
    long a = (long)fa;
    long p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > max_den) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    double frac = v - fa;
    if (frac < 1e-15) break;
    v = 1.0 / frac;
  }
  if (q1 == 0) { p1 = 1; q1 = 1; }
  p = (x < 0 ? -p1 : p1);
  q = q1;
}
}  // namespace detail

inline Rationalization rationalize(const OscillatoryField& f, long max_denominator) {
  if (max_denominator < 1) throw std::invalid_argument("max_denominator must be >= 1");
  const int dim = f.dimension();
  std::array<long, 2> lcm{1, 1};
  std::vector<std::array<long, 2>> ps(f.modes().size()), qs(f.modes().size());
  for (size_t k = 0; k < f.modes().size(); ++k) {
    for (int d = 0; d < dim; ++d) {
      double nu = f.modes()[k].frequency[d] / (2.0 * M_PI);
      if (nu == 0.0) { ps[k][d] = 0; qs[k][d] = 1; continue; }
      detail::best_rational(nu, max_denominator, ps[k][d], qs[k][d]);
      if (ps[k][d] == 0) { ps[k][d] = nu > 0 ? 1 : -1; qs[k][d] = max_denominator; }
      lcm[d] = std::lcm(lcm[d], qs[k][d]);
    }
  }
  Rationalization r;
  std::vector<Mode> modes = f.modes();
  double err = 0.0;
  for (size_t k = 0; k < modes.size(); ++k) {
    for (int d = 0; d < dim; ++d) {
      if (qs[k][d] == 1 && ps[k][d] == 0 && f.modes()[k].frequency[d] == 0.0) continue;
      double w_new = 2.0 * M_PI * double(ps[k][d]) / double(qs[k][d]);
      err = std::max(err, std::abs(w_new - f.modes()[k].frequency[d]));
      modes[k].frequency[d] = w_new;
    }
  }
  r.field = OscillatoryField(dim, f.constant_term(), std::move(modes));
  r.cell_length = {double(lcm[0]), dim > 1 ? double(lcm[1]) : 1.0};
  r.frequency_error = err;
  return r;
}

}  // namespace homog
