#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace homog {

// Small fixed-size vector/matrix for space dimensions 1 and 2. The active
// dimension is carried by the surrounding object (grid, field); unused
// components stay zero.
using Vec = std::array<double, 2>;

inline Vec vec1(double x) { return {x, 0.0}; }
inline Vec vec2(double x, double y) { return {x, y}; }

inline double dot(const Vec& a, const Vec& b, int n) {
  double s = a[0] * b[0];
  if (n > 1) s += a[1] * b[1];
  return s;
}

inline double norm(const Vec& a, int n) { return std::sqrt(dot(a, a, n)); }

struct Mat {
  std::array<double, 4> a{};  // row-major 2x2; 1D uses a[0] only

  double& operator()(int i, int j) { return a[i * 2 + j]; }
  double operator()(int i, int j) const { return a[i * 2 + j]; }

  static Mat identity(int n) {
    Mat m;
    m(0, 0) = 1.0;
    if (n > 1) m(1, 1) = 1.0;
    return m;
  }
  static Mat diag(double k00, double k11) {
    Mat m;
    m(0, 0) = k00;
    m(1, 1) = k11;
    return m;
  }
  static Mat scalar1d(double k) {
    Mat m;
    m(0, 0) = k;
    return m;
  }

  Mat scaled(double s) const {
    Mat m = *this;
    for (double& x : m.a) x *= s;
    return m;
  }
};

inline Vec matvec(const Mat& m, const Vec& v, int n) {
  Vec r{};
  r[0] = m(0, 0) * v[0];
  if (n > 1) {
    r[0] += m(0, 1) * v[1];
    r[1] = m(1, 0) * v[0] + m(1, 1) * v[1];
  }
  return r;
}

// Quadratic form (M v) . v
inline double quad_form(const Mat& m, const Vec& v, int n) {
  return dot(matvec(m, v, n), v, n);
}

// FNV-1a 64-bit, used for config hashes embedded in reports.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace homog
