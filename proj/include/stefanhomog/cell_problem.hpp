#pragma once

#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "stefanhomog/catalog.hpp"
#include "stefanhomog/common.hpp"
#include "stefanhomog/convex.hpp"
#include "stefanhomog/elliptic.hpp"
#include "stefanhomog/grid.hpp"
#include "stefanhomog/oscillatory.hpp"

namespace homog {

namespace detail {

// Quadrature data of one cell: gradients of a nodal field at the Gauss
// points (1 point in 1D, 2x2 in 2D), matching the stiffness assembly.
struct CellQuadrature {
  int nq = 1;
  std::array<double, 4> weight{1.0, 0, 0, 0};  // fractions of the cell volume
  // gradient coefficients: grad(phi)(q) = sum_a coef[q][a] * phi[corner a]
  std::array<std::array<Vec, 4>, 4> coef{};
};

inline CellQuadrature cell_quadrature(const Grid& g) {
  CellQuadrature cq;
  if (g.dimension() == 1) {
    double h = g.spacing(0);
    cq.nq = 1;
    cq.weight = {1.0, 0, 0, 0};
    cq.coef[0][0] = vec1(-1.0 / h);
    cq.coef[0][1] = vec1(1.0 / h);
    return cq;
  }
  double hx = g.spacing(0), hy = g.spacing(1);
  const double q = 0.5 - 0.5 / std::sqrt(3.0);
  const double pts[2] = {q, 1.0 - q};
  cq.nq = 4;
  int k = 0;
  for (double xi : pts)
    for (double et : pts) {
      cq.weight[k] = 0.25;
      cq.coef[k][0] = {-(1 - et) / hx, -(1 - xi) / hy};
      cq.coef[k][1] = {(1 - et) / hx, -xi / hy};
      cq.coef[k][2] = {-et / hx, (1 - xi) / hy};
      cq.coef[k][3] = {et / hx, xi / hy};
      ++k;
    }
  return cq;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Correctors and effective tensor

struct CorrectorSet {
  std::vector<GridField> W;          // one per coordinate direction, zero-mean
  std::vector<SolveResult> solves;   // per direction
  std::vector<double> residuals;     // relative residual of the cell equation
};

// Periodic cell problem: find zero-mean W_i with
//   int [K (e_i + grad W_i)] . grad(phi) = 0 for all periodic zero-mean phi.
inline CorrectorSet solve_corrector(const Grid& g, const std::vector<Mat>& coeff,
                                    double rel_tol = 1e-10) {
  if (!g.periodic()) throw std::invalid_argument("corrector needs a periodic cell grid");
  const int n = g.dimension();
  EllipticOperator A(g, coeff);
  detail::CellQuadrature cq = detail::cell_quadrature(g);
  double cellvol = g.spacing(0) * (n > 1 ? g.spacing(1) : 1.0);
  const int nen = n == 1 ? 2 : 4;

  CorrectorSet out;
  for (int dir = 0; dir < n; ++dir) {
    Vec ei{};
    ei[dir] = 1.0;
    GridField rhs(g);
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      Vec Ke = matvec(coeff[c], ei, n);
      auto corners = g.cell_corners(c);
      for (int q = 0; q < cq.nq; ++q)
        for (int a = 0; a < nen; ++a)
          rhs[corners[a]] -= cq.weight[q] * cellvol * dot(Ke, cq.coef[q][a], n);
    }
    GridField w(g);
    SolveResult sr = cg_solve(A, rhs, w, rel_tol, 200000, /*zero_mean=*/true);
    if (!sr.converged)
      throw std::runtime_error(
          "cell problem did not converge: grid resolution insufficient for the "
          "coefficient's frequencies");
    // residual of the discrete weak form, relative to the forcing data. The
    // denominator is floored by the L2 norm of the flux data K e_i: for
    // coefficients constant along direction dir the assembled rhs is zero up
    // to roundoff, and dividing roundoff by roundoff would report junk.
    GridField Aw = A.apply(w);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      num += (Aw[i] - rhs[i]) * (Aw[i] - rhs[i]);
      den += rhs[i] * rhs[i];
    }
    double data = 0.0;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      Vec Ke = matvec(coeff[c], ei, n);
      data += cellvol * dot(Ke, Ke, n);
    }
    out.residuals.push_back(std::sqrt(num / std::max(den, data)));
    out.solves.push_back(sr);
    out.W.push_back(std::move(w));
  }
  return out;
}

inline CorrectorSet solve_corrector(const Grid& g, const MatrixField& K,
                                    double u = 0.0, double rel_tol = 1e-10) {
  std::vector<Mat> coeff(g.num_cells());
  for (std::size_t c = 0; c < g.num_cells(); ++c)
    coeff[c] = K.eval(g.cell_center(c), u);
  return solve_corrector(g, coeff, rel_tol);
}

// K0_ij = cell-mean of (e_i + grad W_i) . [K (e_j + grad W_j)], the
// symmetric form of the effective-tensor entries.
inline Mat effective_tensor(const Grid& g, const std::vector<Mat>& coeff,
                            const CorrectorSet& correctors) {
  const int n = g.dimension();
  detail::CellQuadrature cq = detail::cell_quadrature(g);
  double cellvol = g.spacing(0) * (n > 1 ? g.spacing(1) : 1.0);
  const int nen = n == 1 ? 2 : 4;
  Mat K0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    auto corners = g.cell_corners(c);
    for (int q = 0; q < cq.nq; ++q) {
      std::array<Vec, 2> dirs{};
      for (int i = 0; i < n; ++i) {
        Vec gi{};
        gi[i] = 1.0;
        for (int a = 0; a < nen; ++a) {
          double wv = correctors.W[i][corners[a]];
          gi[0] += cq.coef[q][a][0] * wv;
          if (n > 1) gi[1] += cq.coef[q][a][1] * wv;
        }
        dirs[i] = gi;
      }
      for (int i = 0; i < n; ++i) {
        Vec Kj[2];
        for (int j = 0; j < n; ++j) Kj[j] = matvec(coeff[c], dirs[j], n);
        for (int j = 0; j < n; ++j)
          K0(i, j) += cq.weight[q] * cellvol * dot(dirs[i], Kj[j], n);
      }
    }
  }
  double vol = g.volume();
  for (double& x : K0.a) x /= vol;
  return K0;
}

inline Mat effective_tensor(const Grid& g, const MatrixField& K,
                            const CorrectorSet& correctors, double u = 0.0) {
  std::vector<Mat> coeff(g.num_cells());
  for (std::size_t c = 0; c < g.num_cells(); ++c)
    coeff[c] = K.eval(g.cell_center(c), u);
  return effective_tensor(g, coeff, correctors);
}

// Voigt (arithmetic) and Reuss (harmonic) bounds of a scalar coefficient,
// by cell-center quadrature.
struct VoigtReuss {
  double arithmetic = 0.0;
  double harmonic = 0.0;
};

inline VoigtReuss voigt_reuss(const Grid& g, const OscillatoryField& k) {
  VoigtReuss vr;
  double sa = 0.0, sh = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    double v = k(g.cell_center(c));
    sa += v;
    sh += 1.0 / v;
  }
  vr.arithmetic = sa / g.num_cells();
  vr.harmonic = double(g.num_cells()) / sh;
  return vr;
}

// ---------------------------------------------------------------------------
// Homogenized dissipation potential psi0

// Convex dissipation density psi(z, eta), C^1 in eta:
//   quadratic: 0.5 [K(z) eta] . eta
//   power:     c(z) / p * |eta|^p, p >= 2
class DissipationPotential {
 public:
  enum class Kind { Quadratic, Power };

  static DissipationPotential quadratic(MatrixField K) {
    DissipationPotential d;
    d.kind_ = Kind::Quadratic;
    d.K_ = std::move(K);
    return d;
  }
  static DissipationPotential power(OscillatoryField coeff, double p) {
    if (!(p >= 2.0)) throw std::invalid_argument("power dissipation requires p >= 2");
    if (!(coeff.min_bound() > 0.0))
      throw std::invalid_argument("power dissipation coefficient must be positive");
    DissipationPotential d;
    d.kind_ = Kind::Power;
    d.coeff_ = std::move(coeff);
    d.p_ = p;
    return d;
  }

  Kind kind() const { return kind_; }
  const MatrixField& matrix() const { return K_; }
  const OscillatoryField& coefficient() const { return coeff_; }
  double exponent() const { return p_; }
  int dimension() const {
    return kind_ == Kind::Quadratic ? K_.dimension() : coeff_.dimension();
  }

  double value(const Vec& z, const Vec& eta, int n) const {
    if (kind_ == Kind::Quadratic) return 0.5 * quad_form(K_.eval(z), eta, n);
    double r = norm(eta, n);
    return coeff_(z) / p_ * std::pow(r, p_);
  }
  Vec grad_eta(const Vec& z, const Vec& eta, int n) const {
    if (kind_ == Kind::Quadratic) return matvec(K_.eval(z), eta, n);
    double r = norm(eta, n);
    if (r == 0.0) return Vec{};
    double s = coeff_(z) * std::pow(r, p_ - 2.0);
    Vec out = eta;
    out[0] *= s;
    out[1] *= s;
    return out;
  }

 private:
  Kind kind_ = Kind::Quadratic;
  MatrixField K_;
  OscillatoryField coeff_;
  double p_ = 2.0;
};

struct Psi0Result {
  double value = 0.0;
  Vec subgradient{};
  GridField minimizer;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
};

// psi0(eta) = min over periodic zero-mean scalar potentials phi of the
// cell-mean of psi(z, eta + grad phi(z)), by nonlinear conjugate gradients.
// Parameterizing through scalar potentials keeps the competitor inside the
// potential-field class exactly.
inline Psi0Result minimize_psi0(const Grid& g, const DissipationPotential& psi,
                                const Vec& eta, double rel_tol = 1e-8,
                                int max_iter = 200000) {
  if (!g.periodic()) throw std::invalid_argument("psi0 needs a periodic cell grid");
  const int n = g.dimension();
  detail::CellQuadrature cq = detail::cell_quadrature(g);
  const int nen = n == 1 ? 2 : 4;
  const double cellvol = g.spacing(0) * (n > 1 ? g.spacing(1) : 1.0);
  const double vol = g.volume();
  const std::size_t N = g.size();

  std::vector<Vec> centers(g.num_cells());
  for (std::size_t c = 0; c < g.num_cells(); ++c) centers[c] = g.cell_center(c);

  // objective and assembled gradient (zero-mean projected)
  auto eval = [&](const GridField& phi, GridField* grad) {
    double val = 0.0;
    if (grad) std::fill(grad->v.begin(), grad->v.end(), 0.0);
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      auto corners = g.cell_corners(c);
      for (int q = 0; q < cq.nq; ++q) {
        Vec e = eta;
        for (int a = 0; a < nen; ++a) {
          double pv = phi[corners[a]];
          e[0] += cq.coef[q][a][0] * pv;
          if (n > 1) e[1] += cq.coef[q][a][1] * pv;
        }
        double wq = cq.weight[q] * cellvol;
        val += wq * psi.value(centers[c], e, n);
        if (grad) {
          Vec dp = psi.grad_eta(centers[c], e, n);
          for (int a = 0; a < nen; ++a)
            (*grad)[corners[a]] += wq * dot(dp, cq.coef[q][a], n);
        }
      }
    }
    if (grad) {
      for (double& x : grad->v) x /= vol;
      detail::project_zero_mean(grad->v);
    }
    return val / vol;
  };

  Psi0Result res;
  GridField phi(g), grad(g), dir(g), grad_new(g);
  double f = eval(phi, &grad);
  double gnorm2 = 0.0;
  for (double x : grad.v) gnorm2 += x * x;
  for (std::size_t i = 0; i < N; ++i) dir[i] = -grad[i];
  double alpha_prev = 1.0;

  int it = 0;
  for (; it < max_iter; ++it) {
    double gnorm = std::sqrt(gnorm2);
    res.gradient_norm = gnorm;
    if (gnorm <= rel_tol * (1.0 + std::abs(f))) {
      res.converged = true;
      break;
    }
    // directional derivative at 0
    double d0 = 0.0;
    for (std::size_t i = 0; i < N; ++i) d0 += grad[i] * dir[i];
    if (d0 >= 0.0) {  // restart on a non-descent direction
      for (std::size_t i = 0; i < N; ++i) dir[i] = -grad[i];
      d0 = -gnorm2;
    }
    // secant line search on the convex directional function
    double a0 = 0.0, g0 = d0;
    double a1 = alpha_prev;
    GridField trial(g);
    auto dir_deriv = [&](double a) {
      for (std::size_t i = 0; i < N; ++i) trial[i] = phi[i] + a * dir[i];
      eval(trial, &grad_new);
      double s = 0.0;
      for (std::size_t i = 0; i < N; ++i) s += grad_new[i] * dir[i];
      return s;
    };
    double g1 = dir_deriv(a1);
    int expand = 0;
    while (g1 < 0.0 && expand++ < 60) {
      a0 = a1;
      g0 = g1;
      a1 *= 2.0;
      g1 = dir_deriv(a1);
    }
    double alpha = a1;
    for (int s = 0; s < 30; ++s) {
      if (g1 == g0) break;
      alpha = a1 - g1 * (a1 - a0) / (g1 - g0);
      if (!(alpha > a0 && alpha < a1)) alpha = 0.5 * (a0 + a1);
      double ga = dir_deriv(alpha);
      if (std::abs(ga) <= 1e-10 * std::abs(d0)) break;
      if (ga < 0.0) { a0 = alpha; g0 = ga; } else { a1 = alpha; g1 = ga; }
      if (a1 - a0 <= 1e-14 * a1) break;
    }
    alpha_prev = alpha;
    for (std::size_t i = 0; i < N; ++i) phi[i] += alpha * dir[i];
    detail::project_zero_mean(phi.v);
    double f_new = eval(phi, &grad_new);
    // Polak-Ribiere update
    double gnorm2_new = 0.0, gdot = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      gnorm2_new += grad_new[i] * grad_new[i];
      gdot += grad_new[i] * (grad_new[i] - grad[i]);
    }
    double beta = gnorm2 > 0 ? std::max(0.0, gdot / gnorm2) : 0.0;
    for (std::size_t i = 0; i < N; ++i) dir[i] = -grad_new[i] + beta * dir[i];
    grad = grad_new;
    gnorm2 = gnorm2_new;
    f = f_new;
  }
  if (!res.converged && res.gradient_norm > 1e3 * rel_tol * (1.0 + std::abs(f)))
    throw std::runtime_error("psi0 minimization stalled: check convexity of the "
                             "dissipation potential");
  res.converged = true;
  res.value = f;
  res.iterations = it;
  res.minimizer = std::move(phi);
  // subgradient: cell-mean of grad_eta(psi) at the minimizer
  Vec sg{};
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    auto corners = g.cell_corners(c);
    for (int q = 0; q < cq.nq; ++q) {
      Vec e = eta;
      for (int a = 0; a < nen; ++a) {
        double pv = res.minimizer[corners[a]];
        e[0] += cq.coef[q][a][0] * pv;
        if (n > 1) e[1] += cq.coef[q][a][1] * pv;
      }
      Vec dp = psi.grad_eta(centers[c], e, n);
      double wq = cq.weight[q] * cellvol;
      sg[0] += wq * dp[0];
      if (n > 1) sg[1] += wq * dp[1];
    }
  }
  sg[0] /= vol;
  sg[1] /= vol;
  res.subgradient = sg;
  return res;
}

inline double psi0_value(const Grid& g, const DissipationPotential& psi,
                         const Vec& eta, double rel_tol = 1e-8) {
  return minimize_psi0(g, psi, eta, rel_tol).value;
}

inline Vec psi0_subgradient(const Grid& g, const DissipationPotential& psi,
                            const Vec& eta, double rel_tol = 1e-8) {
  return minimize_psi0(g, psi, eta, rel_tol).subgradient;
}

// ---------------------------------------------------------------------------
// Effective model assembly

// Outputs of homogenization: effective tensor K0 (u-dependence through the
// separable modulation h), averaged potential, averaged source and initial
// data.  For a separable flux K(z) h(u) the corrector is u-independent and
// K0(u) = K0_base h(u).
struct EffectiveModel {
  int dim = 1;
  Mat K0_base;                 // effective tensor of the z-part
  bool has_modulation = false;
  ScalarFunction modulation{};
  ConvexPotential psi_bar = ConvexPotential::quadratic(1.0);
  // averaged source: mean_factor * nonlinearity(u) + offset(x)
  bool has_source = false;
  double source_mean_factor = 0.0;
  ScalarFunction source_nonlinearity{};
  SlowProfile source_offset{ProfileKind::Constant, 0.0, 0.0};
  // averaged initial enthalpy: mean_factor * profile(x)
  double w0_mean_factor = 1.0;
  SlowProfile w0_profile{ProfileKind::Constant, 0.0, 0.0};
  // provenance of the cell solve
  std::vector<double> corrector_residuals;
  Vec cell_length{1.0, 1.0};
  double rationalization_error = 0.0;

  Mat K0(double u) const {
    return has_modulation ? K0_base.scaled(modulation(u)) : K0_base;
  }
};

// Cache of effective tensors keyed by the quantized slow value u (step
// 1e-3); values are deterministic, so cache hits cannot change results.
class EffectiveTensorCache {
 public:
  Mat get(double u, const std::function<Mat(double)>& compute) {
    long key = std::lround(u * 1000.0);
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    Mat m = compute(key / 1000.0);
    std::lock_guard<std::mutex> lock(mu_);
    cache_.emplace(key, m);
    return m;
  }

 private:
  std::mutex mu_;
  std::map<long, Mat> cache_;
};

}  // namespace homog
