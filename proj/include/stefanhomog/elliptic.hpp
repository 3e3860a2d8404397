#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "stefanhomog/common.hpp"
#include "stefanhomog/grid.hpp"
#include "stefanhomog/oscillatory.hpp"

namespace homog {

// Symmetric second-order elliptic operator -div(K grad .) discretized with
// bilinear elements on the grid cells, coefficient matrix constant per cell
// (sampled at cell centers).  Dirichlet grids pin boundary values to zero;
// periodic grids carry the usual constant null space.
class EllipticOperator {
 public:
  EllipticOperator() = default;

  EllipticOperator(const Grid& g, std::vector<Mat> cell_coeff) : grid_(&g) {
    set_coefficients(std::move(cell_coeff));
  }

  static EllipticOperator constant_coefficient(const Grid& g, const Mat& K) {
    return EllipticOperator(g, std::vector<Mat>(g.num_cells(), K));
  }

  static EllipticOperator from_field(const Grid& g, const MatrixField& K,
                                     double u = 0.0) {
    std::vector<Mat> coeff(g.num_cells());
    for (std::size_t c = 0; c < g.num_cells(); ++c)
      coeff[c] = K.eval(g.cell_center(c), u);
    return EllipticOperator(g, std::move(coeff));
  }

  const Grid& grid() const { return *grid_; }
  const std::vector<Mat>& coefficients() const { return coeff_; }

  void set_coefficients(std::vector<Mat> cell_coeff) {
    if (cell_coeff.size() != grid_->num_cells())
      throw std::invalid_argument("one coefficient matrix per cell required");
    coeff_ = std::move(cell_coeff);
    build();
  }

  // out = A u.  Dirichlet: boundary entries of u are treated as zero and
  // boundary rows of out are zeroed.
  void apply(const GridField& u, GridField& out) const {
    apply_full(u, out, /*mask_boundary=*/true);
  }

  // Full assembly including boundary rows and the given boundary values;
  // used for discrete boundary-flux bookkeeping.
  void apply_full(const GridField& u, GridField& out, bool mask_boundary) const {
    std::fill(out.v.begin(), out.v.end(), 0.0);
    const Grid& g = *grid_;
    const int nen = g.dimension() == 1 ? 2 : 4;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      auto corners = g.cell_corners(c);
      const double* ke = ke_[c].data();
      double ue[4];
      for (int a = 0; a < nen; ++a) {
        ue[a] = u[corners[a]];
        if (mask_boundary && g.is_boundary(corners[a])) ue[a] = 0.0;
      }
      for (int a = 0; a < nen; ++a) {
        double s = 0.0;
        for (int b = 0; b < nen; ++b) s += ke[a * nen + b] * ue[b];
        out[corners[a]] += s;
      }
    }
    if (mask_boundary && !g.periodic())
      for (std::size_t i = 0; i < g.size(); ++i)
        if (g.is_boundary(i)) out[i] = 0.0;
  }

  GridField apply(const GridField& u) const {
    GridField out(*grid_);
    apply(u, out);
    return out;
  }

  // u^T A v, boundary-masked: the discrete Dirichlet energy form
  // int [K grad u] . grad v.
  double energy(const GridField& u, const GridField& v) const {
    GridField Au(*grid_);
    apply(u, Au);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += Au[i] * v[i];
    return s;
  }

  GridField diagonal() const {
    GridField d(*grid_);
    const Grid& g = *grid_;
    const int nen = g.dimension() == 1 ? 2 : 4;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      auto corners = g.cell_corners(c);
      for (int a = 0; a < nen; ++a) d[corners[a]] += ke_[c][a * nen + a];
    }
    if (!g.periodic())
      for (std::size_t i = 0; i < g.size(); ++i)
        if (g.is_boundary(i)) d[i] = 1.0;
    return d;
  }

 private:
  void build() {
    const Grid& g = *grid_;
    ke_.resize(g.num_cells());
    if (g.dimension() == 1) {
      double h = g.spacing(0);
      for (std::size_t c = 0; c < g.num_cells(); ++c) {
        double k = coeff_[c](0, 0) / h;
        ke_[c] = {k, -k, -k, k, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
      }
      return;
    }
    // 2D bilinear element on an hx x hy cell, 2x2 Gauss (exact for the
    // bilinear gradient products).
    double hx = g.spacing(0), hy = g.spacing(1);
    const double q = 0.5 - 0.5 / std::sqrt(3.0);
    const double pts[2] = {q, 1.0 - q};
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      const Mat& K = coeff_[c];
      std::array<double, 16> ke{};
      for (double xi : pts)
        for (double et : pts) {
          // physical gradients of the four corner shape functions
          double gx[4] = {-(1 - et) / hx, (1 - et) / hx, -et / hx, et / hx};
          double gy[4] = {-(1 - xi) / hy, -xi / hy, (1 - xi) / hy, xi / hy};
          for (int a = 0; a < 4; ++a) {
            double kg0 = K(0, 0) * gx[a] + K(0, 1) * gy[a];
            double kg1 = K(1, 0) * gx[a] + K(1, 1) * gy[a];
            for (int b = 0; b < 4; ++b)
              ke[b * 4 + a] += 0.25 * hx * hy * (kg0 * gx[b] + kg1 * gy[b]);
          }
        }
      ke_[c] = ke;
    }
  }

  const Grid* grid_ = nullptr;
  std::vector<Mat> coeff_;
  std::vector<std::array<double, 16>> ke_;
};

struct SolveResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

namespace detail {
inline void project_zero_mean(std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  for (double& x : v) x -= m;
}
}  // namespace detail

// Jacobi-preconditioned conjugate gradients.  zero_mean removes the constant
// null space of periodic operators by projecting each iterate.
template <class ApplyFn>
SolveResult cg_solve(const Grid& g, ApplyFn&& apply_op, const GridField& diag,
                     const GridField& rhs, GridField& x, double rel_tol,
                     int max_iter, bool zero_mean) {
  const std::size_t n = g.size();
  GridField r = rhs, z(g), p(g), Ap(g);
  if (zero_mean) detail::project_zero_mean(r.v);
  // start from x (usually zero); subtract A x if nonzero
  bool x_nonzero = false;
  for (double v : x.v)
    if (v != 0.0) { x_nonzero = true; break; }
  if (x_nonzero) {
    apply_op(x, Ap);
    for (std::size_t i = 0; i < n; ++i) r[i] -= Ap[i];
    if (zero_mean) detail::project_zero_mean(r.v);
  }
  double rhs_norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) rhs_norm += r[i] * r[i];
  rhs_norm = std::sqrt(rhs_norm);
  SolveResult res;
  if (rhs_norm == 0.0) {
    res.converged = true;
    return res;
  }
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = r[i] / diag[i];
    p[i] = z[i];
    rz += r[i] * z[i];
  }
  for (int it = 1; it <= max_iter; ++it) {
    apply_op(p, Ap);
    double pAp = 0.0;
    for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
    double alpha = rz / pAp;
    double rnorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
      rnorm += r[i] * r[i];
    }
    if (zero_mean) {
      detail::project_zero_mean(x.v);
      detail::project_zero_mean(r.v);
    }
    rnorm = std::sqrt(rnorm);
    res.iterations = it;
    res.relative_residual = rnorm / rhs_norm;
    if (res.relative_residual <= rel_tol) {
      res.converged = true;
      return res;
    }
    double rz_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = r[i] / diag[i];
      rz_new += r[i] * z[i];
    }
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  return res;
}

inline SolveResult cg_solve(const EllipticOperator& A, const GridField& rhs,
                            GridField& x, double rel_tol = 1e-10,
                            int max_iter = 100000, bool zero_mean = false) {
  GridField diag = A.diagonal();
  return cg_solve(A.grid(), [&](const GridField& u, GridField& out) { A.apply(u, out); },
                  diag, rhs, x, rel_tol, max_iter, zero_mean);
}

// Discrete H^{-1}-type energy: solve A phi = M f with homogeneous Dirichlet
// data and return the energy value phi^T A phi = phi^T M f (nonnegative for
// SPD A).
inline double hminus1_norm(const Grid& g, const GridField& f,
                           const EllipticOperator& A, double rel_tol = 1e-10) {
  if (g.periodic()) throw std::invalid_argument("hminus1_norm needs a Dirichlet grid");
  double w = g.spacing(0) * (g.dimension() > 1 ? g.spacing(1) : 1.0);
  GridField rhs(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    rhs[i] = g.is_boundary(i) ? 0.0 : w * f[i];
  GridField phi(g);
  SolveResult r = cg_solve(A, rhs, phi, rel_tol);
  if (!r.converged)
    throw std::runtime_error("hminus1_norm: conjugate gradients did not converge "
                             "(ill-conditioned operator)");
  double e = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) e += phi[i] * rhs[i];
  return e;
}

// Discrete Helmholtz decomposition on the periodic cell:
// F = grad(phi) + S + m with phi periodic zero-mean, S discretely
// divergence-free and zero-mean, m the discrete mean vector.
struct HelmholtzParts {
  VectorField potential;
  VectorField solenoidal;
  Vec mean{};
  SolveResult solve;
};

inline HelmholtzParts helmholtz_decompose(const Grid& g, const VectorField& F,
                                          double rel_tol = 1e-12) {
  if (!g.periodic()) throw std::invalid_argument("helmholtz_decompose needs a cell grid");
  const int n = g.dimension();
  HelmholtzParts out;
  out.mean = {grid_mean(g, F[0]), n > 1 ? grid_mean(g, F[1]) : 0.0};
  // Solve -Lap phi = -div F with the central-difference operators so that
  // the parts are exactly orthogonal under the lattice inner product.
  GridField rhs = divergence(g, F);
  for (double& v : rhs.v) v = -v;
  auto neg_lap = [&](const GridField& u, GridField& o) {
    VectorField gr = gradient(g, u);
    GridField d = divergence(g, gr);
    for (std::size_t i = 0; i < g.size(); ++i) o[i] = -d[i];
  };
  GridField diag(g);
  double dval = 2.0 / (4.0 * g.spacing(0) * g.spacing(0));
  if (n > 1) dval += 2.0 / (4.0 * g.spacing(1) * g.spacing(1));
  std::fill(diag.v.begin(), diag.v.end(), dval);
  GridField phi(g);
  out.solve = cg_solve(g, neg_lap, diag, rhs, phi, rel_tol, 200000, /*zero_mean=*/true);
  if (!out.solve.converged)
    throw std::runtime_error("helmholtz_decompose: periodic Poisson solve did not "
                             "converge (unresolved modes on this grid)");
  out.potential = gradient(g, phi);
  out.solenoidal = {GridField(g), n > 1 ? GridField(g) : GridField()};
  for (int d = 0; d < n; ++d)
    for (std::size_t i = 0; i < g.size(); ++i)
      out.solenoidal[d][i] = F[d][i] - out.potential[d][i] - out.mean[d];
  return out;
}

}  // namespace homog
