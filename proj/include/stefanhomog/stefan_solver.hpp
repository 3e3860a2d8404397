#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stefanhomog/catalog.hpp"
#include "stefanhomog/cell_problem.hpp"
#include "stefanhomog/common.hpp"
#include "stefanhomog/convex.hpp"
#include "stefanhomog/elliptic.hpp"
#include "stefanhomog/grid.hpp"
#include "stefanhomog/oscillatory.hpp"

namespace homog {

// Enthalpy-method problem on the unit box with homogeneous Dirichlet data:
//   dw/dt - div[K(x/eps) h(u) grad u] = f(x/eps, x, u),  w in dPsi(x/eps, u).
// The homogenized variant replaces K(x/eps) by the constant tensor K0 and
// Psi by its averaged form (caller supplies both).
struct EvolutionProblem {
  Grid grid;  // Dirichlet domain grid
  ConvexPotential psi = ConvexPotential::quadratic(1.0);
  double eps = 1.0;          // fast scale z = x / eps
  bool homogenized = false;  // use K0 instead of K(x/eps)
  MatrixField flux;          // z-part of the flux tensor
  Mat K0 = Mat::identity(1);
  bool modulated = false;  // multiply the tensor by h(u)
  ScalarFunction modulation{ScalarKind::Constant, 1.0};
  // source f = factor(x/eps) * nonlinearity(u) + offset(x), lagged at u^n
  bool has_source = false;
  OscillatoryField source_factor = OscillatoryField::constant(1, 0.0);
  ScalarFunction source_nonlinearity{ScalarKind::Constant, 1.0};
  SlowProfile source_offset{ProfileKind::Constant, 0.0, 0.0};
  GridField w0;
  double T = 1.0;
  double dt = 1e-2;
  // nonlinear solve contract
  double tol_nl_factor = 1e-8;
  int max_nl_iters = 500;
  int max_halvings = 5;
  double cg_tol = 1e-12;
};

struct StepDiagnostics {
  double t = 0.0;
  double l2_w = 0.0;          // trapezoid L2 norm of w
  double energy = 0.0;        // ||w||^2 + cumulative int |grad u|^2
  int nl_iters = 0;
  double residual = 0.0;      // terminal nonlinear residual
  double conj_integral = 0.0;  // int Psi*(x/eps, w)
  double dissipation_cum = 0.0;   // sum dt * int [K grad u].grad u
  double grad_sq_cum = 0.0;       // sum dt * int |grad u|^2
  double source_work_cum = 0.0;   // sum dt * int f u
  double mass = 0.0;              // int w
  double boundary_flux = 0.0;     // discrete flux through dOmega this step
  double mass_defect = 0.0;       // mass balance violation this step
  double max_fenchel_gap = 0.0;   // max normalized inclusion gap
  double coercivity_slack = 0.0;  // int a(grad u).grad u - c_alpha int|grad u|^2
};

struct EvolutionState {
  int n = 0;
  double t = 0.0;
  GridField w;
  GridField u;
  StepDiagnostics diag;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<GridField> u;
  std::vector<GridField> w;
  std::vector<StepDiagnostics> diagnostics;
  bool failed = false;
  double failure_time = 0.0;
  std::string failure_reason;
  double sup_l2_w = 0.0;

  const GridField& terminal_u() const { return u.back(); }
  const GridField& terminal_w() const { return w.back(); }
};

class EvolutionSolver {
 public:
  explicit EvolutionSolver(const EvolutionProblem& P) : P_(P), g_(P.grid) {
    const Grid& g = P_.grid;
    if (g.periodic()) throw std::invalid_argument("evolution needs a Dirichlet grid");
    if (!(P_.dt > 0.0) || !(P_.T > 0.0))
      throw std::invalid_argument("evolution requires dt > 0 and T > 0");
    if (!P_.homogenized && !(P_.eps > 0.0))
      throw std::invalid_argument("oscillatory problem requires eps > 0");
    const int n = g.dimension();
    lumped_mass_ = g.spacing(0) * (n > 1 ? g.spacing(1) : 1.0);
    // node multipliers g(x/eps) of the potential
    gvals_.assign(g.size(), 1.0);
    if (P_.psi.has_oscillation()) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        Vec z = g.coords(i);
        z[0] /= P_.eps;
        z[1] /= P_.eps;
        gvals_[i] = P_.psi.oscillation()(z);
      }
    }
    // base flux tensor per cell (before u-modulation)
    base_coeff_.resize(g.num_cells());
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      if (P_.homogenized) {
        base_coeff_[c] = P_.K0;
      } else {
        Vec z = g.cell_center(c);
        z[0] /= P_.eps;
        z[1] /= P_.eps;
        base_coeff_[c] = P_.flux.eval(z);
      }
    }
    A_ = EllipticOperator(g_, base_coeff_);
    if (P_.has_source) {
      source_factor_.assign(g.size(), 0.0);
      source_offset_.assign(g.size(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) {
        Vec x = g.coords(i);
        Vec z = x;
        z[0] /= P_.eps;
        z[1] /= P_.eps;
        source_factor_[i] = P_.source_factor.dimension() == n
                                ? P_.source_factor(z)
                                : P_.source_factor(vec1(z[0]));
        source_offset_[i] = P_.source_offset(x, n);
      }
    }
  }

  const Grid& grid() const { return g_; }
  double lumped_mass() const { return lumped_mass_; }
  const std::vector<double>& multipliers() const { return gvals_; }

  EvolutionState initial_state() const {
    EvolutionState S;
    S.w = P_.w0;
    if (S.w.size() != g_.size())
      throw std::invalid_argument("initial enthalpy has wrong size");
    S.u = GridField(g_);
    for (std::size_t i = 0; i < g_.size(); ++i) {
      if (g_.is_boundary(i)) {
        // compatibility with u = 0 at the boundary: project w into dPsi(0)
        Interval s = P_.psi.subdiff_at(gvals_[i], 0.0);
        S.w[i] = s.clamp(S.w[i]);
        S.u[i] = 0.0;
      } else {
        S.u[i] = P_.psi.beta_at(gvals_[i], S.w[i]);
      }
    }
    fill_diagnostics(S, /*prev=*/nullptr, 0.0, 0, 0.0);
    return S;
  }

  struct StepOutcome {
    bool ok = false;
    double residual = 0.0;
    int iterations = 0;
  };

  // One backward-Euler step of length dt from S (in place on success).
  StepOutcome step_implicit(EvolutionState& S, double dt) {
    const std::size_t N = g_.size();
    GridField b(g_);
    for (std::size_t i = 0; i < N; ++i) {
      double f = 0.0;
      if (P_.has_source)
        f = source_factor_[i] * P_.source_nonlinearity(S.u[i]) + source_offset_[i];
      b[i] = S.w[i] + dt * f;
    }
    double wn_norm = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      wn_norm += lumped_mass_ * S.w[i] * S.w[i];
    const double tol = P_.tol_nl_factor * (1.0 + std::sqrt(wn_norm));

    GridField w = S.w, u = S.u;
    GridField Au(g_), F(g_), delta_u(g_), diagfld(g_);
    const double s = dt / lumped_mass_;

    auto rebuild = [&](const GridField& uu) {
      if (!P_.modulated) return;
      std::vector<Mat> coeff(g_.num_cells());
      const int nen = g_.dimension() == 1 ? 2 : 4;
      for (std::size_t c = 0; c < g_.num_cells(); ++c) {
        auto corners = g_.cell_corners(c);
        double um = 0.0;
        for (int a = 0; a < nen; ++a) um += uu[corners[a]];
        coeff[c] = base_coeff_[c].scaled(P_.modulation(um / nen));
      }
      A_.set_coefficients(std::move(coeff));
    };

    auto residual_norm = [&](const GridField& ww, const GridField& uu) {
      A_.apply(uu, Au);
      double r2 = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        if (g_.is_boundary(i)) { F[i] = 0.0; continue; }
        F[i] = ww[i] - b[i] + s * Au[i];
        r2 += lumped_mass_ * F[i] * F[i];
      }
      return std::sqrt(r2);
    };

    rebuild(u);
    double res = residual_norm(w, u);
    StepOutcome out;
    int it = 0;
    int stalls = 0;
    GridField wt(g_), ut(g_);
    for (; it < P_.max_nl_iters && res > tol; ++it) {
      // Newton direction in u with the diagonal change of variables
      // delta_w = D delta_u, D = 1/beta'(w); flat (mushy) nodes get a large
      // D so delta_u vanishes there and w absorbs the full correction.
      std::vector<double> D(N, 1.0);
      for (std::size_t i = 0; i < N; ++i) {
        double sl = P_.psi.beta_slope_at(gvals_[i], w[i]);
        D[i] = 1.0 / std::max(sl, 1e-14);
      }
      auto apply_J = [&](const GridField& x, GridField& o) {
        A_.apply(x, o);
        for (std::size_t i = 0; i < N; ++i) {
          if (g_.is_boundary(i)) { o[i] = x[i]; continue; }
          o[i] = D[i] * x[i] + s * o[i];
        }
      };
      GridField Adiag = A_.diagonal();
      for (std::size_t i = 0; i < N; ++i)
        diagfld[i] = g_.is_boundary(i) ? 1.0 : D[i] + s * Adiag[i];
      GridField rhs(g_);
      for (std::size_t i = 0; i < N; ++i) rhs[i] = g_.is_boundary(i) ? 0.0 : -F[i];
      std::fill(delta_u.v.begin(), delta_u.v.end(), 0.0);
      SolveResult sr = cg_solve(g_, apply_J, diagfld, rhs, delta_u, P_.cg_tol,
                                int(20 * std::sqrt(double(N))) + 2000, false);
      if (!sr.converged && sr.relative_residual > 1e-6) break;

      // Recover delta_w from the linearized equation delta_w = -F - s A delta_u
      // rather than as D delta_u: the latter multiplies the CG error by the
      // (huge) mushy-node diagonal and stalls the line search on fine grids.
      A_.apply(delta_u, Au);
      GridField delta_w(g_);
      for (std::size_t i = 0; i < N; ++i)
        delta_w[i] = g_.is_boundary(i) ? 0.0 : -F[i] - s * Au[i];

      // Take the full semismooth step when it reduces the residual at all;
      // damp only as a fallback. Active-set flips across the kinks of beta
      // can raise the residual transiently, so when no damping helps accept
      // the full step nonmonotonically (bounded number of times) instead of
      // aborting the iteration.
      auto trial = [&](double omega) {
        for (std::size_t i = 0; i < N; ++i) {
          if (g_.is_boundary(i)) { wt[i] = w[i]; ut[i] = 0.0; continue; }
          wt[i] = w[i] + omega * delta_w[i];
          ut[i] = P_.psi.beta_at(gvals_[i], wt[i]);
        }
        rebuild(ut);
        return residual_norm(wt, ut);
      };
      double res_new = res;
      bool accepted = false;
      for (double omega = 1.0; omega > 1e-4; omega *= 0.5) {
        res_new = trial(omega);
        if (res_new <= tol || res_new < res) { accepted = true; break; }
      }
      if (accepted) {
        stalls = 0;
      } else {
        res_new = trial(1.0);
        if (++stalls > 8 && res_new > tol) {
          res = res_new;
          w = wt;
          u = ut;
          break;
        }
      }
      w = wt;
      u = ut;
      res = res_new;
    }
    out.residual = res;
    out.iterations = it;
    out.ok = res <= tol;
    if (out.ok) {
      double t_new = S.t + dt;
      fill_step(S, w, u, dt, t_new, it, res);
    }
    return out;
  }

  // Advance by the nominal step P.dt, subdividing on nonlinear failure
  // (up to max_halvings levels).
  bool advance_one(EvolutionState& S) { return advance_rec(S, P_.dt, 0); }

  Trajectory solve() {
    Trajectory traj;
    EvolutionState S = initial_state();
    record(traj, S);
    int steps = int(std::llround(P_.T / P_.dt));
    if (steps < 1 || std::abs(steps * P_.dt - P_.T) > 1e-9 * P_.T)
      steps = std::max(1, int(std::ceil(P_.T / P_.dt - 1e-12)));
    for (int k = 0; k < steps; ++k) {
      if (!advance_one(S)) {
        traj.failed = true;
        traj.failure_time = S.t;
        traj.failure_reason = "nonlinear iteration cap exceeded at t = " +
                              std::to_string(S.t + P_.dt);
        return traj;
      }
      record(traj, S);
    }
    return traj;
  }

  // Accumulated-diagnostic accessors used by the a-priori check.
  const EvolutionProblem& problem() const { return P_; }
  const EllipticOperator& elliptic() const { return A_; }

 private:
  bool advance_rec(EvolutionState& S, double dt, int level) {
    StepOutcome o = step_implicit(S, dt);
    if (o.ok) return true;
    if (level >= P_.max_halvings) return false;
    return advance_rec(S, 0.5 * dt, level + 1) &&
           advance_rec(S, 0.5 * dt, level + 1);
  }

  void record(Trajectory& traj, const EvolutionState& S) {
    traj.times.push_back(S.t);
    traj.u.push_back(S.u);
    traj.w.push_back(S.w);
    traj.diagnostics.push_back(S.diag);
    traj.sup_l2_w = std::max(traj.sup_l2_w, S.diag.l2_w);
  }

  void fill_step(EvolutionState& S, const GridField& w_new, const GridField& u_new,
                 double dt, double t_new, int iters, double res) {
    // mass balance of this step before overwriting the state
    const std::size_t N = g_.size();
    GridField Afull(g_);
    A_.apply_full(u_new, Afull, /*mask_boundary=*/false);
    // boundary u is zero, so apply_full with the stored (zero) boundary
    // entries equals the masked interior action plus boundary rows
    double dmass = 0.0, flux = 0.0, fsum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (g_.is_boundary(i)) {
        flux += Afull[i];
        continue;
      }
      dmass += lumped_mass_ * (w_new[i] - S.w[i]);
      if (P_.has_source)
        fsum += lumped_mass_ *
                (source_factor_[i] * P_.source_nonlinearity(S.u[i]) + source_offset_[i]);
    }
    double defect = dmass - dt * (flux + fsum);

    double prev_grad_cum = S.diag.grad_sq_cum;
    double prev_diss = S.diag.dissipation_cum;
    double prev_work = S.diag.source_work_cum;
    double work = 0.0;
    if (P_.has_source)
      for (std::size_t i = 0; i < N; ++i)
        if (!g_.is_boundary(i))
          work += lumped_mass_ * u_new[i] *
                  (source_factor_[i] * P_.source_nonlinearity(S.u[i]) + source_offset_[i]);

    S.w = w_new;
    S.u = u_new;
    S.t = t_new;
    S.n += 1;
    StepDiagnostics d;
    d.dissipation_cum = prev_diss + dt * A_.energy(S.u, S.u);
    double gsq = 0.0;
    {
      double sn = h1_seminorm(g_, S.u);
      gsq = sn * sn;
    }
    d.grad_sq_cum = prev_grad_cum + dt * gsq;
    d.source_work_cum = prev_work + dt * work;
    d.boundary_flux = flux;
    d.mass_defect = defect;
    d.nl_iters = iters;
    d.residual = res;
    finish_diag(S, d, gsq);
  }

  void fill_diagnostics(EvolutionState& S, const StepDiagnostics* /*prev*/,
                        double /*dt*/, int iters, double res) const {
    StepDiagnostics d;
    d.nl_iters = iters;
    d.residual = res;
    double sn = h1_seminorm(g_, S.u);
    finish_diag(S, d, sn * sn);
  }

  void finish_diag(EvolutionState& S, StepDiagnostics& d, double grad_sq_now) const {
    const std::size_t N = g_.size();
    d.t = S.t;
    d.l2_w = l2_norm(g_, S.w);
    d.energy = d.l2_w * d.l2_w + d.grad_sq_cum;
    double conj = 0.0, mass = 0.0, maxgap = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      conj += g_.node_weight(i) * P_.psi.conjugate_at(gvals_[i], S.w[i]);
      mass += g_.node_weight(i) * S.w[i];
      double gap = P_.psi.fenchel_gap_at(gvals_[i], S.u[i], S.w[i]);
      double scale = 1.0 + S.u[i] * S.u[i] + S.w[i] * S.w[i];
      maxgap = std::max(maxgap, gap / scale);
    }
    d.conj_integral = conj;
    d.mass = mass;
    d.max_fenchel_gap = maxgap;
    // coercivity (alpha3): int a(grad u).grad u >= c_alpha int |grad u|^2
    double c_alpha =
        (P_.homogenized ? std::min(P_.K0(0, 0), g_.dimension() > 1 ? P_.K0(1, 1) : P_.K0(0, 0))
                        : P_.flux.lower_bound()) *
        (P_.modulated ? 0.0 : 1.0);  // modulated flux may degenerate at u = 0
    d.coercivity_slack = A_.energy(S.u, S.u) - c_alpha * grad_sq_now;
    S.diag = d;
  }

  EvolutionProblem P_;
  Grid g_;
  double lumped_mass_ = 1.0;
  std::vector<double> gvals_;
  std::vector<Mat> base_coeff_;
  std::vector<double> source_factor_, source_offset_;
  EllipticOperator A_;
};

inline Trajectory solve_evolution(const EvolutionProblem& P) {
  EvolutionSolver s(P);
  return s.solve();
}

// Kirchhoff route for the separable flux K(z) h(u): substitute V = H(u),
// evolve w with the linear-in-V operator and the transformed potential, then
// map back u = H^{-1}(V).
struct KirchhoffTrajectory {
  Trajectory transformed;       // states in (w, V)
  std::vector<GridField> u;     // mapped back per snapshot
};

inline KirchhoffTrajectory solve_linear_kirchhoff(const EvolutionProblem& P) {
  if (!P.modulated)
    throw std::invalid_argument("Kirchhoff solver expects a separable h(u) flux");
  if (P.has_source && P.source_nonlinearity.kind != ScalarKind::Constant)
    throw std::invalid_argument(
        "Kirchhoff solver supports only u-independent sources");
  KirchhoffMap map(P.modulation);
  EvolutionProblem Q = P;
  Q.modulated = false;
  ConvexPotential base = P.psi.without_oscillation();
  ConvexPotential tilde = ConvexPotential::kirchhoff_of(base, map);
  Q.psi = P.psi.has_oscillation() ? tilde.with_oscillation(P.psi.oscillation())
                                  : tilde;
  KirchhoffTrajectory out;
  out.transformed = solve_evolution(Q);
  out.u.reserve(out.transformed.u.size());
  for (const GridField& V : out.transformed.u) {
    GridField u = V;
    for (double& v : u.v) v = map.inverse(v);
    out.u.push_back(std::move(u));
  }
  return out;
}

}  // namespace homog
