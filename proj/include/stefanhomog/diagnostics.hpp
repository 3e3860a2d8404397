#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
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
#include "stefanhomog/stefan_solver.hpp"

namespace homog {

// ---------------------------------------------------------------------------
// Two-scale pairing: int_Omega v(x) phi(x/eps) psi(x) dx by grid quadrature.

inline double two_scale_pairing(const Grid& g, const GridField& v,
                                const OscillatoryField& phi,
                                const SlowProfile& psi_x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("two_scale_pairing requires eps > 0");
  const int n = g.dimension();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec x = g.coords(i);
    Vec z = x;
    z[0] /= eps;
    z[1] /= eps;
    s += g.node_weight(i) * v[i] * phi(z) * psi_x(x, n);
  }
  return s;
}

// Predicted two-scale limit for a separable limit V(z,x) = V_z(z) V_x(x):
// M(V_z phi) * int psi V_x.
inline double two_scale_limit(const Grid& g, const OscillatoryField& Vz,
                              const OscillatoryField& phi,
                              const SlowProfile& Vx, const SlowProfile& psi_x,
                              double mean_box = 64.0) {
  const int n = g.dimension();
  // mean of the product field over an expanding box (numerically; the
  // product of two trig fields is again almost periodic)
  auto prod = [&](const Vec& z) { return Vz(z) * phi(z); };
  double wmax = std::max(Vz.max_frequency(), phi.max_frequency());
  int samples = std::max(64, int(std::ceil(mean_box * wmax * 8.0)));
  double m = 0.0;
  if (n == 1) {
    double h = 2.0 * mean_box / samples;
    for (int i = 0; i < samples; ++i) m += prod(vec1(-mean_box + (i + 0.5) * h));
    m /= samples;
  } else {
    int s2 = std::min(samples, 2048);
    double h = 2.0 * mean_box / s2;
    for (int i = 0; i < s2; ++i)
      for (int j = 0; j < s2; ++j)
        m += prod(vec2(-mean_box + (i + 0.5) * h, -mean_box + (j + 0.5) * h));
    m /= double(s2) * s2;
  }
  double sx = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec x = g.coords(i);
    sx += g.node_weight(i) * Vx(x, n) * psi_x(x, n);
  }
  return m * sx;
}

// ---------------------------------------------------------------------------
// Grid restriction and space-time norms

// Pointwise restriction of a fine-grid field to a coarse grid whose node set
// is a subset of the fine one (N_fine a multiple of N_coarse).
inline GridField restrict_to(const Grid& coarse, const Grid& fine,
                             const GridField& f) {
  if (coarse.periodic() || fine.periodic())
    throw std::invalid_argument("restriction is defined on domain grids");
  int r = fine.cells(0) / coarse.cells(0);
  if (r * coarse.cells(0) != fine.cells(0))
    throw std::invalid_argument("fine grid is not a refinement of the coarse grid");
  GridField out(coarse);
  const int nx = coarse.nodes(0);
  const int ny = coarse.dimension() > 1 ? coarse.nodes(1) : 1;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      out[coarse.index(i, j)] = f[fine.index(i * r, j * r)];
  return out;
}

namespace detail {
inline void check_common_times(const Trajectory& a, const Trajectory& b) {
  if (a.times.size() != b.times.size())
    throw std::invalid_argument("trajectories have different time partitions");
  for (std::size_t k = 0; k < a.times.size(); ++k)
    if (std::abs(a.times[k] - b.times[k]) > 1e-12 * (1.0 + std::abs(a.times[k])))
      throw std::invalid_argument("trajectories have different time partitions");
}

inline double time_weight(const std::vector<double>& t, std::size_t k) {
  // trapezoid weights of the snapshot times
  double w = 0.0;
  if (k > 0) w += 0.5 * (t[k] - t[k - 1]);
  if (k + 1 < t.size()) w += 0.5 * (t[k + 1] - t[k]);
  return w;
}
}  // namespace detail

// L^p(Omega x (0,T)) distance between a coarse-grid trajectory and a
// (possibly finer-grid) reference, restricted nodewise; trapezoid in time.
inline double lp_space_time_error(const Grid& gc, const Trajectory& a,
                                  const Grid& gf, const Trajectory& b,
                                  double p) {
  detail::check_common_times(a, b);
  double acc = 0.0;
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    GridField ref = restrict_to(gc, gf, b.u[k]);
    double slice = 0.0;
    for (std::size_t i = 0; i < gc.size(); ++i)
      slice += gc.node_weight(i) * std::pow(std::abs(a.u[k][i] - ref[i]), p);
    acc += detail::time_weight(a.times, k) * slice;
  }
  return std::pow(acc, 1.0 / p);
}

// ---------------------------------------------------------------------------
// Weak-convergence surrogate: fixed finite family of tensor-product tests
// phi(x,t) = sin(kx pi x) [sin(ky pi y)] (t/T)^tpow.

struct SpaceTimeTest {
  int kx = 1;
  int ky = 0;  // 0 in 1D
  int tpow = 0;
};

inline std::vector<SpaceTimeTest> default_test_family(int dim) {
  std::vector<SpaceTimeTest> fam;
  if (dim == 1) {
    for (int k = 1; k <= 3; ++k)
      for (int m = 0; m <= 3; ++m) fam.push_back({k, 0, m});
  } else {
    for (auto [kx, ky] : {std::pair{1, 1}, {2, 1}, {1, 2}})
      for (int m = 0; m <= 3; ++m) fam.push_back({kx, ky, m});
  }
  return fam;
}

inline double eval_test(const SpaceTimeTest& tf, const Vec& x, int dim,
                        double t_norm) {
  double v = std::sin(tf.kx * M_PI * x[0]);
  if (dim > 1) v *= std::sin(tf.ky * M_PI * x[1]);
  for (int m = 0; m < tf.tpow; ++m) v *= t_norm;
  return v;
}

// max over the test family of | iint (w_a - w_b) phi dx dt |; b may live on
// a finer grid.
inline double weak_gap(const Grid& gc, const Trajectory& a, const Grid& gf,
                       const Trajectory& b,
                       const std::vector<SpaceTimeTest>& tests) {
  detail::check_common_times(a, b);
  const int dim = gc.dimension();
  const double T = a.times.back() > 0.0 ? a.times.back() : 1.0;
  std::vector<double> acc(tests.size(), 0.0);
  for (std::size_t k = 0; k < a.times.size(); ++k) {
    GridField ref = restrict_to(gc, gf, b.w[k]);
    double tw = detail::time_weight(a.times, k);
    double tn = a.times[k] / T;
    for (std::size_t q = 0; q < tests.size(); ++q) {
      double slice = 0.0;
      for (std::size_t i = 0; i < gc.size(); ++i) {
        Vec x = gc.coords(i);
        slice += gc.node_weight(i) * (a.w[k][i] - ref[i]) *
                 eval_test(tests[q], x, dim, tn);
      }
      acc[q] += tw * slice;
    }
  }
  double gap = 0.0;
  for (double v : acc) gap = std::max(gap, std::abs(v));
  return gap;
}

// ---------------------------------------------------------------------------
// Convergence study over eps

struct StudySetup {
  int dim = 1;
  ConvexPotential psi = ConvexPotential::quadratic(1.0);  // oscillatory form
  MatrixField flux;                                       // z-part of the tensor
  bool modulated = false;
  ScalarFunction modulation{ScalarKind::Constant, 1.0};
  bool has_source = false;
  OscillatoryField source_factor = OscillatoryField::constant(1, 0.0);
  ScalarFunction source_nonlinearity{ScalarKind::Constant, 1.0};
  SlowProfile source_offset{ProfileKind::Constant, 0.0, 0.0};
  OscillatoryField w0_factor = OscillatoryField::constant(1, 1.0);
  SlowProfile w0_profile{ProfileKind::SinePi, 1.0, 0.0};
  double T = 0.25;
  double dt = 1.0 / 128.0;
  std::vector<double> eps_list{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  int grid_factor = 16;  // N(eps) = grid_factor / eps
  int cell_M = 1024;
  Vec cell_length{1.0, 1.0};
};

struct ConvergenceRow {
  double eps = 0.0;
  double err_l1 = 0.0;
  double err_l15 = 0.0;
  double weak_gap = 0.0;
  double sup_l2_w = 0.0;
  double energy = 0.0;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;  // eps strictly decreasing
  Mat K0;
  int reference_N = 0;
  double homog_sup_l2_w = 0.0;
  double homog_energy = 0.0;
  std::vector<double> corrector_residuals;

  std::string to_csv() const {
    std::string out = "eps,err_l1,err_l15,weak_gap,sup_l2_w,energy\r\n";
    char buf[256];
    for (const ConvergenceRow& r : rows) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\r\n",
                    r.eps, r.err_l1, r.err_l15, r.weak_gap, r.sup_l2_w, r.energy);
      out += buf;
    }
    return out;
  }
};

namespace detail {
inline GridField sample_initial(const Grid& g, const OscillatoryField& factor,
                                const SlowProfile& profile, double eps,
                                bool averaged) {
  const int n = g.dimension();
  GridField w0(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Vec x = g.coords(i);
    double fz;
    if (averaged) {
      fz = factor.mean();
    } else {
      Vec z = x;
      z[0] /= eps;
      z[1] /= eps;
      fz = factor(z);
    }
    w0[i] = fz * profile(x, n);
  }
  return w0;
}

inline EvolutionProblem study_problem(const StudySetup& s, const Grid& g,
                                      double eps, bool homogenized,
                                      const Mat& K0) {
  EvolutionProblem P;
  P.grid = g;
  P.eps = eps;
  P.homogenized = homogenized;
  P.flux = s.flux;
  P.K0 = K0;
  P.modulated = s.modulated;
  P.modulation = s.modulation;
  P.psi = homogenized ? s.psi.averaged() : s.psi;
  P.has_source = s.has_source;
  P.source_factor = homogenized
                        ? OscillatoryField::constant(s.source_factor.dimension(),
                                                     s.source_factor.mean())
                        : s.source_factor;
  P.source_nonlinearity = s.source_nonlinearity;
  P.source_offset = s.source_offset;
  P.w0 = sample_initial(g, s.w0_factor, s.w0_profile, eps, homogenized);
  P.T = s.T;
  P.dt = s.dt;
  return P;
}
}  // namespace detail

inline ConvergenceTable convergence_study(const StudySetup& s) {
  ConvergenceTable table;
  std::vector<double> eps = s.eps_list;
  std::sort(eps.begin(), eps.end(), std::greater<double>());
  if (eps.empty()) throw std::invalid_argument("convergence study needs eps values");

  // effective tensor from the cell problem
  Grid cell = Grid::cell(s.dim, s.cell_M, s.cell_length);
  CorrectorSet corr = solve_corrector(cell, s.flux);
  table.K0 = effective_tensor(cell, s.flux, corr);
  table.corrector_residuals = corr.residuals;

  // homogenized reference on the finest grid of the study
  int N_ref = int(std::lround(s.grid_factor / eps.back()));
  Grid g_ref = Grid::domain(s.dim, N_ref);
  table.reference_N = N_ref;
  EvolutionProblem Pref = detail::study_problem(s, g_ref, eps.back(), true, table.K0);
  Trajectory ref = solve_evolution(Pref);
  if (ref.failed)
    throw std::runtime_error("homogenized reference run failed: " + ref.failure_reason);
  table.homog_sup_l2_w = ref.sup_l2_w;
  table.homog_energy = ref.diagnostics.back().energy;

  std::vector<SpaceTimeTest> tests = default_test_family(s.dim);
  for (double e : eps) {
    int N = int(std::lround(s.grid_factor / e));
    if (N < int(std::ceil(8.0 / e)))
      throw std::invalid_argument("resolution rule N(eps) >= 8/eps violated");
    Grid g = Grid::domain(s.dim, N);
    EvolutionProblem P = detail::study_problem(s, g, e, false, table.K0);
    Trajectory traj = solve_evolution(P);
    if (traj.failed)
      throw std::runtime_error("evolution failed at eps = " + std::to_string(e) +
                               ": " + traj.failure_reason);
    ConvergenceRow row;
    row.eps = e;
    row.err_l1 = lp_space_time_error(g, traj, g_ref, ref, 1.0);
    row.err_l15 = lp_space_time_error(g, traj, g_ref, ref, 1.5);
    row.weak_gap = weak_gap(g, traj, g_ref, ref, tests);
    row.sup_l2_w = traj.sup_l2_w;
    row.energy = traj.diagnostics.back().energy;
    table.rows.push_back(row);
  }
  return table;
}

// ---------------------------------------------------------------------------
// H^{-1}-type contraction / uniqueness test for the homogenized linear case

struct ContractionResult {
  std::vector<double> times;
  std::vector<double> E;

  bool nonincreasing(double slack) const {
    for (std::size_t k = 1; k < E.size(); ++k)
      if (E[k] > E[k - 1] + slack) return false;
    return true;
  }
  double max_increase() const {
    double m = 0.0;
    for (std::size_t k = 1; k < E.size(); ++k)
      m = std::max(m, E[k] - E[k - 1]);
    return m;
  }
};

inline ContractionResult contraction_test(const Grid& g, const Mat& G0,
                                          const ConvexPotential& psi_bar,
                                          const GridField& w0_a,
                                          const GridField& w0_b, double T,
                                          double dt) {
  EvolutionProblem P;
  P.grid = g;
  P.homogenized = true;
  P.K0 = G0;
  P.flux = MatrixField::constant(g.dimension(), G0, 1e-12, 1e12);
  P.psi = psi_bar;
  P.T = T;
  P.dt = dt;
  P.w0 = w0_a;
  Trajectory ta = solve_evolution(P);
  P.w0 = w0_b;
  Trajectory tb = solve_evolution(P);
  if (ta.failed || tb.failed)
    throw std::runtime_error("contraction test: evolution failed");
  EllipticOperator A = EllipticOperator::constant_coefficient(g, G0);
  ContractionResult out;
  for (std::size_t k = 0; k < ta.times.size(); ++k) {
    GridField d(g);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] = ta.w[k][i] - tb.w[k][i];
    out.times.push_back(ta.times[k]);
    out.E.push_back(hminus1_norm(g, d, A));
  }
  return out;
}

// ---------------------------------------------------------------------------
// A-priori bound (5.7)/(5.10): gamma ||w||^2 + gamma_tilde + dissipation
// <= int Psi*(w0) + source work, checked per recorded step.

struct AprioriReport {
  double gamma = 0.0;
  double gamma_tilde = 0.0;
  double bound_constant = 0.0;  // C of (5.10)
  double min_slack = 0.0;
  std::vector<double> slack;

  bool ok(double tol = 1e-6) const { return min_slack >= -tol; }
};

inline AprioriReport apriori_check(const Trajectory& traj,
                                   const ConvexPotential& psi,
                                   double domain_volume) {
  AprioriReport rep;
  ConvexPotential::Growth gr = psi.growth();
  rep.gamma = 1.0 / (4.0 * gr.c);
  // pointwise Psi*(v) >= v^2/(4c) - c h^2 - |Psi(0)|; Psi(0) = 0 for every
  // catalog potential (antiderivative normalization)
  rep.gamma_tilde = -(gr.c * gr.h * gr.h) * domain_volume;
  double gamma_alpha = std::min(rep.gamma, 1.0);
  rep.bound_constant =
      (traj.diagnostics.front().conj_integral - rep.gamma_tilde + 1.0) /
      std::max(gamma_alpha, 1e-12);
  rep.slack.reserve(traj.diagnostics.size());
  rep.min_slack = std::numeric_limits<double>::infinity();
  const double conj0 = traj.diagnostics.front().conj_integral;
  for (const StepDiagnostics& d : traj.diagnostics) {
    double lhs = rep.gamma * d.l2_w * d.l2_w + rep.gamma_tilde + d.dissipation_cum;
    double rhs = conj0 + d.source_work_cum;
    double s = rhs - lhs;
    rep.slack.push_back(s);
    rep.min_slack = std::min(rep.min_slack, s);
  }
  return rep;
}

}  // namespace homog
