#include <doctest.h>

#include <cmath>
#include <random>

#include "stefanhomog/diagnostics.hpp"

using namespace homog;

namespace {

OscillatoryField sine_z() {
  Mode m;
  m.amplitude = 1.0;
  m.frequency = vec1(2.0 * M_PI);
  return OscillatoryField(1, 0.0, {m});
}

OscillatoryField cosine_z() {
  Mode m;
  m.amplitude = 1.0;
  m.frequency = vec1(2.0 * M_PI);
  m.cosine = true;
  return OscillatoryField(1, 0.0, {m});
}

// Trajectory with prescribed constant snapshots, for quadrature-only tests.
Trajectory constant_trajectory(const Grid& g, const std::vector<double>& times,
                               double value) {
  Trajectory t;
  t.times = times;
  for (std::size_t k = 0; k < times.size(); ++k) {
    t.u.emplace_back(g, value);
    t.w.emplace_back(g, value);
    t.diagnostics.emplace_back();
  }
  return t;
}

}  // namespace

TEST_CASE("two-scale pairing resolves resonant and orthogonal oscillations") {
  const double eps = 1.0 / 64.0;
  Grid g = Grid::domain(1, 1024);
  SlowProfile one{ProfileKind::Constant, 1.0, 0.0};
  GridField v = sample(g, [&](const Vec& x) {
    return std::sin(2.0 * M_PI * x[0] / eps);
  });
  // sin . sin -> mean of sin^2 = 1/2
  CHECK(two_scale_pairing(g, v, sine_z(), one, eps) ==
        doctest::Approx(0.5).epsilon(1e-3));
  // sin . cos -> 0
  CHECK(std::abs(two_scale_pairing(g, v, cosine_z(), one, eps)) < 1e-3);
  CHECK_THROWS_AS(two_scale_pairing(g, v, sine_z(), one, 0.0),
                  std::invalid_argument);
}

TEST_CASE("predicted separable two-scale limit matches the pairing") {
  // V(z, x) = sin(2 pi z) sin(pi x), phi = sin(2 pi z), psi = 1:
  // limit = M(sin^2) int_0^1 sin(pi x) dx = (1/2)(2/pi) = 1/pi
  Grid g = Grid::domain(1, 1024);
  SlowProfile one{ProfileKind::Constant, 1.0, 0.0};
  SlowProfile vx{ProfileKind::SinePi, 1.0, 0.0};
  double predicted = two_scale_limit(g, sine_z(), sine_z(), vx, one);
  CHECK(predicted == doctest::Approx(1.0 / M_PI).epsilon(1e-3));
  const double eps = 1.0 / 128.0;
  GridField v = sample(g, [&](const Vec& x) {
    return std::sin(2.0 * M_PI * x[0] / eps) * std::sin(M_PI * x[0]);
  });
  CHECK(two_scale_pairing(g, v, sine_z(), one, eps) ==
        doctest::Approx(predicted).epsilon(1e-2));
}

TEST_CASE("nodewise restriction onto coarser grids") {
  Grid fine = Grid::domain(1, 32);
  Grid coarse = Grid::domain(1, 8);
  GridField f = sample(fine, [](const Vec& x) { return 3.0 * x[0] - 1.0; });
  GridField r = restrict_to(coarse, fine, f);
  GridField expect = sample(coarse, [](const Vec& x) { return 3.0 * x[0] - 1.0; });
  for (std::size_t i = 0; i < coarse.size(); ++i) CHECK(r[i] == expect[i]);
  Grid bad = Grid::domain(1, 12);
  CHECK_THROWS_AS(restrict_to(coarse, bad, GridField(bad)), std::invalid_argument);
}

TEST_CASE("space-time errors: exactness, Hoelder ordering") {
  Grid g = Grid::domain(1, 16);
  std::vector<double> times{0.0, 0.25, 0.5, 0.75, 1.0};
  Trajectory a = constant_trajectory(g, times, 1.0);
  Trajectory b = constant_trajectory(g, times, 0.0);
  // |difference| = 1 on Omega x (0,1): every L^p norm is 1
  CHECK(lp_space_time_error(g, a, g, b, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lp_space_time_error(g, a, g, b, 1.5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lp_space_time_error(g, a, g, a, 1.0) == 0.0);

  // Hoelder: ||f||_1 <= ||f||_1.5 * (total measure)^(1/3) on random data
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  Trajectory ra = constant_trajectory(g, times, 0.0);
  Trajectory rb = constant_trajectory(g, times, 0.0);
  for (auto& f : ra.u)
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = d(rng);
  double e1 = lp_space_time_error(g, ra, g, rb, 1.0);
  double e15 = lp_space_time_error(g, ra, g, rb, 1.5);
  CHECK(e1 <= e15 * std::pow(1.0, 1.0 / 3.0) + 1e-12);
  // mismatched partitions are rejected
  Trajectory c = constant_trajectory(g, {0.0, 0.5, 1.0}, 0.0);
  CHECK_THROWS_AS(lp_space_time_error(g, a, g, c, 1.0), std::invalid_argument);
}

TEST_CASE("weak gap against the tensor-product test family") {
  CHECK(default_test_family(1).size() == 12);
  CHECK(default_test_family(2).size() == 12);

  Grid g = Grid::domain(1, 64);
  std::vector<double> times;
  for (int k = 0; k <= 16; ++k) times.push_back(k / 16.0);
  auto tests = default_test_family(1);
  Trajectory a = constant_trajectory(g, times, 1.0);
  Trajectory b = constant_trajectory(g, times, 0.0);
  // constant difference 1: the k=1, m=0 test dominates with value 2/pi
  double gap = weak_gap(g, a, g, b, tests);
  CHECK(gap == doctest::Approx(2.0 / M_PI).epsilon(1e-2));
  // the gap is linear in the difference
  Trajectory half = constant_trajectory(g, times, 0.5);
  CHECK(weak_gap(g, a, g, half, tests) == doctest::Approx(0.5 * gap).epsilon(1e-12));
  CHECK(weak_gap(g, a, g, a, tests) == 0.0);
}

TEST_CASE("negative-order contraction of homogenized evolutions") {
  Grid g = Grid::domain(1, 32);
  Mat G0 = Mat::scalar1d(std::sqrt(3.0));
  ConvexPotential psi = ConvexPotential::stefan(1.0);
  GridField w0a = sample(g, [](const Vec& x) {
    return 2.0 * std::sin(M_PI * x[0]) - 0.5;
  });
  GridField pert = sample(g, [](const Vec& x) { return 0.1 * std::sin(M_PI * x[0]); });
  GridField w0b = w0a;
  for (std::size_t i = 0; i < g.size(); ++i) w0b[i] += pert[i];
  ContractionResult r = contraction_test(g, G0, psi, w0a, w0b, 0.1, 1.0 / 128.0);
  REQUIRE(!r.E.empty());
  CHECK(r.E.front() > 0.0);
  CHECK(r.nonincreasing(1e-8 * r.E.front()));
  CHECK(r.E.back() < r.E.front());

  // identical data: the distance is identically zero
  ContractionResult zero = contraction_test(g, G0, psi, w0a, w0a, 0.1, 1.0 / 128.0);
  for (double e : zero.E) CHECK(e == 0.0);

  // linear (quadratic-potential) case: quadratic scaling in the perturbation
  ConvexPotential quad = ConvexPotential::quadratic(1.0);
  GridField w0c = w0a, w0d = w0a;
  for (std::size_t i = 0; i < g.size(); ++i) {
    w0c[i] += pert[i];
    w0d[i] += 2.0 * pert[i];
  }
  ContractionResult r1 = contraction_test(g, G0, quad, w0a, w0c, 0.05, 1.0 / 128.0);
  ContractionResult r2 = contraction_test(g, G0, quad, w0a, w0d, 0.05, 1.0 / 128.0);
  for (std::size_t k = 0; k < r1.E.size(); ++k)
    CHECK(r2.E[k] == doctest::Approx(4.0 * r1.E[k]).epsilon(1e-5));
}

TEST_CASE("a-priori energy bound holds along stefan trajectories") {
  EvolutionProblem P;
  P.grid = Grid::domain(1, 64);
  P.psi = ConvexPotential::stefan(1.0);
  P.flux = MatrixField::constant(1, Mat::scalar1d(1.0), 1.0, 1.0);
  P.w0 = sample(P.grid, [](const Vec& x) {
    return 2.0 * std::sin(M_PI * x[0]) - 0.5;
  });
  P.T = 0.1;
  P.dt = 1e-3;
  Trajectory traj = solve_evolution(P);
  REQUIRE(!traj.failed);
  AprioriReport rep = apriori_check(traj, P.psi, 1.0);
  // stefan growth: c = 1, h = L = 1
  CHECK(rep.gamma == doctest::Approx(0.25));
  CHECK(rep.gamma_tilde == doctest::Approx(-1.0));
  CHECK(rep.ok(1e-6));
  CHECK(rep.slack.size() == traj.diagnostics.size());
  // with a source the bound keeps its sign through the work term
  P.has_source = true;
  P.source_factor = OscillatoryField::constant(1, 1.0);
  P.source_nonlinearity = ScalarFunction{ScalarKind::Constant, 1.0};
  Trajectory traj2 = solve_evolution(P);
  REQUIRE(!traj2.failed);
  CHECK(apriori_check(traj2, P.psi, 1.0).ok(1e-6));
}

TEST_CASE("convergence study shrinks the corrector-scale error") {
  StudySetup s;
  s.dim = 1;
  s.psi = ConvexPotential::quadratic(1.0);
  Mode m;
  m.amplitude = 1.0;
  m.frequency = vec1(2.0 * M_PI);
  s.flux = MatrixField::isotropic(OscillatoryField(1, 2.0, {m}), 1.0, 3.0);
  s.eps_list = {1.0 / 8.0, 1.0 / 16.0};
  s.grid_factor = 16;
  s.cell_M = 64;
  s.T = 0.0625;
  s.dt = 1.0 / 128.0;
  ConvergenceTable t = convergence_study(s);
  CHECK(t.K0(0, 0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-6));
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].eps == doctest::Approx(0.125));
  CHECK(t.rows[1].eps == doctest::Approx(0.0625));
  CHECK(t.rows[0].err_l1 > 0.0);
  // halving eps shrinks the homogenization error
  CHECK(t.rows[1].err_l1 < t.rows[0].err_l1);
  CHECK(t.rows[1].weak_gap < t.rows[0].weak_gap + 1e-6);
  // CSV header is stable
  CHECK(t.to_csv().rfind("eps,err_l1,err_l15,weak_gap,sup_l2_w,energy\r\n", 0) == 0);
}
