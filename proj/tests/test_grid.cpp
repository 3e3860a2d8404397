#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "stefanhomog/elliptic.hpp"
#include "stefanhomog/grid.hpp"

using namespace homog;

namespace {
GridField random_field(const Grid& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = d(rng);
  return f;
}
}  // namespace

TEST_CASE("grid geometry and quadrature weights") {
  Grid g = Grid::domain(2, 8);
  CHECK(g.size() == 81);
  CHECK(g.num_cells() == 64);
  CHECK(g.spacing(0) == doctest::Approx(0.125));
  // trapezoid weights integrate the constant exactly
  double total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) total += g.node_weight(i);
  CHECK(total == doctest::Approx(g.volume()).epsilon(1e-14));

  Grid c = Grid::cell(1, 16, vec1(3.0));
  CHECK(c.size() == 16);
  CHECK(c.spacing(0) == doctest::Approx(3.0 / 16.0));
  total = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) total += c.node_weight(i);
  CHECK(total == doctest::Approx(3.0).epsilon(1e-14));

  CHECK_THROWS_AS(Grid::domain(3, 8), std::invalid_argument);
  CHECK_THROWS_AS(Grid::domain(1, 2), std::invalid_argument);
  CHECK_THROWS_AS(Grid::cell(1, 4), std::invalid_argument);
}

TEST_CASE("boundary classification") {
  Grid g = Grid::domain(1, 8);
  CHECK(g.is_boundary(g.index(0)));
  CHECK(g.is_boundary(g.index(8)));
  CHECK(!g.is_boundary(g.index(4)));
  Grid c = Grid::cell(1, 8);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(!c.is_boundary(i));
}

TEST_CASE("gradient matches smooth fields at second order") {
  // periodic: f = sin(2 pi x), f' = 2 pi cos(2 pi x)
  double prev = 0.0;
  for (int M : {32, 64}) {
    Grid g = Grid::cell(1, M);
    GridField f = sample(g, [](const Vec& x) { return std::sin(2.0 * M_PI * x[0]); });
    VectorField gr = gradient(g, f);
    double err = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double exact = 2.0 * M_PI * std::cos(2.0 * M_PI * g.coords(i)[0]);
      err = std::max(err, std::abs(gr[0][i] - exact));
    }
    if (M == 64) CHECK(prev / err > 3.5);  // central differences: O(h^2)
    prev = err;
  }
}

TEST_CASE("gradient and divergence are exact lattice adjoints") {
  // <grad f, G> = -<f, div G> under the uniform-weight pairing
  for (int dim : {1, 2}) {
    Grid gd = Grid::domain(dim, 12);
    Grid gp = Grid::cell(dim, 12);
    int which = 0;
    for (const Grid& g : {gd, gp}) {
      GridField f = random_field(g, 100 + which);
      VectorField G{random_field(g, 200 + which),
                    dim > 1 ? random_field(g, 300 + which) : GridField()};
      ++which;
      VectorField gf = gradient(g, f);
      GridField dG = divergence(g, G);
      double lhs = lattice_inner(g, gf, G);
      double rhs = -lattice_inner(g, f, dG);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("norms and means") {
  Grid g = Grid::domain(1, 64);
  GridField one = sample(g, [](const Vec&) { return 1.0; });
  CHECK(l2_norm(g, one) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lp_norm(g, one, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(grid_mean(g, one) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(lp_norm(g, one, 0.5), std::invalid_argument);

  // |sin(pi x)|: L1 = 2/pi, L2 = 1/sqrt(2); trapezoid converges fast
  GridField s = sample(g, [](const Vec& x) { return std::sin(M_PI * x[0]); });
  CHECK(lp_norm(g, s, 1.0) == doctest::Approx(2.0 / M_PI).epsilon(1e-3));
  CHECK(l2_norm(g, s) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-4));

  // periodic mean of a full period of sine vanishes exactly
  Grid c = Grid::cell(1, 32);
  GridField ps = sample(c, [](const Vec& x) { return std::sin(2.0 * M_PI * x[0]); });
  CHECK(grid_mean(c, ps) == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("elliptic operator reproduces the Dirichlet energy") {
  // u = x(1-x): int |u'|^2 = 1/3, and the P1 stiffness applied to the exact
  // nodal interpolant gives int |I_h u'|^2 which converges to 1/3
  Grid g = Grid::domain(1, 128);
  EllipticOperator A = EllipticOperator::constant_coefficient(g, Mat::identity(1));
  GridField u = sample(g, [](const Vec& x) { return x[0] * (1.0 - x[0]); });
  CHECK(A.energy(u, u) == doctest::Approx(1.0 / 3.0).epsilon(1e-4));

  // row sums vanish: A applied to a constant (interior) is boundary effects only
  GridField cfield = sample(g, [](const Vec&) { return 2.0; });
  GridField out(g);
  A.apply_full(cfield, out, /*mask_boundary=*/false);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(std::abs(out[i]) < 1e-12);
}

TEST_CASE("conjugate gradients solves the discrete Poisson problem") {
  Grid g = Grid::domain(1, 128);
  EllipticOperator A = EllipticOperator::constant_coefficient(g, Mat::identity(1));
  // -phi'' = sin(pi x): phi = sin(pi x)/pi^2; sin is a discrete eigenvector
  double h = g.spacing(0);
  GridField rhs(g);
  for (std::size_t i = 0; i < g.size(); ++i)
    rhs[i] = g.is_boundary(i) ? 0.0 : h * std::sin(M_PI * g.coords(i)[0]);
  GridField phi(g);
  SolveResult r = cg_solve(A, rhs, phi, 1e-12);
  CHECK(r.converged);
  double lambda_h = (2.0 - 2.0 * std::cos(M_PI * h)) / (h * h);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double exact = std::sin(M_PI * g.coords(i)[0]) / lambda_h;
    CHECK(phi[i] == doctest::Approx(exact).epsilon(1e-9));
  }
}

TEST_CASE("negative-order energy of the first Dirichlet mode") {
  // f = sin(pi x): phi = f / lambda_h, energy = (1/2)/lambda_h -> 1/(2 pi^2)
  for (int N : {64, 256}) {
    Grid g = Grid::domain(1, N);
    EllipticOperator A = EllipticOperator::constant_coefficient(g, Mat::identity(1));
    GridField f = sample(g, [](const Vec& x) { return std::sin(M_PI * x[0]); });
    double e = hminus1_norm(g, f, A, 1e-12);
    double h = g.spacing(0);
    double lambda_h = (2.0 - 2.0 * std::cos(M_PI * h)) / (h * h);
    CHECK(e == doctest::Approx(0.5 / lambda_h).epsilon(1e-10));
    CHECK(e == doctest::Approx(1.0 / (2.0 * M_PI * M_PI)).epsilon(1e-3));
  }
  // scaling property: the energy is quadratic in the data
  Grid g = Grid::domain(1, 64);
  EllipticOperator A = EllipticOperator::constant_coefficient(g, Mat::identity(1));
  GridField f = random_field(g, 42);
  GridField f2(g);
  for (std::size_t i = 0; i < g.size(); ++i) f2[i] = 2.0 * f[i];
  CHECK(hminus1_norm(g, f2, A) == doctest::Approx(4.0 * hminus1_norm(g, f, A)).epsilon(1e-6));
}

TEST_CASE("periodic Helmholtz decomposition") {
  Grid g = Grid::cell(2, 32);
  // F = grad(u) + (3, -1) for a smooth periodic u: solenoidal part vanishes
  GridField u = sample(g, [](const Vec& x) {
    return std::sin(2.0 * M_PI * x[0]) * std::cos(2.0 * M_PI * x[1]);
  });
  VectorField gu = gradient(g, u);
  VectorField F{GridField(g), GridField(g)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    F[0][i] = gu[0][i] + 3.0;
    F[1][i] = gu[1][i] - 1.0;
  }
  HelmholtzParts parts = helmholtz_decompose(g, F, 1e-13);
  CHECK(parts.mean[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(parts.mean[1] == doctest::Approx(-1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(std::abs(parts.solenoidal[0][i]) < 1e-9);
    CHECK(std::abs(parts.solenoidal[1][i]) < 1e-9);
  }

  // generic field: parts are orthogonal, reconstruction is exact, and the
  // solenoidal part is discretely divergence-free
  VectorField R{random_field(g, 7), random_field(g, 8)};
  HelmholtzParts p2 = helmholtz_decompose(g, R, 1e-13);
  double scale = lattice_inner(g, R, R);
  CHECK(std::abs(lattice_inner(g, p2.potential, p2.solenoidal)) < 1e-9 * scale);
  GridField ds = divergence(g, p2.solenoidal);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(ds[i]) < 1e-8);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(R[0][i] == doctest::Approx(p2.potential[0][i] + p2.solenoidal[0][i] +
                                     p2.mean[0]).epsilon(1e-12));
    CHECK(R[1][i] == doctest::Approx(p2.potential[1][i] + p2.solenoidal[1][i] +
                                     p2.mean[1]).epsilon(1e-12));
  }
}

TEST_CASE("field serialization round trips") {
  Grid g = Grid::domain(1, 8);
  GridField f = random_field(g, 99);
  const std::string bin = "test_field.bin";
  write_binary(g, f, bin);
  std::uint32_t dim = 0;
  std::array<std::uint32_t, 2> nodes{};
  std::vector<double> back = read_binary(bin, dim, nodes);
  CHECK(dim == 1);
  CHECK(nodes[0] == 9);
  REQUIRE(back.size() == f.size());
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(back[i] == f[i]);
  std::remove(bin.c_str());

  const std::string csv = "test_field.csv";
  write_csv(g, f, csv);
  std::ifstream in(csv, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,value\r");  // CRLF line endings
  in.close();
  std::remove(csv.c_str());
}
