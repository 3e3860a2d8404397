#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stefanhomog/common.hpp"

namespace homog {

// Uniform tensor grid, 1D/2D.  Two flavours:
//   - domain grid on Omega = (0,1)^n: N cells per axis, N+1 nodes,
//     homogeneous Dirichlet boundary;
//   - periodic cell grid on [0, L_d)^n: M nodes per axis, wraparound.
class Grid {
 public:
  static Grid domain(int dim, int cells_per_axis) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("dimension must be 1 or 2");
    if (cells_per_axis < 4) throw std::invalid_argument("domain grid needs N >= 4");
    Grid g;
    g.dim_ = dim;
    g.periodic_ = false;
    g.cells_ = {cells_per_axis, dim > 1 ? cells_per_axis : 1};
    g.len_ = {1.0, 1.0};
    g.finish();
    return g;
  }

  static Grid cell(int dim, int nodes_per_axis, Vec length = {1.0, 1.0}) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("dimension must be 1 or 2");
    if (nodes_per_axis < 8) throw std::invalid_argument("cell grid needs M >= 8");
    Grid g;
    g.dim_ = dim;
    g.periodic_ = true;
    g.cells_ = {nodes_per_axis, dim > 1 ? nodes_per_axis : 1};
    g.len_ = length;
    g.finish();
    return g;
  }

  int dimension() const { return dim_; }
  bool periodic() const { return periodic_; }
  int cells(int axis) const { return cells_[axis]; }
  // nodes per axis: N+1 on Dirichlet grids, M on periodic grids
  int nodes(int axis) const { return periodic_ ? cells_[axis] : cells_[axis] + 1; }
  double spacing(int axis) const { return len_[axis] / cells_[axis]; }
  double length(int axis) const { return len_[axis]; }
  std::size_t size() const {
    std::size_t s = nodes(0);
    if (dim_ > 1) s *= nodes(1);
    return s;
  }
  std::size_t num_cells() const {
    std::size_t s = cells_[0];
    if (dim_ > 1) s *= cells_[1];
    return s;
  }

  std::size_t index(int i, int j = 0) const {
    return std::size_t(j) * nodes(0) + i;
  }
  int wrap(int i, int axis) const {
    int m = nodes(axis);
    i %= m;
    return i < 0 ? i + m : i;
  }
  Vec coords(std::size_t idx) const {
    int nx = nodes(0);
    int i = int(idx % nx), j = int(idx / nx);
    return {i * spacing(0), dim_ > 1 ? j * spacing(1) : 0.0};
  }
  bool is_boundary(std::size_t idx) const {
    if (periodic_) return false;
    int nx = nodes(0);
    int i = int(idx % nx), j = int(idx / nx);
    if (i == 0 || i == nx - 1) return true;
    if (dim_ > 1 && (j == 0 || j == nodes(1) - 1)) return true;
    return false;
  }

  // Trapezoidal quadrature weight of a node (Dirichlet: halved at the
  // boundary; periodic: uniform).
  double node_weight(std::size_t idx) const {
    double w = spacing(0) * (dim_ > 1 ? spacing(1) : 1.0);
    if (periodic_) return w;
    int nx = nodes(0);
    int i = int(idx % nx), j = int(idx / nx);
    if (i == 0 || i == nx - 1) w *= 0.5;
    if (dim_ > 1 && (j == 0 || j == nodes(1) - 1)) w *= 0.5;
    return w;
  }

  double volume() const {
    return len_[0] * (dim_ > 1 ? len_[1] : 1.0);
  }

  Vec cell_center(std::size_t c) const {
    int cx = cells_[0];
    int i = int(c % cx), j = int(c / cx);
    return {(i + 0.5) * spacing(0), dim_ > 1 ? (j + 0.5) * spacing(1) : 0.0};
  }
  // Node indices of the cell corners (wrapped on periodic grids).
  std::array<std::size_t, 4> cell_corners(std::size_t c) const {
    int cx = cells_[0];
    int i = int(c % cx), j = int(c / cx);
    int ip = periodic_ ? wrap(i + 1, 0) : i + 1;
    if (dim_ == 1) return {index(i), index(ip), index(i), index(ip)};
    int jp = periodic_ ? wrap(j + 1, 1) : j + 1;
    return {index(i, j), index(ip, j), index(i, jp), index(ip, jp)};
  }

 private:
  void finish() {}
  int dim_ = 1;
  bool periodic_ = false;
  std::array<int, 2> cells_{1, 1};
  Vec len_{1.0, 1.0};
};

struct GridField {
  std::vector<double> v;
  GridField() = default;
  explicit GridField(const Grid& g, double fill = 0.0) : v(g.size(), fill) {}
  double& operator[](std::size_t i) { return v[i]; }
  double operator[](std::size_t i) const { return v[i]; }
  std::size_t size() const { return v.size(); }
};

using VectorField = std::array<GridField, 2>;

template <class F>
GridField sample(const Grid& g, F f) {
  GridField out(g);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = f(g.coords(i));
  return out;
}

inline double grid_mean(const Grid& g, const GridField& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.node_weight(i) * f[i];
  return s / g.volume();
}

inline double inner(const Grid& g, const GridField& a, const GridField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += g.node_weight(i) * a[i] * b[i];
  return s;
}

inline double inner(const Grid& g, const VectorField& a, const VectorField& b) {
  double s = inner(g, a[0], b[0]);
  if (g.dimension() > 1) s += inner(g, a[1], b[1]);
  return s;
}

// Uniform-weight lattice inner product (weight h^n at every node).  This is
// the pairing under which the central-difference gradient/divergence pair is
// an exact adjoint; on periodic grids it coincides with inner().
inline double lattice_inner(const Grid& g, const GridField& a, const GridField& b) {
  double w = g.spacing(0) * (g.dimension() > 1 ? g.spacing(1) : 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += a[i] * b[i];
  return w * s;
}

inline double lattice_inner(const Grid& g, const VectorField& a, const VectorField& b) {
  double s = lattice_inner(g, a[0], b[0]);
  if (g.dimension() > 1) s += lattice_inner(g, a[1], b[1]);
  return s;
}

inline double lp_norm(const Grid& g, const GridField& f, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("lp_norm requires p >= 1");
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    s += g.node_weight(i) * std::pow(std::abs(f[i]), p);
  return std::pow(s, 1.0 / p);
}

inline double l2_norm(const Grid& g, const GridField& f) {
  return std::sqrt(inner(g, f, f));
}

// Central differences in the interior; periodic wraparound on cell grids;
// ghost-zero extension at Dirichlet boundaries (the adjoint-compatible
// one-sided closure).
inline VectorField gradient(const Grid& g, const GridField& f) {
  const int n = g.dimension();
  VectorField out{GridField(g), n > 1 ? GridField(g) : GridField()};
  const int nx = g.nodes(0);
  const int ny = n > 1 ? g.nodes(1) : 1;
  auto get = [&](int i, int j) -> double {
    if (g.periodic()) return f[g.index(g.wrap(i, 0), n > 1 ? g.wrap(j, 1) : 0)];
    if (i < 0 || i >= nx || j < 0 || j >= ny) return 0.0;
    return f[g.index(i, j)];
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      std::size_t id = g.index(i, j);
      out[0][id] = (get(i + 1, j) - get(i - 1, j)) / (2.0 * g.spacing(0));
      if (n > 1) out[1][id] = (get(i, j + 1) - get(i, j - 1)) / (2.0 * g.spacing(1));
    }
  return out;
}

// Negative adjoint of gradient under the node inner product: central
// differences with the same ghost-zero closure.
inline GridField divergence(const Grid& g, const VectorField& F) {
  const int n = g.dimension();
  GridField out(g);
  const int nx = g.nodes(0);
  const int ny = n > 1 ? g.nodes(1) : 1;
  auto get = [&](const GridField& f, int i, int j) -> double {
    if (g.periodic()) return f[g.index(g.wrap(i, 0), n > 1 ? g.wrap(j, 1) : 0)];
    if (i < 0 || i >= nx || j < 0 || j >= ny) return 0.0;
    return f[g.index(i, j)];
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      std::size_t id = g.index(i, j);
      double d = (get(F[0], i + 1, j) - get(F[0], i - 1, j)) / (2.0 * g.spacing(0));
      if (n > 1)
        d += (get(F[1], i, j + 1) - get(F[1], i, j - 1)) / (2.0 * g.spacing(1));
      out[id] = d;
    }
  return out;
}

inline double h1_seminorm(const Grid& g, const GridField& f) {
  VectorField gr = gradient(g, f);
  return std::sqrt(inner(g, gr, gr));
}

// ---------------------------------------------------------------------------
// CSV / binary serialization (one row per node: coordinates then value;
// binary: "SHGF", uint32 dim, uint32 nodes per axis, float64 row-major,
// little-endian).

inline void write_csv(const Grid& g, const GridField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  char buf[96];
  if (g.dimension() == 1) {
    out << "x,value\r\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
      Vec c = g.coords(i);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g\r\n", c[0], f[i]);
      out << buf;
    }
  } else {
    out << "x,y,value\r\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
      Vec c = g.coords(i);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\r\n", c[0], c[1], f[i]);
      out << buf;
    }
  }
}

inline void write_binary(const Grid& g, const GridField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out.write("SHGF", 4);
  std::uint32_t dim = g.dimension();
  out.write(reinterpret_cast<const char*>(&dim), 4);
  for (int d = 0; d < g.dimension(); ++d) {
    std::uint32_t n = g.nodes(d);
    out.write(reinterpret_cast<const char*>(&n), 4);
  }
  out.write(reinterpret_cast<const char*>(f.v.data()), sizeof(double) * f.v.size());
}

inline std::vector<double> read_binary(const std::string& path, std::uint32_t& dim,
                                       std::array<std::uint32_t, 2>& nodes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (std::string(magic, 4) != "SHGF") throw std::runtime_error("bad field dump header");
  in.read(reinterpret_cast<char*>(&dim), 4);
  nodes = {0, 0};
  std::size_t total = 1;
  for (std::uint32_t d = 0; d < dim; ++d) {
    in.read(reinterpret_cast<char*>(&nodes[d]), 4);
    total *= nodes[d];
  }
  std::vector<double> data(total);
  in.read(reinterpret_cast<char*>(data.data()), sizeof(double) * total);
  if (!in) throw std::runtime_error("truncated field dump");
  return data;
}

}  // namespace homog
