#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfg {

using Vec2 = Eigen::Vector2d;

/// Truncation of the plane to a computational box. All mass and all
/// relevant characteristics are kept strictly inside it.
struct Box {
  double x1_min, x1_max, x2_min, x2_max;

  void validate() const {
    if (!(x1_min < x1_max) || !(x2_min < x2_max))
      throw std::invalid_argument("Box: min must be < max on both axes");
  }
  bool contains(const Vec2& p) const {
    return p.x() >= x1_min && p.x() <= x1_max && p.y() >= x2_min && p.y() <= x2_max;
  }
  double width1() const { return x1_max - x1_min; }
  double width2() const { return x2_max - x2_min; }
  double diameter() const { return std::hypot(width1(), width2()); }
  Vec2 clamp(const Vec2& p) const {
    return {std::clamp(p.x(), x1_min, x1_max), std::clamp(p.y(), x2_min, x2_max)};
  }
};

/// Uniform node grid on a Box, row-major over (i, j) with i along x1.
struct Grid {
  Box box;
  int n1 = 0, n2 = 0;
  double h1 = 0, h2 = 0;

  Grid() = default;
  Grid(const Box& b, int n1_, int n2_) : box(b), n1(n1_), n2(n2_) {
    box.validate();
    if (n1 < 2 || n2 < 2) throw std::invalid_argument("Grid: need at least 2 nodes per axis");
    h1 = box.width1() / (n1 - 1);
    h2 = box.width2() / (n2 - 1);
  }
  int size() const { return n1 * n2; }
  int index(int i, int j) const { return i * n2 + j; }
  double x1(int i) const { return box.x1_min + i * h1; }
  double x2(int j) const { return box.x2_min + j * h2; }
  Vec2 node(int i, int j) const { return {x1(i), x2(j)}; }
};

struct TimeGrid {
  double t0 = 0, T = 1;
  int n_steps = 1;
  double dt = 1;

  TimeGrid() = default;
  TimeGrid(double t0_, double T_, int n_steps_) : t0(t0_), T(T_), n_steps(n_steps_) {
    if (!(t0 < T)) throw std::invalid_argument("TimeGrid: t0 must be < T");
    if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
    dt = (T - t0) / n_steps;
  }
  double time(int k) const { return t0 + k * dt; }
};

/// Grid-sampled scalar function of (x1,x2) at one time slice. Bilinear
/// interpolation inside the box, constant extension outside.
struct ScalarField {
  Grid grid;
  Eigen::ArrayXd values;

  ScalarField() = default;
  explicit ScalarField(const Grid& g) : grid(g), values(Eigen::ArrayXd::Zero(g.size())) {}

  double& at(int i, int j) { return values[grid.index(i, j)]; }
  double at(int i, int j) const { return values[grid.index(i, j)]; }

  template <class F>
  void fill(F&& f) {
    for (int i = 0; i < grid.n1; ++i)
      for (int j = 0; j < grid.n2; ++j) values[grid.index(i, j)] = f(grid.node(i, j));
  }

  double interpolate(const Vec2& pt) const;

  double max_abs() const { return values.abs().maxCoeff(); }
};

/// Bilinear interpolation of node values over a grid; constant extension
/// outside the box.
inline double bilinear(const Grid& g, const Eigen::ArrayXd& v, const Vec2& pt) {
  if (!pt.allFinite()) throw std::invalid_argument("invalid point");
  const Vec2 p = g.box.clamp(pt);
  double s = (p.x() - g.box.x1_min) / g.h1;
  double t = (p.y() - g.box.x2_min) / g.h2;
  int i = std::min(static_cast<int>(s), g.n1 - 2);
  int j = std::min(static_cast<int>(t), g.n2 - 2);
  i = std::max(i, 0);
  j = std::max(j, 0);
  double a = s - i, b = t - j;
  const double* d = v.data();
  int idx = i * g.n2 + j;
  return (1 - a) * ((1 - b) * d[idx] + b * d[idx + 1]) +
         a * ((1 - b) * d[idx + g.n2] + b * d[idx + g.n2 + 1]);
}

inline double ScalarField::interpolate(const Vec2& pt) const { return bilinear(grid, values, pt); }

/// Weighted particle representation of a probability measure on R^2.
struct ParticleCloud {
  std::vector<Vec2> positions;
  Eigen::ArrayXd weights;

  int size() const { return static_cast<int>(positions.size()); }
  double total_mass() const { return weights.sum(); }

  void validate() const {
    if (positions.empty() || weights.size() != static_cast<Eigen::Index>(positions.size()))
      throw std::invalid_argument("ParticleCloud: empty or mismatched sizes");
    if ((weights < 0).any()) throw std::invalid_argument("ParticleCloud: negative weight");
    if (std::abs(total_mass() - 1.0) > 1e-12)
      throw std::invalid_argument("ParticleCloud: mass not 1");
  }
};

inline double cloud_moment2(const ParticleCloud& m) {
  double s = 0;
  for (int i = 0; i < m.size(); ++i) s += m.weights[i] * m.positions[i].squaredNorm();
  return s;
}

inline Vec2 cloud_mean(const ParticleCloud& m) {
  Vec2 s = Vec2::Zero();
  for (int i = 0; i < m.size(); ++i) s += m.weights[i] * m.positions[i];
  return s;
}

/// Time-sampled state/control/costate path on [t,T].
struct Trajectory {
  Eigen::ArrayXd times;
  std::vector<Vec2> x;
  std::vector<Vec2> alpha;
  std::optional<std::vector<Vec2>> p;

  int n() const { return static_cast<int>(x.size()); }
  double t_start() const { return times[0]; }
  double t_end() const { return times[times.size() - 1]; }
};

// -- CSV output, fixed format for diffable regression artifacts --

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_field_csv(const std::string& path, const ScalarField& f) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "x1,x2,value\n";
  for (int i = 0; i < f.grid.n1; ++i)
    for (int j = 0; j < f.grid.n2; ++j)
      out << fmt_g17(f.grid.x1(i)) << ',' << fmt_g17(f.grid.x2(j)) << ','
          << fmt_g17(f.at(i, j)) << '\n';
}

inline void write_cloud_csv(const std::string& path, const ParticleCloud& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "x1,x2,weight\n";
  for (int i = 0; i < m.size(); ++i)
    out << fmt_g17(m.positions[i].x()) << ',' << fmt_g17(m.positions[i].y()) << ','
        << fmt_g17(m.weights[i]) << '\n';
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "s,x1,x2,alpha1,alpha2,p1,p2\n";
  for (int k = 0; k < tr.n(); ++k) {
    out << fmt_g17(tr.times[k]) << ',' << fmt_g17(tr.x[k].x()) << ',' << fmt_g17(tr.x[k].y())
        << ',' << fmt_g17(tr.alpha[k].x()) << ',' << fmt_g17(tr.alpha[k].y());
    if (tr.p)
      out << ',' << fmt_g17((*tr.p)[k].x()) << ',' << fmt_g17((*tr.p)[k].y());
    else
      out << ",0,0";
    out << '\n';
  }
}

}  // namespace mfg
