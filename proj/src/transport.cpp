#include "mfg/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "mfg/emd.hpp"

namespace mfg {

const ParticleCloud& MeasurePath::nearest(double t) const {
  int k = static_cast<int>(std::floor((t - time_grid.t0) / time_grid.dt + 0.5));
  k = std::clamp(k, 0, static_cast<int>(clouds.size()) - 1);
  return clouds[k];
}

MeasurePath constant_path(const TimeGrid& tg, const ParticleCloud& m) {
  MeasurePath p;
  p.time_grid = tg;
  p.clouds.assign(tg.n_steps + 1, m);
  return p;
}

ParticleCloud sample_m0(const ProblemSpec& spec, int n_particles, int seed) {
  if (n_particles < 1) throw std::invalid_argument("sample_m0: n_particles must be >= 1");
  ParticleCloud out;
  if (n_particles == 1) {
    out.positions = {spec.m0.center};
    out.weights = Eigen::ArrayXd::Ones(1);
    return out;
  }
  // Lattice over the support square sized so that roughly n_particles nodes
  // carry positive density (disk fills pi/4 of the square).
  const double r = spec.m0.radius;
  const Vec2 c = spec.m0.center;
  int side = std::max(2, static_cast<int>(std::ceil(std::sqrt(4.0 * n_particles / M_PI))));
  std::vector<Vec2> pts;
  std::vector<double> ws;
  while (true) {
    pts.clear();
    ws.clear();
    double step = 2.0 * r / (side + 1);
    for (int i = 1; i <= side; ++i)
      for (int j = 1; j <= side; ++j) {
        Vec2 x{c.x() - r + i * step, c.y() - r + j * step};
        double w = spec.m0.density(x);
        if (w > 0) {
          pts.push_back(x);
          ws.push_back(w);
        }
      }
    if (static_cast<int>(pts.size()) >= n_particles) break;
    ++side;  // coarse lattice missed the disk; refine until enough nodes hit
  }
  std::vector<int> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937 rng(static_cast<unsigned>(seed));
  std::shuffle(order.begin(), order.end(), rng);

  out.positions.reserve(pts.size());
  out.weights = Eigen::ArrayXd(static_cast<Eigen::Index>(pts.size()));
  for (size_t k = 0; k < order.size(); ++k) {
    out.positions.push_back(pts[order[k]]);
    out.weights[static_cast<Eigen::Index>(k)] = ws[order[k]];
  }
  out.weights /= out.weights.sum();
  return out;
}

MeasurePath push_forward(const ProblemSpec& spec, const ValueFunctionPath& u,
                         const ParticleCloud& m0_cloud) {
  m0_cloud.validate();
  const TimeGrid& tg = u.time_grid;
  MeasurePath path;
  path.time_grid = tg;
  path.clouds.reserve(tg.n_steps + 1);
  path.clouds.push_back(m0_cloud);

  const Grid& g = u.slices[0].grid;
  for (int k = 0; k < tg.n_steps; ++k) {
    const FeedbackSlice& fb = u.feedback[k];
    // control held constant over the step, matching the backward scheme
    auto vel = [&](const Vec2& x) -> Vec2 {
      Vec2 a{bilinear(g, fb.a1, x), bilinear(g, fb.a2, x)};
      return spec.dynamics(x, a);
    };
    ParticleCloud next = path.clouds.back();
    const double dt = tg.dt;
    for (Vec2& x : next.positions) {
      Vec2 k1 = vel(x);
      Vec2 k2 = vel(x + 0.5 * dt * k1);
      Vec2 k3 = vel(x + 0.5 * dt * k2);
      Vec2 k4 = vel(x + dt * k3);
      x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      if (!g.box.contains(x))
        throw std::runtime_error("push_forward: particle left the box, domain too small");
    }
    path.clouds.push_back(std::move(next));
  }
  return path;
}

double weak_residual(const ProblemSpec& spec, const ValueFunctionPath& u, const MeasurePath& m_path,
                     const TestFn& psi) {
  const TimeGrid& tg = m_path.time_grid;
  const Grid& g = u.slices[0].grid;
  double acc = 0;
  for (int k = 0; k < tg.n_steps; ++k) {
    const ParticleCloud& m = m_path.clouds[k];
    const FeedbackSlice& fb = u.feedback[k];
    double t = tg.time(k);
    double s = 0;
    for (int i = 0; i < m.size(); ++i) {
      const Vec2& x = m.positions[i];
      Vec2 a{bilinear(g, fb.a1, x), bilinear(g, fb.a2, x)};
      Vec2 b = spec.dynamics(x, a);
      s += m.weights[i] * (psi.dt(x, t) + psi.grad(x, t).dot(b));
    }
    acc += tg.dt * s;
  }
  double boundary = 0;
  const ParticleCloud& m0 = m_path.clouds.front();
  const ParticleCloud& mT = m_path.clouds.back();
  for (int i = 0; i < m0.size(); ++i) boundary += m0.weights[i] * psi.value(m0.positions[i], tg.t0);
  for (int i = 0; i < mT.size(); ++i) boundary -= mT.weights[i] * psi.value(mT.positions[i], tg.T);
  return std::abs(acc + boundary);
}

double d1(const ParticleCloud& a, const ParticleCloud& b, int cap) {
  a.validate();
  b.validate();
  if (a.size() + b.size() > cap)
    throw std::invalid_argument(
        "d1: combined support exceeds the cap; aggregate_to_grid the clouds first");
  return emd(a.positions, a.weights, b.positions, b.weights);
}

ParticleCloud aggregate_to_grid(const ParticleCloud& cloud, const Grid& grid) {
  std::unordered_map<int, double> bins;
  for (int k = 0; k < cloud.size(); ++k) {
    const Vec2& x = cloud.positions[k];
    int i = std::clamp(
        static_cast<int>(std::floor((x.x() - grid.box.x1_min) / grid.h1 + 0.5)), 0, grid.n1 - 1);
    int j = std::clamp(
        static_cast<int>(std::floor((x.y() - grid.box.x2_min) / grid.h2 + 0.5)), 0, grid.n2 - 1);
    bins[grid.index(i, j)] += cloud.weights[k];
  }
  std::vector<int> idx;
  idx.reserve(bins.size());
  for (const auto& kv : bins) idx.push_back(kv.first);
  std::sort(idx.begin(), idx.end());  // deterministic output order
  ParticleCloud out;
  out.positions.reserve(idx.size());
  out.weights = Eigen::ArrayXd(static_cast<Eigen::Index>(idx.size()));
  for (size_t k = 0; k < idx.size(); ++k) {
    out.positions.push_back(grid.node(idx[k] / grid.n2, idx[k] % grid.n2));
    out.weights[static_cast<Eigen::Index>(k)] = bins[idx[k]];
  }
  return out;
}

ScalarField render_density(const ParticleCloud& cloud, const Grid& grid, double bandwidth) {
  if (bandwidth <= 0) throw std::invalid_argument("render_density: bandwidth must be > 0");
  BumpKernel ker{bandwidth};
  ScalarField out(grid);
  for (int k = 0; k < cloud.size(); ++k) {
    const Vec2& p = cloud.positions[k];
    // kernel support is a disk of radius `bandwidth`: only touch nearby nodes
    int i_lo = std::max(0, static_cast<int>(std::floor((p.x() - bandwidth - grid.box.x1_min) / grid.h1)));
    int i_hi = std::min(grid.n1 - 1,
                        static_cast<int>(std::ceil((p.x() + bandwidth - grid.box.x1_min) / grid.h1)));
    int j_lo = std::max(0, static_cast<int>(std::floor((p.y() - bandwidth - grid.box.x2_min) / grid.h2)));
    int j_hi = std::min(grid.n2 - 1,
                        static_cast<int>(std::ceil((p.y() + bandwidth - grid.box.x2_min) / grid.h2)));
    for (int i = i_lo; i <= i_hi; ++i)
      for (int j = j_lo; j <= j_hi; ++j)
        out.at(i, j) += cloud.weights[k] * ker.value(grid.node(i, j) - p);
  }
  return out;
}

}  // namespace mfg
