#include "mfg/gdiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mfg {

void GDiffProbe::validate() const {
  if (!u) throw std::invalid_argument("GDiffProbe: no field attached");
  const Grid& g = u->grid;
  if (ell < 2.0 * std::max(g.h1, g.h2))
    throw std::invalid_argument("GDiffProbe: probe radius below twice the grid spacing");
  Box inner{g.box.x1_min + ell, g.box.x1_max - ell, g.box.x2_min + ell, g.box.x2_max - ell};
  if (!inner.contains(x)) throw std::invalid_argument("GDiffProbe: point too close to the wall");
}

double g_directional_derivative(const GDiffProbe& probe, const Vec2& theta) {
  probe.validate();
  if (std::abs(theta.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("g_directional_derivative: theta must be a unit vector");
  const double hv = probe.h(probe.x.x());
  const double u0 = probe.u->interpolate(probe.x);
  auto quot = [&](double l) {
    Vec2 y{probe.x.x() + l * theta.x(), probe.x.y() + hv * l * theta.y()};
    return (probe.u->interpolate(y) - u0) / l;
  };
  // first-order one-sided quotients: two Richardson levels kill the O(l) and
  // O(l^2) terms
  double q1 = quot(probe.ell), q2 = quot(probe.ell / 2), q4 = quot(probe.ell / 4);
  double d1 = 2 * q2 - q1, d2 = 2 * q4 - q2;
  return (4 * d2 - d1) / 3;
}

ReachableGradients reachable_g_gradients(const GDiffProbe& probe, int n_samples) {
  probe.validate();
  if (n_samples < 4) throw std::invalid_argument("reachable_g_gradients: need n_samples >= 4");
  const Grid& g = probe.u->grid;
  const double step = std::max(g.h1, g.h2);

  struct Sample {
    Vec2 grad;
    double spike;
    int ring;
  };
  std::vector<Sample> samples;
  std::vector<double> spikes;
  const double radii[3] = {probe.ell, probe.ell / 2, probe.ell / 4};
  for (int r = 0; r < 3; ++r)
    for (int a = 0; a < n_samples; ++a) {
      double th = 2.0 * M_PI * (a + 0.5) / n_samples;
      Vec2 y = probe.x + radii[r] * Vec2{std::cos(th), std::sin(th)};
      double c = probe.u->interpolate(y);
      double s11 = probe.u->interpolate({y.x() + step, y.y()}) +
                   probe.u->interpolate({y.x() - step, y.y()}) - 2 * c;
      double s22 = probe.u->interpolate({y.x(), y.y() + step}) +
                   probe.u->interpolate({y.x(), y.y() - step}) - 2 * c;
      double spike = std::max(std::abs(s11), std::abs(s22)) / (step * step);
      Vec2 grad{(probe.u->interpolate({y.x() + step, y.y()}) -
                 probe.u->interpolate({y.x() - step, y.y()})) /
                    (2 * step),
                probe.h(y.x()) *
                    (probe.u->interpolate({y.x(), y.y() + step}) -
                     probe.u->interpolate({y.x(), y.y() - step})) /
                    (2 * step)};
      samples.push_back({grad, spike, r});
      spikes.push_back(spike);
    }

  std::nth_element(spikes.begin(), spikes.begin() + spikes.size() / 2, spikes.end());
  double median = spikes[spikes.size() / 2];
  double threshold = 5.0 * std::max(median, 1e-12);

  ReachableGradients out;
  std::vector<std::vector<const Sample*>> clusters;
  const double cluster_tol = 10.0 * step;
  for (const Sample& s : samples) {
    if (s.spike > threshold) continue;
    bool placed = false;
    for (auto& cl : clusters)
      if ((cl.front()->grad - s.grad).norm() < cluster_tol) {
        cl.push_back(&s);
        placed = true;
        break;
      }
    if (!placed) clusters.push_back({&s});
  }
  for (const auto& cl : clusters) {
    // the limit is best represented by the innermost ring's members
    int best_ring = 0;
    for (const Sample* s : cl) best_ring = std::max(best_ring, s->ring);
    Vec2 mean = Vec2::Zero();
    int cnt = 0;
    for (const Sample* s : cl)
      if (s->ring == best_ring) {
        mean += s->grad;
        ++cnt;
      }
    out.clusters.push_back(mean / cnt);
  }
  out.conclusive = !out.clusters.empty();
  return out;
}

SuperdifferentialCheck superdifferential_check(const GDiffProbe& probe, const Vec2& p, int n_dirs,
                                               double C, double tol) {
  probe.validate();
  const double hv = probe.h(probe.x.x());
  const double u0 = probe.u->interpolate(probe.x);
  SuperdifferentialCheck out;
  for (int a = 0; a < n_dirs; ++a) {
    double th = 2.0 * M_PI * a / n_dirs;
    Vec2 dir{std::cos(th), std::sin(th)};
    for (double l : {probe.ell, probe.ell / 2, probe.ell / 4}) {
      Vec2 v = l * dir;
      Vec2 gv{v.x(), hv * v.y()};  // the anisotropic displacement actually taken
      double lhs = probe.u->interpolate(probe.x + gv) - u0 - p.dot(v);
      out.violation = std::max(out.violation, lhs - C * gv.squaredNorm());
    }
  }
  out.ok = out.violation <= tol;
  return out;
}

MinFormulaReport min_formula_check(const GDiffProbe& probe, int n_dirs) {
  MinFormulaReport rep;
  ReachableGradients rg = reachable_g_gradients(probe, probe.n_angular);
  if (!rg.conclusive) return rep;
  rep.conclusive = true;
  for (int a = 0; a < n_dirs; ++a) {
    double th = 2.0 * M_PI * a / n_dirs;
    Vec2 dir{std::cos(th), std::sin(th)};
    double dd = g_directional_derivative(probe, dir);
    double mn = std::numeric_limits<double>::infinity();
    for (const Vec2& p : rg.clusters) mn = std::min(mn, p.dot(dir));
    rep.max_gap = std::max(rep.max_gap, std::abs(dd - mn));
  }
  return rep;
}

double feedback_gradient_consistency(const ProblemSpec& spec, const ValueFunctionPath& u,
                                     const Trajectory& traj) {
  const Grid& g = u.slices[0].grid;
  Box inner{g.box.x1_min + 2 * g.h1, g.box.x1_max - 2 * g.h1, g.box.x2_min + 2 * g.h2,
            g.box.x2_max - 2 * g.h2};
  double gap = 0;
  for (int k = 0; k < traj.n(); ++k) {
    const Vec2& x = traj.x[k];
    if (!inner.contains(x)) continue;
    int s = static_cast<int>(
        std::clamp(std::lround((traj.times[k] - u.time_grid.t0) / u.time_grid.dt), 0L,
                   static_cast<long>(u.time_grid.n_steps)));
    Vec2 dg = grushin_gradient(u.slices[s], x, spec.h);
    gap = std::max(gap, (dg + traj.alpha[k]).cwiseAbs().maxCoeff());
  }
  return gap;
}

}  // namespace mfg
