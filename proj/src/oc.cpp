#include "mfg/oc.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mfg {

namespace {

// Running-cost coupling blended linearly between the measure-path time nodes.
double f_eval(const ProblemSpec& spec, const MeasurePath& mp, const Vec2& x, double s) {
  const TimeGrid& tg = mp.time_grid;
  double pos = std::clamp((s - tg.t0) / tg.dt, 0.0, static_cast<double>(tg.n_steps));
  int k = std::min(static_cast<int>(pos), tg.n_steps - 1);
  double th = pos - k;
  double a = spec.F.eval(mp.clouds[k], x);
  if (th == 0.0) return a;
  return (1 - th) * a + th * spec.F.eval(mp.clouds[k + 1], x);
}

Vec2 f_grad(const ProblemSpec& spec, const MeasurePath& mp, const Vec2& x, double s) {
  const TimeGrid& tg = mp.time_grid;
  double pos = std::clamp((s - tg.t0) / tg.dt, 0.0, static_cast<double>(tg.n_steps));
  int k = std::min(static_cast<int>(pos), tg.n_steps - 1);
  double th = pos - k;
  Vec2 a = spec.F.gradient(mp.clouds[k], x);
  if (th == 0.0) return a;
  return (1 - th) * a + th * spec.F.gradient(mp.clouds[k + 1], x);
}

int substeps(const SolverSettings& st, double T, double t) {
  return std::max(1, static_cast<int>(std::lround((T - t) / T * st.n_steps)));
}

}  // namespace

Trajectory simulate_dynamics(const ProblemSpec& spec, const Vec2& x0, double t,
                             const std::vector<Vec2>& alpha_samples) {
  if (alpha_samples.size() < 2)
    throw std::invalid_argument("simulate_dynamics: need at least two control samples");
  if (!(t >= 0 && t < spec.T)) throw std::invalid_argument("simulate_dynamics: t outside [0,T)");
  const int n = static_cast<int>(alpha_samples.size()) - 1;
  const double dt = (spec.T - t) / n;
  auto alpha_at = [&](double s) -> Vec2 {
    double pos = std::clamp((s - t) / dt, 0.0, static_cast<double>(n));
    int k = std::min(static_cast<int>(pos), n - 1);
    double th = pos - k;
    return (1 - th) * alpha_samples[k] + th * alpha_samples[k + 1];
  };
  auto rhs = [&](const Vec2& x, double s) { return spec.dynamics(x, alpha_at(s)); };

  Trajectory tr;
  tr.times = Eigen::ArrayXd::LinSpaced(n + 1, t, spec.T);
  tr.x.resize(n + 1);
  tr.alpha = alpha_samples;
  tr.x[0] = x0;
  for (int k = 0; k < n; ++k) {
    double s = tr.times[k];
    const Vec2& x = tr.x[k];
    Vec2 k1 = rhs(x, s);
    Vec2 k2 = rhs(x + 0.5 * dt * k1, s + 0.5 * dt);
    Vec2 k3 = rhs(x + 0.5 * dt * k2, s + 0.5 * dt);
    Vec2 k4 = rhs(x + dt * k3, s + dt);
    tr.x[k + 1] = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return tr;
}

double cost(const ProblemSpec& spec, const MeasurePath& m_path, const Trajectory& traj) {
  double J = 0;
  auto integrand = [&](int k) {
    return 0.5 * traj.alpha[k].squaredNorm() + f_eval(spec, m_path, traj.x[k], traj.times[k]);
  };
  for (int k = 0; k + 1 < traj.n(); ++k)
    J += (traj.times[k + 1] - traj.times[k]) * 0.5 * (integrand(k) + integrand(k + 1));
  return J + spec.G.eval(m_path.clouds.back(), traj.x.back());
}

Eigen::Vector4d pontryagin_rhs(const ProblemSpec& spec, const MeasurePath& m_path,
                               const Eigen::Vector4d& y, double s) {
  HJet hj = spec.h.eval(y[0]);
  Vec2 df = f_grad(spec, m_path, {y[0], y[1]}, s);
  return {y[2], hj.h * hj.h * y[3], -y[3] * y[3] * hj.dh * hj.h + df.x(), df.y()};
}

Vec2 seed_costate(const ProblemSpec& spec, const MeasurePath& m_path, const ValueFunctionPath& u,
                  const Vec2& x, double t) {
  int k = static_cast<int>(std::floor((t - u.time_grid.t0) / u.time_grid.dt + 0.5));
  k = std::clamp(k, 0, u.time_grid.n_steps);
  Vec2 p0 = -field_gradient(u.slices[k], x);
  if (std::abs(spec.h(x.x())) < 1e-9) {
    // On the degenerate set the value function carries no x2 slope to read
    // off; reconstruct p2 from the costate integral along the rest path.
    double p2 = -spec.G.gradient(m_path.clouds.back(), x).y();
    const TimeGrid& tg = u.time_grid;
    for (int j = tg.n_steps; j > k; --j) {
      double a = f_grad(spec, m_path, x, tg.time(j - 1)).y();
      double b = f_grad(spec, m_path, x, tg.time(j)).y();
      p2 -= tg.dt * 0.5 * (a + b);
    }
    p0.y() = p2;
  }
  return p0;
}

namespace {

struct IntegrationResult {
  Eigen::Vector4d yT;
  Trajectory traj;
};

IntegrationResult integrate_pontryagin(const ProblemSpec& spec, const MeasurePath& m_path,
                                       const Vec2& x0, double t, const Vec2& p0, int n_sub,
                                       bool record) {
  const double dt = (spec.T - t) / n_sub;
  Eigen::Vector4d y{x0.x(), x0.y(), p0.x(), p0.y()};
  IntegrationResult out;
  if (record) {
    out.traj.times = Eigen::ArrayXd::LinSpaced(n_sub + 1, t, spec.T);
    out.traj.x.resize(n_sub + 1);
    out.traj.alpha.resize(n_sub + 1);
    out.traj.p = std::vector<Vec2>(n_sub + 1);
  }
  auto store = [&](int k, const Eigen::Vector4d& yk) {
    out.traj.x[k] = {yk[0], yk[1]};
    out.traj.alpha[k] = {yk[2], spec.h(yk[0]) * yk[3]};
    (*out.traj.p)[k] = {yk[2], yk[3]};
  };
  if (record) store(0, y);
  for (int k = 0; k < n_sub; ++k) {
    double s = t + k * dt;
    Eigen::Vector4d k1 = pontryagin_rhs(spec, m_path, y, s);
    Eigen::Vector4d k2 = pontryagin_rhs(spec, m_path, y + 0.5 * dt * k1, s + 0.5 * dt);
    Eigen::Vector4d k3 = pontryagin_rhs(spec, m_path, y + 0.5 * dt * k2, s + 0.5 * dt);
    Eigen::Vector4d k4 = pontryagin_rhs(spec, m_path, y + dt * k3, s + dt);
    y += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!y.allFinite() || y.norm() > 1e8) throw std::runtime_error("shooting diverged");
    if (record) store(k + 1, y);
  }
  out.yT = y;
  return out;
}

}  // namespace

ShootingResult shoot(const ProblemSpec& spec, const SolverSettings& st, const MeasurePath& m_path,
                     const Vec2& x0, double t, const Vec2& p0_guess) {
  if (!(t >= 0 && t < spec.T)) throw std::invalid_argument("shoot: t outside [0,T)");
  const int n_sub = substeps(st, spec.T, t);
  const ParticleCloud& mT = m_path.clouds.back();

  auto S = [&](const Vec2& p0) -> Vec2 {
    IntegrationResult r = integrate_pontryagin(spec, m_path, x0, t, p0, n_sub, false);
    Vec2 xT{r.yT[0], r.yT[1]};
    return Vec2{r.yT[2], r.yT[3]} + spec.G.gradient(mT, xT);
  };

  Vec2 p0 = p0_guess;
  Vec2 res = S(p0);
  int it = 0;
  for (; it < st.shooting_max_iters && res.norm() >= st.shooting_tol; ++it) {
    double fd = 1e-6 * (1.0 + p0.norm());
    Eigen::Matrix2d J;
    J.col(0) = (S(p0 + Vec2{fd, 0}) - res) / fd;
    J.col(1) = (S(p0 + Vec2{0, fd}) - res) / fd;
    Vec2 step = J.fullPivLu().solve(-res);
    double lambda = 1.0;
    Vec2 p_new = p0 + step;
    Vec2 res_new = S(p_new);
    for (int back = 0; back < 10 && res_new.norm() >= res.norm(); ++back) {
      lambda *= 0.5;
      p_new = p0 + lambda * step;
      res_new = S(p_new);
    }
    if (res_new.norm() >= res.norm()) break;  // stagnation
    p0 = p_new;
    res = res_new;
  }

  ShootingResult out;
  out.residual = res.norm();
  out.newton_iters = it;
  out.converged = out.residual < st.shooting_tol;
  out.trajectory = integrate_pontryagin(spec, m_path, x0, t, p0, n_sub, true).traj;
  return out;
}

NecessaryConditionsReport necessary_conditions_residual(const ProblemSpec& spec,
                                                        const MeasurePath& m_path,
                                                        const Trajectory& traj) {
  if (!traj.p) throw std::invalid_argument("necessary_conditions_residual: trajectory has no costate");
  NecessaryConditionsReport rep;
  const int n = traj.n();
  const std::vector<Vec2>& p = *traj.p;
  for (int k = 1; k + 1 < n; ++k) {
    double dt2 = traj.times[k + 1] - traj.times[k - 1];
    Eigen::Vector4d dy{(traj.x[k + 1].x() - traj.x[k - 1].x()) / dt2,
                       (traj.x[k + 1].y() - traj.x[k - 1].y()) / dt2,
                       (p[k + 1].x() - p[k - 1].x()) / dt2, (p[k + 1].y() - p[k - 1].y()) / dt2};
    Eigen::Vector4d y{traj.x[k].x(), traj.x[k].y(), p[k].x(), p[k].y()};
    Eigen::Vector4d r = dy - pontryagin_rhs(spec, m_path, y, traj.times[k]);
    rep.ode_residual = std::max(rep.ode_residual, r.cwiseAbs().maxCoeff());
  }
  for (int k = 0; k < n; ++k) {
    double hv = spec.h(traj.x[k].x());
    rep.feedback_residual =
        std::max({rep.feedback_residual, std::abs(traj.alpha[k].x() - p[k].x()),
                  std::abs(traj.alpha[k].y() - p[k].y() * hv)});
    // sup_a p.b(x,a) - 1/2|a|^2 is attained at a = (p1, p2 h), value
    // (p1^2 + h^2 p2^2)/2
    double sup = 0.5 * (p[k].x() * p[k].x() + hv * hv * p[k].y() * p[k].y());
    double at_alpha = p[k].x() * traj.alpha[k].x() + p[k].y() * hv * traj.alpha[k].y() -
                      0.5 * traj.alpha[k].squaredNorm();
    rep.maximality_gap = std::max(rep.maximality_gap, sup - at_alpha);
  }
  rep.transversality =
      (p.back() + spec.G.gradient(m_path.clouds.back(), traj.x.back())).norm();
  return rep;
}

double dpp_check(const ProblemSpec& spec, const MeasurePath& m_path, const ValueFunctionPath& u,
                 const Trajectory& traj, double r) {
  const double t = traj.t_start();
  if (r < t - 1e-12 || r > traj.t_end() + 1e-12)
    throw std::invalid_argument("dpp_check: r outside the trajectory span");
  double integral = 0;
  Vec2 xr = traj.x[0];
  auto integrand = [&](int k) {
    return 0.5 * traj.alpha[k].squaredNorm() + f_eval(spec, m_path, traj.x[k], traj.times[k]);
  };
  for (int k = 0; k + 1 < traj.n(); ++k) {
    double s0 = traj.times[k], s1 = traj.times[k + 1];
    if (s1 <= r) {
      integral += (s1 - s0) * 0.5 * (integrand(k) + integrand(k + 1));
      xr = traj.x[k + 1];
    } else if (s0 < r) {
      double th = (r - s0) / (s1 - s0);
      double mid = (1 - th) * integrand(k) + th * integrand(k + 1);
      integral += (r - s0) * 0.5 * (integrand(k) + mid);
      xr = (1 - th) * traj.x[k] + th * traj.x[k + 1];
    }
  }
  return std::abs(u.value(traj.x[0], t) - u.value(xr, r) - integral);
}

Trajectory concatenate(const Trajectory& traj1, const Trajectory& traj2, double tol) {
  if ((traj1.x.back() - traj2.x.front()).norm() > tol ||
      std::abs(traj1.t_end() - traj2.t_start()) > tol)
    throw std::runtime_error("concatenate: non-matching concatenation");
  Trajectory out;
  const int n1 = traj1.n(), n2 = traj2.n();
  out.times = Eigen::ArrayXd(n1 + n2 - 1);
  out.times.head(n1) = traj1.times;
  out.times.tail(n2 - 1) = traj2.times.tail(n2 - 1);
  out.x = traj1.x;
  out.x.insert(out.x.end(), traj2.x.begin() + 1, traj2.x.end());
  out.alpha = traj1.alpha;
  out.alpha.insert(out.alpha.end(), traj2.alpha.begin() + 1, traj2.alpha.end());
  if (traj1.p && traj2.p) {
    out.p = *traj1.p;
    out.p->insert(out.p->end(), traj2.p->begin() + 1, traj2.p->end());
  }
  return out;
}

Trajectory restrict_from(const Trajectory& traj, double r) {
  int k0 = 0;
  while (k0 + 1 < traj.n() && traj.times[k0] < r - 1e-12) ++k0;
  Trajectory out;
  const int n = traj.n() - k0;
  out.times = traj.times.tail(n);
  out.x.assign(traj.x.begin() + k0, traj.x.end());
  out.alpha.assign(traj.alpha.begin() + k0, traj.alpha.end());
  if (traj.p) out.p = std::vector<Vec2>(traj.p->begin() + k0, traj.p->end());
  return out;
}

RestTimeReport rest_time(const DegeneracyProfile& h, const Trajectory& traj, double tol) {
  RestTimeReport rep;
  rep.t_rest = traj.t_start();
  rep.t_stationary = traj.t_start();
  const Vec2 x0 = traj.x[0];
  bool resting = true, stationary = true;
  for (int k = 0; k < traj.n(); ++k) {
    if (resting && (traj.x[k] - x0).norm() <= tol)
      rep.t_rest = traj.times[k];
    else
      resting = false;
    if (stationary && std::abs(h(traj.x[k].x())) <= tol)
      rep.t_stationary = traj.times[k];
    else
      stationary = false;
  }
  double step = (traj.n() > 1) ? traj.times[1] - traj.times[0] : 0.0;
  rep.agree = std::abs(rep.t_rest - rep.t_stationary) <= step + 1e-12;
  return rep;
}

BifurcationReport bifurcation_probe(const ProblemSpec& spec, const SolverSettings& st,
                                    const MeasurePath& m_path, const ValueFunctionPath& u,
                                    const Vec2& x0, double t, double r, int n_restarts) {
  if (n_restarts < 2) throw std::invalid_argument("bifurcation_probe: need n_restarts >= 2");
  ShootingResult base = shoot(spec, st, m_path, x0, t, seed_costate(spec, m_path, u, x0, t));
  if (!base.converged) throw std::runtime_error("bifurcation_probe: base solve did not converge");

  // state and costate at the restart time, from the base trajectory
  const Trajectory& btr = base.trajectory;
  int kr = 0;
  for (int k = 0; k < btr.n(); ++k)
    if (std::abs(btr.times[k] - r) < std::abs(btr.times[kr] - r)) kr = k;
  const Vec2 xr = btr.x[kr];
  const Vec2 pr = (*btr.p)[kr];

  std::vector<Trajectory> converged;
  std::vector<double> costs;
  const double ring = 0.5 * (1.0 + pr.norm());
  for (int j = 0; j < n_restarts; ++j) {
    Vec2 guess;
    if (j == 0)
      guess = pr;
    else if (j == 1)
      guess = Vec2::Zero();
    else {
      double th = 2.0 * M_PI * (j - 2) / std::max(1, n_restarts - 2);
      guess = pr + ring * Vec2{std::cos(th), std::sin(th)};
    }
    try {
      ShootingResult sr = shoot(spec, st, m_path, xr, r, guess);
      if (sr.converged) {
        converged.push_back(std::move(sr.trajectory));
        costs.push_back(cost(spec, m_path, converged.back()));
      }
    } catch (const std::runtime_error&) {
      // divergent initialization: skip this restart
    }
  }

  BifurcationReport rep;
  rep.n_converged = static_cast<int>(converged.size());
  if (rep.n_converged < 2) return rep;
  const double cost_tol = 1e-4;
  double best = *std::min_element(costs.begin(), costs.end());
  std::vector<int> keep;
  for (size_t i = 0; i < converged.size(); ++i)
    if (costs[i] <= best + cost_tol) keep.push_back(static_cast<int>(i));
  rep.conclusive = keep.size() >= 2;
  for (size_t a = 0; a < keep.size(); ++a)
    for (size_t b = a + 1; b < keep.size(); ++b) {
      const Trajectory& ta = converged[keep[a]];
      const Trajectory& tb = converged[keep[b]];
      for (int k = 0; k < std::min(ta.n(), tb.n()); ++k)
        rep.max_distance = std::max(rep.max_distance, (ta.x[k] - tb.x[k]).norm());
    }
  return rep;
}

Trajectory rollout_feedback(const ProblemSpec& spec, const ValueFunctionPath& u, const Vec2& x0,
                            double t) {
  const TimeGrid& tg = u.time_grid;
  int k0 = std::clamp(static_cast<int>(std::lround((t - tg.t0) / tg.dt)), 0, tg.n_steps - 1);
  const Grid& g = u.slices[0].grid;
  const int n = tg.n_steps - k0;
  Trajectory tr;
  tr.times = Eigen::ArrayXd::LinSpaced(n + 1, tg.time(k0), tg.T);
  tr.x.resize(n + 1);
  tr.alpha.resize(n + 1);
  tr.x[0] = x0;
  for (int k = 0; k < n; ++k) {
    const FeedbackSlice& fb = u.feedback[k0 + k];
    auto vel = [&](const Vec2& x) -> Vec2 {
      return spec.dynamics(x, {bilinear(g, fb.a1, x), bilinear(g, fb.a2, x)});
    };
    const Vec2& x = tr.x[k];
    tr.alpha[k] = {bilinear(g, fb.a1, x), bilinear(g, fb.a2, x)};
    Vec2 k1 = vel(x);
    Vec2 k2 = vel(x + 0.5 * tg.dt * k1);
    Vec2 k3 = vel(x + 0.5 * tg.dt * k2);
    Vec2 k4 = vel(x + tg.dt * k3);
    tr.x[k + 1] = x + tg.dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  const FeedbackSlice& fb_last = u.feedback[tg.n_steps - 1];
  tr.alpha[n] = {bilinear(g, fb_last.a1, tr.x[n]), bilinear(g, fb_last.a2, tr.x[n])};
  return tr;
}

}  // namespace mfg
