#include "mfg/hjb.hpp"

#include <cmath>
#include <stdexcept>

#include "mfg/transport.hpp"

namespace mfg {

double ValueFunctionPath::value(const Vec2& x, double t) const {
  int k = static_cast<int>(std::floor((t - time_grid.t0) / time_grid.dt + 0.5));
  k = std::clamp(k, 0, time_grid.n_steps);
  return slices[k].interpolate(x);
}

Vec2 ValueFunctionPath::feedback_at(const Vec2& x, double t) const {
  int k = static_cast<int>(std::floor((t - time_grid.t0) / time_grid.dt));
  k = std::clamp(k, 0, static_cast<int>(feedback.size()) - 1);
  const Grid& g = slices[0].grid;
  return {bilinear(g, feedback[k].a1, x), bilinear(g, feedback[k].a2, x)};
}

std::vector<Vec2> control_set(double A_max, int n_radial, int n_angular) {
  if (A_max <= 0) throw std::invalid_argument("control_set: A_max must be > 0");
  std::vector<Vec2> out;
  out.reserve(1 + std::max(0, n_radial) * std::max(0, n_angular));
  out.emplace_back(0.0, 0.0);
  for (int r = 1; r <= n_radial; ++r) {
    double rad = A_max * r / n_radial;
    for (int a = 0; a < n_angular; ++a) {
      double th = 2.0 * M_PI * a / n_angular;
      out.emplace_back(rad * std::cos(th), rad * std::sin(th));
    }
  }
  return out;
}

namespace {

// Gradient of the interpolated slice by central differences with step equal to
// one grid cell; exact for fields that are quadratic per axis. Returns false if
// the stencil would leave the box.
bool interp_gradient(const ScalarField& u, const Vec2& x, Vec2& grad) {
  const Grid& g = u.grid;
  if (x.x() - g.h1 < g.box.x1_min || x.x() + g.h1 > g.box.x1_max ||
      x.y() - g.h2 < g.box.x2_min || x.y() + g.h2 > g.box.x2_max)
    return false;
  grad.x() = (u.interpolate({x.x() + g.h1, x.y()}) - u.interpolate({x.x() - g.h1, x.y()})) /
             (2 * g.h1);
  grad.y() = (u.interpolate({x.x(), x.y() + g.h2}) - u.interpolate({x.x(), x.y() - g.h2})) /
             (2 * g.h2);
  return true;
}

}  // namespace

void hjb_backward_step(const ProblemSpec& spec, const SolverSettings& st,
                       const std::vector<Vec2>& controls, const ScalarField& f_k,
                       const ScalarField& u_next, double dt, ScalarField& u_k,
                       FeedbackSlice& fb) {
  if (controls.empty() || dt <= 0) throw std::invalid_argument("hjb: empty control set or dt<=0");
  const Grid& g = u_next.grid;
  u_k = ScalarField(g);
  fb.a1 = Eigen::ArrayXd::Zero(g.size());
  fb.a2 = Eigen::ArrayXd::Zero(g.size());

  for (int i = 0; i < g.n1; ++i) {
    double hv = spec.h(g.x1(i));
    for (int j = 0; j < g.n2; ++j) {
      const Vec2 x = g.node(i, j);
      const double fx = f_k.at(i, j);
      double best = std::numeric_limits<double>::infinity();
      Vec2 best_a = Vec2::Zero();
      for (const Vec2& a : controls) {
        Vec2 foot{x.x() + dt * a.x(), x.y() + dt * hv * a.y()};
        double val = dt * (0.5 * a.squaredNorm() + fx) + u_next.interpolate(foot);
        if (val < best) {  // strict: lowest-index control wins ties
          best = val;
          best_a = a;
        }
      }
      if (st.polish_feedback) {
        // Continuous refinement of the argmin: fixed point of the first-order
        // condition alpha = -(d1 u(foot), h(x1) d2 u(foot)).
        Vec2 a = best_a;
        bool ok = true;
        for (int it = 0; it < 8 && ok; ++it) {
          Vec2 foot{x.x() + dt * a.x(), x.y() + dt * hv * a.y()};
          Vec2 grad;
          ok = interp_gradient(u_next, foot, grad);
          if (!ok) break;
          Vec2 a_new{-grad.x(), -hv * grad.y()};
          double n = a_new.norm();
          if (n > spec.A_max) a_new *= spec.A_max / n;
          if ((a_new - a).norm() < 1e-14) {
            a = a_new;
            break;
          }
          a = a_new;
        }
        if (ok) {
          Vec2 foot{x.x() + dt * a.x(), x.y() + dt * hv * a.y()};
          double val = dt * (0.5 * a.squaredNorm() + fx) + u_next.interpolate(foot);
          if (val < best) {
            best = val;
            best_a = a;
          }
        }
      }
      if (!std::isfinite(best)) throw std::runtime_error("hjb: non-finite value encountered");
      u_k.at(i, j) = best;
      fb.a1[g.index(i, j)] = best_a.x();
      fb.a2[g.index(i, j)] = best_a.y();
    }
  }
}

ValueFunctionPath solve_hjb_with_costs(const ProblemSpec& spec, const SolverSettings& st,
                                       const std::vector<ScalarField>& f_slices,
                                       const ScalarField& g_term) {
  spec.validate();
  TimeGrid tg = st.make_time_grid(spec.T);
  if (static_cast<int>(f_slices.size()) < tg.n_steps)
    throw std::invalid_argument("hjb: f_slices shorter than time grid");
  const Grid& g = g_term.grid;
  if (tg.dt > g.h1 / spec.A_max * (1.0 + 1e-12))
    throw std::invalid_argument("hjb: dt exceeds h1/A_max, refine time grid");

  ValueFunctionPath u;
  u.time_grid = tg;
  u.slices.resize(tg.n_steps + 1, ScalarField(g));
  u.feedback.resize(tg.n_steps);
  u.slices[tg.n_steps] = g_term;

  const std::vector<Vec2> controls = control_set(spec.A_max, st.n_radial, st.n_angular);
  for (int k = tg.n_steps - 1; k >= 0; --k) {
    try {
      hjb_backward_step(spec, st, controls, f_slices[k], u.slices[k + 1], tg.dt, u.slices[k],
                        u.feedback[k]);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) + " at slice " + std::to_string(k));
    }
  }
  return u;
}

ValueFunctionPath solve_hjb(const ProblemSpec& spec, const SolverSettings& st,
                            const MeasurePath& m_path) {
  TimeGrid tg = st.make_time_grid(spec.T);
  if (m_path.time_grid.n_steps != tg.n_steps)
    throw std::invalid_argument("hjb: m_path time grid mismatch");
  Grid g = st.make_grid(spec.box);
  std::vector<ScalarField> f_slices;
  f_slices.reserve(tg.n_steps);
  for (int k = 0; k < tg.n_steps; ++k)
    f_slices.push_back(spec.F.eval_on_grid(g, m_path.clouds[k]));
  ScalarField g_term = spec.G.eval_on_grid(g, m_path.clouds[tg.n_steps]);
  return solve_hjb_with_costs(spec, st, f_slices, g_term);
}

std::pair<double, double> lipschitz_diagnostic(const ValueFunctionPath& u) {
  double Ls = 0, Lt = 0;
  const Grid& g = u.slices[0].grid;
  for (size_t k = 0; k < u.slices.size(); ++k) {
    const ScalarField& s = u.slices[k];
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        double d1 = (i + 1 < g.n1) ? (s.at(i + 1, j) - s.at(i, j)) / g.h1 : 0.0;
        double d2 = (j + 1 < g.n2) ? (s.at(i, j + 1) - s.at(i, j)) / g.h2 : 0.0;
        Ls = std::max(Ls, std::hypot(d1, d2));
        if (k + 1 < u.slices.size())
          Lt = std::max(Lt, std::abs(u.slices[k + 1].at(i, j) - s.at(i, j)) / u.time_grid.dt);
      }
  }
  return {Ls, Lt};
}

double semiconcavity_diagnostic(const ScalarField& s) {
  const Grid& g = s.grid;
  double m = -std::numeric_limits<double>::infinity();
  for (int i = 1; i + 1 < g.n1; ++i)
    for (int j = 1; j + 1 < g.n2; ++j) {
      double d11 = (s.at(i + 1, j) + s.at(i - 1, j) - 2 * s.at(i, j)) / (g.h1 * g.h1);
      double d22 = (s.at(i, j + 1) + s.at(i, j - 1) - 2 * s.at(i, j)) / (g.h2 * g.h2);
      m = std::max(m, std::max(d11, d22));
    }
  return m;
}

HjbDiagnostics hjb_diagnostics(const ValueFunctionPath& u) {
  HjbDiagnostics d;
  for (size_t k = 0; k < u.slices.size(); ++k) {
    d.t.push_back(u.time_grid.time(static_cast<int>(k)));
    d.linf.push_back(u.slices[k].max_abs());
    d.semiconcavity.push_back(semiconcavity_diagnostic(u.slices[k]));
  }
  auto [Ls, Lt] = lipschitz_diagnostic(u);
  d.L_space = Ls;
  d.L_time = Lt;
  return d;
}

}  // namespace mfg
