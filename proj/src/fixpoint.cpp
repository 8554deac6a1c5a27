#include "mfg/fixpoint.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace mfg {

std::pair<ValueFunctionPath, MeasurePath> apply_T(const ProblemSpec& spec,
                                                  const SolverSettings& st,
                                                  const MeasurePath& m_path) {
  ValueFunctionPath u = solve_hjb(spec, st, m_path);
  MeasurePath mu = push_forward(spec, u, sample_m0(spec, st.n_particles, st.seed));
  return {std::move(u), std::move(mu)};
}

double path_distance(const MeasurePath& a, const MeasurePath& b) {
  if (a.clouds.size() != b.clouds.size())
    throw std::invalid_argument("path_distance: different time grids");
  const int n = static_cast<int>(a.clouds.size()) - 1;
  double sup = 0;
  for (double fr : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    int k = static_cast<int>(std::lround(fr * n));
    sup = std::max(sup, d1(a.clouds[k], b.clouds[k]));
  }
  return sup;
}

namespace {

// (1-theta) a + theta b as one cloud; coincident positions merge (so the
// initial cloud, shared by every iterate, never grows), tiny weights are
// pruned and the result renormalized. The prune threshold is raised until
// the support fits under the exact-d1 cap.
ParticleCloud mix_clouds(const ParticleCloud& a, const ParticleCloud& b, double theta) {
  std::map<std::pair<double, double>, double> acc;
  for (int i = 0; i < a.size(); ++i)
    acc[{a.positions[i].x(), a.positions[i].y()}] += (1 - theta) * a.weights[i];
  for (int i = 0; i < b.size(); ++i)
    acc[{b.positions[i].x(), b.positions[i].y()}] += theta * b.weights[i];

  double prune = 1e-6;
  while (true) {
    int live = 0;
    for (const auto& kv : acc)
      if (kv.second >= prune) ++live;
    if (live <= 3500) break;
    prune *= 2;
  }
  ParticleCloud out;
  for (const auto& kv : acc)
    if (kv.second >= prune) out.positions.emplace_back(kv.first.first, kv.first.second);
  out.weights = Eigen::ArrayXd(static_cast<Eigen::Index>(out.positions.size()));
  int j = 0;
  for (const auto& kv : acc)
    if (kv.second >= prune) out.weights[j++] = kv.second;
  out.weights /= out.weights.sum();
  return out;
}

}  // namespace

FixpointState solve_mfg(const ProblemSpec& spec, const SolverSettings& st, double theta,
                        double tol, int max_iters) {
  if (!(theta > 0 && theta <= 1)) throw std::invalid_argument("solve_mfg: theta outside (0,1]");
  spec.validate();
  const TimeGrid tg = st.make_time_grid(spec.T);
  ParticleCloud m0c = sample_m0(spec, st.n_particles, st.seed);
  // initial guess: the best response to the frozen initial measure, so a
  // decoupled problem is already a fixed point at iteration one
  MeasurePath m = apply_T(spec, st, constant_path(tg, m0c)).second;

  FixpointState state;
  state.theta = theta;
  for (int it = 0; it < max_iters; ++it) {
    auto [u, mu] = apply_T(spec, st, m);
    double res = path_distance(m, mu);
    state.iterate = it + 1;
    state.u = std::move(u);
    state.residual = res;
    state.residual_history.push_back(res);
    if (res < tol) {
      state.m_path = std::move(mu);
      state.converged = true;
      return state;
    }
    for (size_t k = 0; k < m.clouds.size(); ++k)
      m.clouds[k] = mix_clouds(m.clouds[k], mu.clouds[k], theta);
    state.m_path = m;
  }
  return state;  // best effort, converged=false
}

double monotonicity_uniqueness_probe(const FixpointState& a, const FixpointState& b) {
  return path_distance(a.m_path, b.m_path);
}

SolutionPairReport check_solution_pair(const ProblemSpec& spec, const SolverSettings& st,
                                       const FixpointState& state) {
  SolutionPairReport rep;
  const ValueFunctionPath& u = state.u;
  const MeasurePath& m = state.m_path;
  const Grid& g = u.slices[0].grid;
  const double dt = u.time_grid.dt;

  // the stored feedback must reproduce the one-step recursion it minimized
  for (int k = 0; k < u.time_grid.n_steps; ++k) {
    const FeedbackSlice& fb = u.feedback[k];
    for (int i = 0; i < g.n1; i += 5) {
      double hv = spec.h(g.x1(i));
      for (int j = 0; j < g.n2; j += 5) {
        Vec2 x = g.node(i, j);
        Vec2 a{fb.a1[g.index(i, j)], fb.a2[g.index(i, j)]};
        Vec2 foot{x.x() + dt * a.x(), x.y() + dt * hv * a.y()};
        double val = dt * (0.5 * a.squaredNorm() + spec.F.eval(m.clouds[k], x)) +
                     u.slices[k + 1].interpolate(foot);
        rep.hjb_consistency = std::max(rep.hjb_consistency, std::abs(val - u.slices[k].at(i, j)));
      }
    }
  }

  BumpKernel psi{0.45 * std::min(g.box.width1(), g.box.width2())};
  const Vec2 c = spec.m0.center;
  TestFn fn;
  fn.value = [psi, c](const Vec2& x, double) { return psi.value(x - c); };
  fn.grad = [psi, c](const Vec2& x, double) { return psi.gradient(x - c); };
  fn.dt = [](const Vec2&, double) { return 0.0; };
  rep.transport_residual = weak_residual(spec, u, m, fn);
  return rep;
}

}  // namespace mfg
