#include "mfg/viscous.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "mfg/hjb.hpp"

namespace mfg {

namespace {

// Solve (I - c L) x = rhs along one axis for every line of the grid, where L
// is the flux-form Neumann 1D Laplacian (row sums zero, so line sums are
// preserved exactly). Thomas algorithm per line.
void implicit_diffuse_axis(const Grid& g, Eigen::ArrayXd& v, double c, int axis) {
  const int n = (axis == 0) ? g.n1 : g.n2;
  const int n_lines = (axis == 0) ? g.n2 : g.n1;
  const int stride = (axis == 0) ? g.n2 : 1;
  std::vector<double> b(n), rhs(n), cp(n), dp(n);
  for (int line = 0; line < n_lines; ++line) {
    const int base = (axis == 0) ? line : line * g.n2;
    for (int i = 0; i < n; ++i) {
      rhs[i] = v[base + i * stride];
      b[i] = 1.0 + ((i == 0 || i == n - 1) ? c : 2.0 * c);
    }
    // forward elimination, off-diagonals all equal -c
    cp[0] = -c / b[0];
    dp[0] = rhs[0] / b[0];
    for (int i = 1; i < n; ++i) {
      double m = b[i] + c * cp[i - 1];
      cp[i] = -c / m;
      dp[i] = (rhs[i] + c * dp[i - 1]) / m;
    }
    double x = dp[n - 1];
    v[base + (n - 1) * stride] = x;
    for (int i = n - 2; i >= 0; --i) {
      x = dp[i] - cp[i] * x;
      v[base + i * stride] = x;
    }
  }
}

void implicit_diffuse(const Grid& g, Eigen::ArrayXd& v, double sigma_dt) {
  if (sigma_dt <= 0) return;
  implicit_diffuse_axis(g, v, sigma_dt / (g.h1 * g.h1), 0);
  implicit_diffuse_axis(g, v, sigma_dt / (g.h2 * g.h2), 1);
}

// Godunov flux for the axis-separable convex Hamiltonian with minimum at 0:
// per axis, 1/2 max(max(D^-,0)^2, min(D^+,0)^2).
double godunov_axis(double dm, double dp) {
  double a = std::max(dm, 0.0);
  double b = std::min(dp, 0.0);
  return 0.5 * std::max(a * a, b * b);
}

}  // namespace

std::vector<ScalarField> solve_viscous_hjb(const ProblemSpec& spec, const SolverSettings& st,
                                           const MeasurePath& m_path, double sigma) {
  if (sigma <= 0) throw std::invalid_argument("solve_viscous_hjb: sigma must be > 0");
  spec.validate();
  const Grid g = st.make_grid(spec.box);
  const TimeGrid tg = st.make_time_grid(spec.T);

  std::vector<ScalarField> u(tg.n_steps + 1, ScalarField(g));
  u[tg.n_steps] = spec.G.eval_on_grid(g, m_path.clouds.back());

  for (int k = tg.n_steps - 1; k >= 0; --k) {
    const ScalarField f_k = spec.F.eval_on_grid(g, m_path.clouds[k]);
    const ScalarField& un = u[k + 1];
    ScalarField& uk = u[k];
    for (int i = 0; i < g.n1; ++i) {
      double h2v = spec.h(g.x1(i));
      h2v *= h2v;
      for (int j = 0; j < g.n2; ++j) {
        // one-sided differences with mirror (Neumann) walls
        double dm1 = (i > 0) ? (un.at(i, j) - un.at(i - 1, j)) / g.h1 : 0.0;
        double dp1 = (i + 1 < g.n1) ? (un.at(i + 1, j) - un.at(i, j)) / g.h1 : 0.0;
        double dm2 = (j > 0) ? (un.at(i, j) - un.at(i, j - 1)) / g.h2 : 0.0;
        double dp2 = (j + 1 < g.n2) ? (un.at(i, j + 1) - un.at(i, j)) / g.h2 : 0.0;
        double H = godunov_axis(dm1, dp1) + h2v * godunov_axis(dm2, dp2);
        uk.at(i, j) = un.at(i, j) + tg.dt * (f_k.at(i, j) - H);
      }
    }
    implicit_diffuse(g, uk.values, sigma * tg.dt);
    if (!uk.values.allFinite())
      throw std::runtime_error("solve_viscous_hjb: blow-up at step " + std::to_string(k));
  }
  return u;
}

ScalarField m0_on_grid(const ProblemSpec& spec, const Grid& grid) {
  ScalarField m(grid);
  m.fill([&](const Vec2& x) { return spec.m0.density(x); });
  double mass = m.values.sum() * grid.h1 * grid.h2;
  if (mass <= 0) throw std::runtime_error("m0_on_grid: grid misses the initial density");
  m.values /= mass;
  return m;
}

std::vector<ScalarField> solve_fokker_planck(const ProblemSpec& spec, const SolverSettings& st,
                                             const std::vector<ScalarField>& u_slices,
                                             double sigma, const ScalarField& m0_field) {
  if (sigma <= 0) throw std::invalid_argument("solve_fokker_planck: sigma must be > 0");
  const Grid& g = m0_field.grid;
  const TimeGrid tg = st.make_time_grid(spec.T);
  if (static_cast<int>(u_slices.size()) != tg.n_steps + 1)
    throw std::invalid_argument("solve_fokker_planck: u_slices/time grid mismatch");

  std::vector<ScalarField> m(tg.n_steps + 1, ScalarField(g));
  m[0] = m0_field;

  // face drift velocities w = (-u_{x1}, -h^2 u_{x2}), rebuilt per step
  Eigen::ArrayXd w1((g.n1 - 1) * g.n2), w2(g.n1 * (g.n2 - 1));
  std::vector<double> h2row(g.n1);
  for (int i = 0; i < g.n1; ++i) {
    double hv = spec.h(g.x1(i));
    h2row[i] = hv * hv;
  }

  for (int k = 0; k < tg.n_steps; ++k) {
    const ScalarField& u = u_slices[k];
    double max_rate = 0;
    for (int i = 0; i + 1 < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        double w = -(u.at(i + 1, j) - u.at(i, j)) / g.h1;
        w1[i * g.n2 + j] = w;
        max_rate = std::max(max_rate, std::abs(w) / g.h1);
      }
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j + 1 < g.n2; ++j) {
        double w = -h2row[i] * (u.at(i, j + 1) - u.at(i, j)) / g.h2;
        w2[i * (g.n2 - 1) + j] = w;
        max_rate = std::max(max_rate, std::abs(w) / g.h2);
      }
    int n_sub = std::max(1, static_cast<int>(std::ceil(tg.dt * max_rate / 0.45)));
    double dts = tg.dt / n_sub;

    Eigen::ArrayXd cur = m[k].values;
    for (int sub = 0; sub < n_sub; ++sub) {
      Eigen::ArrayXd next = cur;
      for (int i = 0; i + 1 < g.n1; ++i)
        for (int j = 0; j < g.n2; ++j) {
          double w = w1[i * g.n2 + j];
          double flux = w * ((w > 0) ? cur[g.index(i, j)] : cur[g.index(i + 1, j)]);
          next[g.index(i, j)] -= dts / g.h1 * flux;
          next[g.index(i + 1, j)] += dts / g.h1 * flux;
        }
      for (int i = 0; i < g.n1; ++i)
        for (int j = 0; j + 1 < g.n2; ++j) {
          double w = w2[i * (g.n2 - 1) + j];
          double flux = w * ((w > 0) ? cur[g.index(i, j)] : cur[g.index(i, j + 1)]);
          next[g.index(i, j)] -= dts / g.h2 * flux;
          next[g.index(i, j + 1)] += dts / g.h2 * flux;
        }
      implicit_diffuse(g, next, sigma * dts);
      cur.swap(next);
    }
    if (cur.minCoeff() < -1e-12)
      throw std::runtime_error("solve_fokker_planck: negative density, scheme violation at step " +
                               std::to_string(k));
    m[k + 1].values = cur;
  }
  return m;
}

ParticleCloud field_to_cloud(const ScalarField& density, int cap) {
  const Grid& g = density.grid;
  ParticleCloud out;
  std::vector<std::pair<int, double>> cells;
  double cell = g.h1 * g.h2;
  for (int idx = 0; idx < g.size(); ++idx)
    if (density.values[idx] * cell > 1e-15) cells.emplace_back(idx, density.values[idx] * cell);
  // coarsen until the support fits the exact-transport cap
  int level = 1;
  while (static_cast<int>(cells.size()) > cap) {
    ++level;
    std::vector<std::pair<int, double>> merged;
    std::map<std::pair<int, int>, double> bins;
    for (auto& [idx, w] : cells) {
      int i = idx / g.n2, j = idx % g.n2;
      bins[{i / level * level, j / level * level}] += w;
    }
    cells.clear();
    for (auto& [ij, w] : bins) cells.emplace_back(g.index(ij.first, ij.second), w);
  }
  out.positions.reserve(cells.size());
  out.weights = Eigen::ArrayXd(static_cast<Eigen::Index>(cells.size()));
  double total = 0;
  for (auto& [idx, w] : cells) total += w;
  for (size_t k = 0; k < cells.size(); ++k) {
    out.positions.push_back(g.node(cells[k].first / g.n2, cells[k].first % g.n2));
    out.weights[static_cast<Eigen::Index>(k)] = cells[k].second / total;
  }
  return out;
}

ViscousSolution solve_viscous(const ProblemSpec& spec, const SolverSettings& st,
                              const MeasurePath& m_path, double sigma) {
  ViscousSolution sol;
  sol.sigma = sigma;
  sol.u_slices = solve_viscous_hjb(spec, st, m_path, sigma);
  const Grid& g = sol.u_slices[0].grid;
  sol.m_slices = solve_fokker_planck(spec, st, sol.u_slices, sigma, m0_on_grid(spec, g));

  ViscousEstimates& e = sol.report;
  const double cell = g.h1 * g.h2;
  e.m_min = 0;
  for (const ScalarField& u : sol.u_slices) {
    e.u_inf = std::max(e.u_inf, u.max_abs());
    e.semiconcavity = std::max(e.semiconcavity, semiconcavity_diagnostic(u));
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        double d1v = (i + 1 < g.n1) ? (u.at(i + 1, j) - u.at(i, j)) / g.h1 : 0.0;
        double d2v = (j + 1 < g.n2) ? (u.at(i, j + 1) - u.at(i, j)) / g.h2 : 0.0;
        e.du_inf = std::max(e.du_inf, std::hypot(d1v, d2v));
      }
  }
  for (const ScalarField& m : sol.m_slices) {
    e.m_inf = std::max(e.m_inf, m.values.maxCoeff());
    e.m_min = std::min(e.m_min, m.values.minCoeff());
    e.mass_error = std::max(e.mass_error, std::abs(m.values.sum() * cell - 1.0));
    double mom = 0;
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j)
        mom += m.at(i, j) * cell * g.node(i, j).squaredNorm();
    e.moment2_max = std::max(e.moment2_max, mom);
  }
  // half-Hoelder quotients of t -> m(t) in d1 at five probe times
  const TimeGrid tg = st.make_time_grid(spec.T);
  std::vector<int> probes;
  for (double fr : {0.0, 0.25, 0.5, 0.75, 1.0})
    probes.push_back(static_cast<int>(std::lround(fr * tg.n_steps)));
  std::vector<ParticleCloud> clouds;
  for (int k : probes) clouds.push_back(field_to_cloud(sol.m_slices[k]));
  for (size_t a = 0; a < probes.size(); ++a)
    for (size_t b = a + 1; b < probes.size(); ++b) {
      double dt = (probes[b] - probes[a]) * tg.dt;
      if (dt <= 0) continue;
      e.holder_quotient =
          std::max(e.holder_quotient, d1(clouds[a], clouds[b]) / std::sqrt(dt));
    }
  return sol;
}

SweepResult sigma_sweep(const ProblemSpec& spec, const SolverSettings& st,
                        const MeasurePath& m_path, const std::vector<double>& sigmas) {
  for (size_t i = 1; i < sigmas.size(); ++i)
    if (!(sigmas[i] < sigmas[i - 1]))
      throw std::invalid_argument("sigma_sweep: sigmas must be strictly decreasing");
  SweepResult out;
  for (double s : sigmas) {
    out.solutions.push_back(solve_viscous(spec, st, m_path, s));
    SweepRow row;
    row.sigma = s;
    row.est = out.solutions.back().report;
    if (out.solutions.size() > 1) {
      const auto& ua = out.solutions[out.solutions.size() - 2].u_slices;
      const auto& ub = out.solutions.back().u_slices;
      for (size_t k = 0; k < ua.size(); ++k)
        row.dist_to_prev_sigma =
            std::max(row.dist_to_prev_sigma, (ua[k].values - ub[k].values).abs().maxCoeff());
    }
    out.table.push_back(row);
  }
  return out;
}

}  // namespace mfg
