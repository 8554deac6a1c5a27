#include <doctest.h>

#include <cmath>
#include <random>

#include "mfg/hjb.hpp"
#include "mfg/transport.hpp"

using namespace mfg;

namespace {

ProblemSpec flat_spec() {
  // h == 1: the degenerate structure switches off and the closed-form
  // linear-quadratic solution u(x,t) = |x|^2 / (2(1+T-t)) is available
  ProblemSpec spec;
  spec.h = DegeneracyProfile::constant(1.0);
  spec.T = 1.0;
  spec.A_max = 2.0;
  spec.m0.radius = 0.5;
  spec.box = Box{-4, 4, -4, 4};
  spec.G.potential.kind = Potential::Kind::HalfSquare;
  return spec;
}

SolverSettings quick_settings() {
  SolverSettings st;
  st.n1 = st.n2 = 81;
  st.n_steps = 60;
  st.n_radial = 8;
  st.n_angular = 24;
  st.n_particles = 60;
  return st;
}

MeasurePath frozen_path(const ProblemSpec& spec, const SolverSettings& st) {
  return constant_path(st.make_time_grid(spec.T),
                       sample_m0(spec, st.n_particles, st.seed));
}

double lqr_value(const Vec2& x, double t, double T) { return 0.5 * x.squaredNorm() / (1 + T - t); }

}  // namespace

TEST_CASE("control set structure") {
  auto c = control_set(1.0, 1, 4);
  REQUIRE(c.size() == 5);
  CHECK(c[0] == Vec2{0, 0});
  CHECK(c[1].isApprox(Vec2{1, 0}));
  CHECK(c[2].isApprox(Vec2{0, 1}));
  CHECK(c[3].isApprox(Vec2{-1, 0}));
  CHECK(c[4].isApprox(Vec2{0, -1}));

  CHECK(control_set(3.0, 0, 16).size() == 1);
  CHECK(control_set(2.5, 7, 9).size() == 1 + 7 * 9);
  CHECK_THROWS_AS(control_set(0.0, 1, 4), std::invalid_argument);
}

TEST_CASE("zero data gives zero value and zero feedback") {
  ProblemSpec spec = flat_spec();
  spec.G.potential.kind = Potential::Kind::Zero;
  SolverSettings st = quick_settings();
  ValueFunctionPath u = solve_hjb(spec, st, frozen_path(spec, st));
  for (const ScalarField& s : u.slices) CHECK(s.max_abs() == 0.0);
  for (const FeedbackSlice& fb : u.feedback) {
    CHECK(fb.a1.abs().maxCoeff() == 0.0);
    CHECK(fb.a2.abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("linear-quadratic oracle on the core region") {
  ProblemSpec spec = flat_spec();
  SolverSettings st = quick_settings();
  ValueFunctionPath u = solve_hjb(spec, st, frozen_path(spec, st));
  double worst = 0;
  for (double t : {0.0, 0.5}) {
    for (double x1 = -1.5; x1 <= 1.5; x1 += 0.25)
      for (double x2 = -1.5; x2 <= 1.5; x2 += 0.25)
        worst = std::max(worst,
                         std::abs(u.value({x1, x2}, t) - lqr_value({x1, x2}, t, spec.T)));
  }
  // resolution-dependent bound: 81x81 with 60 steps lands near 4.5e-2
  CHECK(worst <= 5e-2);
}

TEST_CASE("variational oracle: brute-force minimization over terminal points") {
  // with h == 1 and f == 0 the value is inf_y |x-y|^2/(2(T-t)) + g(y)
  ProblemSpec spec = flat_spec();
  spec.G.potential.kind = Potential::Kind::Cosine;
  spec.G.potential.amp = 0.5;
  spec.G.potential.freq = 1.0;
  SolverSettings st = quick_settings();
  ValueFunctionPath u = solve_hjb(spec, st, frozen_path(spec, st));
  const Grid g = st.make_grid(spec.box);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  double worst = 0;
  for (int probe = 0; probe < 20; ++probe) {
    Vec2 x{U(rng), U(rng)};
    double t = 0.5;
    double best = 1e300;
    for (int i = 0; i < g.n1; ++i)
      for (int j = 0; j < g.n2; ++j) {
        Vec2 y = g.node(i, j);
        best = std::min(best, (x - y).squaredNorm() / (2 * (spec.T - t)) +
                                  spec.G.potential.value(y));
      }
    worst = std::max(worst, std::abs(u.value(x, t) - best));
  }
  CHECK(worst <= 3e-2);
}

TEST_CASE("scheme monotonicity without feedback polish") {
  ProblemSpec spec = flat_spec();
  SolverSettings st = quick_settings();
  st.polish_feedback = false;
  const Grid g = st.make_grid(spec.box);
  ScalarField f_k(g), u_next(g);
  u_next.fill([](const Vec2& x) { return std::sin(x.x()) * std::cos(0.7 * x.y()); });
  auto controls = control_set(spec.A_max, 4, 8);
  double dt = 0.02;

  ScalarField u_a, u_b;
  FeedbackSlice fb;
  hjb_backward_step(spec, st, controls, f_k, u_next, dt, u_a, fb);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> U(0.0, 0.3);
  ScalarField raised = u_next;
  for (int i = 0; i < raised.values.size(); ++i) raised.values[i] += U(rng);
  hjb_backward_step(spec, st, controls, f_k, raised, dt, u_b, fb);
  CHECK((u_b.values - u_a.values).minCoeff() >= -1e-12);
}

TEST_CASE("sup bound T |f| + |g|") {
  ProblemSpec spec = flat_spec();
  spec.F.potential.kind = Potential::Kind::Cosine;  // freq 0: f == amp everywhere
  spec.F.potential.freq = 0.0;
  spec.F.potential.amp = 0.7;
  SolverSettings st = quick_settings();
  ValueFunctionPath u = solve_hjb(spec, st, frozen_path(spec, st));
  double g_inf = 0.5 * spec.box.diameter() * spec.box.diameter() / 4;  // |x|^2/2 corner bound
  for (const ScalarField& s : u.slices) CHECK(s.max_abs() <= spec.T * 0.7 + g_inf + 1e-9);
}

TEST_CASE("stored feedback reproduces the one-step recursion") {
  ProblemSpec spec = flat_spec();
  SolverSettings st = quick_settings();
  MeasurePath mp = frozen_path(spec, st);
  ValueFunctionPath u = solve_hjb(spec, st, mp);
  const Grid& g = u.slices[0].grid;
  double dt = u.time_grid.dt;
  double worst = 0;
  for (int k : {0, 29, 59}) {
    const FeedbackSlice& fb = u.feedback[k];
    for (int i = 0; i < g.n1; i += 7)
      for (int j = 0; j < g.n2; j += 7) {
        Vec2 x = g.node(i, j);
        Vec2 a{fb.a1[g.index(i, j)], fb.a2[g.index(i, j)]};
        Vec2 foot{x.x() + dt * a.x(), x.y() + dt * spec.h(x.x()) * a.y()};
        double v = dt * 0.5 * a.squaredNorm() + u.slices[k + 1].interpolate(foot);
        worst = std::max(worst, std::abs(v - u.slices[k].at(i, j)));
      }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("time step guard against control overshoot") {
  ProblemSpec spec = flat_spec();
  SolverSettings st = quick_settings();
  st.n_steps = 10;  // dt = 0.1 > h1/A_max = 0.05
  CHECK_THROWS_WITH_AS(solve_hjb(spec, st, frozen_path(spec, st)), doctest::Contains("dt"),
                       std::invalid_argument);
}

TEST_CASE("lipschitz and semiconcavity diagnostics on analytic fields") {
  Grid g(Box{-2, 2, -2, 2}, 41, 41);
  ValueFunctionPath u;
  u.time_grid = TimeGrid(0, 1, 2);
  u.slices.assign(3, ScalarField(g));
  auto [L0, Lt0] = lipschitz_diagnostic(u);
  CHECK(L0 == 0.0);
  CHECK(Lt0 == 0.0);

  for (auto& s : u.slices) s.fill([](const Vec2& x) { return x.x(); });
  auto [L1, Lt1] = lipschitz_diagnostic(u);
  CHECK(L1 == doctest::Approx(1.0));
  CHECK(Lt1 == doctest::Approx(0.0));

  ScalarField q(g);
  q.fill([](const Vec2& x) { return -x.squaredNorm(); });
  CHECK(semiconcavity_diagnostic(q) == doctest::Approx(-2.0));

  ScalarField kink(g);
  kink.fill([](const Vec2& x) { return std::abs(x.x()); });
  CHECK(semiconcavity_diagnostic(kink) == doctest::Approx(2.0 / g.h1));
}
