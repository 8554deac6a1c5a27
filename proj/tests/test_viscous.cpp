#include <doctest.h>

#include <cmath>

#include "mfg/viscous.hpp"

using namespace mfg;

namespace {

ProblemSpec base_spec() {
  ProblemSpec spec;
  spec.h = DegeneracyProfile::constant(1.0);
  spec.T = 1.0;
  spec.A_max = 2.0;
  spec.m0.radius = 0.5;
  spec.box = Box{-4, 4, -4, 4};
  spec.G.potential.kind = Potential::Kind::Zero;
  spec.F.potential.kind = Potential::Kind::Zero;
  return spec;
}

SolverSettings quick_settings() {
  SolverSettings st;
  st.n1 = st.n2 = 61;
  st.n_steps = 50;
  st.n_particles = 40;
  return st;
}

MeasurePath frozen_path(const ProblemSpec& spec, const SolverSettings& st) {
  return constant_path(st.make_time_grid(spec.T), sample_m0(spec, st.n_particles, st.seed));
}

double second_moment(const ScalarField& m) {
  const Grid& g = m.grid;
  double s = 0;
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) s += m.at(i, j) * g.node(i, j).squaredNorm();
  return s * g.h1 * g.h2;
}

double mass(const ScalarField& m) { return m.values.sum() * m.grid.h1 * m.grid.h2; }

}  // namespace

TEST_CASE("viscous backward solve on data with known solutions") {
  ProblemSpec spec = base_spec();
  SolverSettings st = quick_settings();
  MeasurePath mp = frozen_path(spec, st);

  SUBCASE("zero data stays zero") {
    auto u = solve_viscous_hjb(spec, st, mp, 0.1);
    for (const ScalarField& s : u) CHECK(s.max_abs() == 0.0);
  }
  SUBCASE("constant running cost: u = T - t exactly, any sigma") {
    ProblemSpec one = spec;
    one.F.potential.kind = Potential::Kind::Cosine;
    one.F.potential.freq = 0.0;  // f == 1
    for (double sigma : {0.02, 0.2}) {
      auto u = solve_viscous_hjb(one, st, mp, sigma);
      const TimeGrid tg = st.make_time_grid(one.T);
      for (int k = 0; k <= tg.n_steps; ++k) {
        double expect = one.T - tg.time(k);
        CHECK(std::abs(u[k].values.maxCoeff() - expect) <= 1e-12);
        CHECK(std::abs(u[k].values.minCoeff() - expect) <= 1e-12);
      }
    }
  }
  SUBCASE("sigma -> 0 approaches the linear-quadratic value") {
    ProblemSpec lqr = spec;
    lqr.G.potential.kind = Potential::Kind::HalfSquare;
    double prev = 1e300;
    for (double sigma : {0.2, 0.05}) {
      auto u = solve_viscous_hjb(lqr, st, mp, sigma);
      double worst = 0;
      const Grid g = st.make_grid(lqr.box);
      for (double x1 = -1.0; x1 <= 1.0; x1 += 0.5)
        for (double x2 = -1.0; x2 <= 1.0; x2 += 0.5)
          worst = std::max(worst, std::abs(bilinear(g, u[0].values, {x1, x2}) -
                                           0.5 * (x1 * x1 + x2 * x2) / (1 + lqr.T)));
      CHECK(worst < prev);
      prev = worst;
    }
    CHECK(prev <= 0.15);
  }
}

TEST_CASE("forward density solve") {
  ProblemSpec spec = base_spec();
  SolverSettings st = quick_settings();
  const Grid g = st.make_grid(spec.box);
  ScalarField m0 = m0_on_grid(spec, g);
  REQUIRE(mass(m0) == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("pure diffusion: exact mass, nonnegative, second moment grows 4 sigma t") {
    double sigma = 0.05;
    std::vector<ScalarField> zero_u(st.n_steps + 1, ScalarField(g));
    auto m = solve_fokker_planck(spec, st, zero_u, sigma, m0);
    double mom0 = second_moment(m.front());
    double momT = second_moment(m.back());
    CHECK(std::abs(mass(m.back()) - 1.0) <= 1e-12);
    CHECK(m.back().values.minCoeff() >= -1e-12);
    CHECK(momT - mom0 == doctest::Approx(4 * sigma * spec.T).epsilon(0.05));
  }
  SUBCASE("drift towards the origin concentrates the density") {
    // u = |x|^2/2 gives w = -x: inward drift
    std::vector<ScalarField> u(st.n_steps + 1, ScalarField(g));
    for (ScalarField& s : u) s.fill([](const Vec2& x) { return 0.5 * x.squaredNorm(); });
    auto m = solve_fokker_planck(spec, st, u, 0.01, m0);
    CHECK(second_moment(m.back()) < second_moment(m.front()));
    CHECK(std::abs(mass(m.back()) - 1.0) <= 1e-12);
    CHECK(m.back().values.minCoeff() >= -1e-12);
  }
}

TEST_CASE("grid density to particle cloud") {
  ProblemSpec spec = base_spec();
  Grid g(spec.box, 121, 121);
  ScalarField m0 = m0_on_grid(spec, g);
  ParticleCloud c = field_to_cloud(m0);
  CHECK(c.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.size() <= 1900);
  CHECK((cloud_mean(c) - spec.m0.center).norm() <= 0.05);
}

TEST_CASE("viscosity sweep produces ordered, stable estimates") {
  ProblemSpec spec = base_spec();
  spec.G.potential.kind = Potential::Kind::HalfSquare;
  SolverSettings st = quick_settings();
  MeasurePath mp = frozen_path(spec, st);

  SweepResult sweep = sigma_sweep(spec, st, mp, {0.2, 0.1, 0.05});
  REQUIRE(sweep.table.size() == 3);
  for (const SweepRow& row : sweep.table) {
    CHECK(row.est.mass_error <= 1e-8);
    CHECK(row.est.m_min >= -1e-12);
    CHECK(std::isfinite(row.est.holder_quotient));
    CHECK(row.est.u_inf > 0);
  }
  // successive solutions approach each other as sigma decreases
  CHECK(sweep.table[2].dist_to_prev_sigma <= sweep.table[1].dist_to_prev_sigma);
  // uniform-in-sigma bounds: no blow-up across the sweep
  double u0 = sweep.table[0].est.u_inf;
  for (const SweepRow& row : sweep.table) CHECK(row.est.u_inf <= 1.5 * u0 + 1e-12);

  CHECK_THROWS_AS(sigma_sweep(spec, st, mp, {0.1, 0.2}), std::invalid_argument);
}
