#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mfg/model.hpp"
#include "mfg/transport.hpp"

using namespace mfg;

TEST_CASE("degeneracy profile jets") {
  HJet s = DegeneracyProfile::sine().eval(0.0);
  CHECK(s.h == doctest::Approx(0.0));
  CHECK(s.dh == doctest::Approx(1.0));
  CHECK(s.ddh == doctest::Approx(0.0));

  HJet g0 = DegeneracyProfile::sigmoid().eval(0.0);
  CHECK(g0.h == doctest::Approx(0.0));
  CHECK(g0.dh == doctest::Approx(1.0));
  CHECK(g0.ddh == doctest::Approx(0.0));
  // z/sqrt(1+z^2) at z=1: closed-form derivatives
  HJet g1 = DegeneracyProfile::sigmoid().eval(1.0);
  CHECK(g1.h == doctest::Approx(0.7071067811865475).epsilon(1e-12));
  CHECK(g1.dh == doctest::Approx(0.3535533905932738).epsilon(1e-12));
  CHECK(g1.ddh == doctest::Approx(-0.5303300858899106).epsilon(1e-12));

  HJet c = DegeneracyProfile::constant(1.0).eval(17.0);
  CHECK(c.h == 1.0);
  CHECK(c.dh == 0.0);
  CHECK(c.ddh == 0.0);
}

TEST_CASE("profile jets match difference quotients") {
  for (auto prof : {DegeneracyProfile::sine(), DegeneracyProfile::sigmoid()}) {
    for (double z : {-1.7, -0.3, 0.0, 0.4, 2.2}) {
      const double d = 1e-5;
      HJet j = prof.eval(z);
      double fd1 = (prof(z + d) - prof(z - d)) / (2 * d);
      double fd2 = (prof(z + d) + prof(z - d) - 2 * prof(z)) / (d * d);
      CHECK(j.dh == doctest::Approx(fd1).epsilon(1e-8));
      CHECK(j.ddh == doctest::Approx(fd2).epsilon(1e-4));
    }
  }
}

static ProblemSpec sine_spec() {
  ProblemSpec spec;
  spec.h = DegeneracyProfile::sine();
  spec.box = Box{-8, 8, -8, 8};
  spec.m0.radius = 0.5;
  spec.A_max = 2.0;
  return spec;
}

TEST_CASE("hamiltonian values") {
  ProblemSpec spec = sine_spec();
  CHECK(hamiltonian(spec, {0.3, -2.0}, {0, 0}) == 0.0);
  CHECK(hamiltonian(spec, {M_PI / 2, 0}, {1, 1}) == doctest::Approx(1.0));
  // degenerate direction annihilated: only p1 contributes at x1=0
  CHECK(hamiltonian(spec, {0, 5}, {3, 100}) == doctest::Approx(4.5));
}

TEST_CASE("hamiltonian is the Legendre transform of the control cost") {
  ProblemSpec spec = sine_spec();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U(-1.5, 1.5);
  for (int trial = 0; trial < 20; ++trial) {
    Vec2 x{U(rng), U(rng)}, p{U(rng), U(rng)};
    double H = hamiltonian(spec, x, p);
    double best = -1e300;
    for (int i = -60; i <= 60; ++i)
      for (int j = -60; j <= 60; ++j) {
        Vec2 a{i / 20.0, j / 20.0};
        best = std::max(best, p.dot(spec.dynamics(x, a)) - 0.5 * a.squaredNorm());
      }
    CHECK(H >= best - 1e-12);
    CHECK(H == doctest::Approx(best).epsilon(5e-3));
  }
}

TEST_CASE("grushin gradient on sampled fields") {
  Grid g(Box{-2, 2, -2, 2}, 81, 81);
  ScalarField lin(g);
  lin.fill([](const Vec2& x) { return x.x() + x.y(); });
  Vec2 d = grushin_gradient(lin, {0.3, -0.4}, DegeneracyProfile::constant(1.0));
  CHECK(d.x() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(d.y() == doctest::Approx(1.0).epsilon(1e-9));

  ScalarField x2(g);
  x2.fill([](const Vec2& x) { return x.y(); });
  Vec2 dd = grushin_gradient(x2, {0.0, 0.7}, DegeneracyProfile::sine());
  CHECK(dd.x() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(dd.y() == doctest::Approx(0.0).epsilon(1e-9));

  ScalarField q(g);
  q.fill([](const Vec2& x) { return x.x() * x.x(); });
  Vec2 dq = grushin_gradient(q, {0.3, 0.0}, DegeneracyProfile::sine());
  CHECK(dq.x() == doctest::Approx(0.6).epsilon(1e-6));

  CHECK_THROWS_WITH_AS(grushin_gradient(lin, {1.999, 0}, DegeneracyProfile::sine()),
                       doctest::Contains("stencil"), std::invalid_argument);
}

TEST_CASE("bump kernel: peak, unit mass, derivative consistency") {
  BumpKernel k{0.7};
  CHECK(k.value(Vec2::Zero()) == doctest::Approx(4.0 / (M_PI * 0.49)));
  CHECK(k.value({0.7, 0}) == 0.0);
  double mass = 0;
  const int n = 400;
  const double h = 2 * 0.7 / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mass += k.value({-0.7 + (i + 0.5) * h, -0.7 + (j + 0.5) * h}) * h * h;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));

  const double d = 1e-6;
  for (Vec2 x : {Vec2{0.2, 0.1}, Vec2{-0.3, 0.3}, Vec2{0.5, 0.0}}) {
    Vec2 grad = k.gradient(x);
    CHECK(grad.x() ==
          doctest::Approx((k.value({x.x() + d, x.y()}) - k.value({x.x() - d, x.y()})) / (2 * d))
              .epsilon(1e-5));
    CHECK(grad.y() ==
          doctest::Approx((k.value({x.x(), x.y() + d}) - k.value({x.x(), x.y() - d})) / (2 * d))
              .epsilon(1e-5));
  }
}

TEST_CASE("initial density integrates to one") {
  InitialDensity m0;
  m0.center = {0.3, -0.2};
  m0.radius = 0.8;
  double mass = 0;
  const int n = 500;
  const double h = 2 * m0.radius / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      mass += m0.density({m0.center.x() - m0.radius + (i + 0.5) * h,
                          m0.center.y() - m0.radius + (j + 0.5) * h}) *
              h * h;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("coupling evaluation") {
  Coupling F;
  F.potential.kind = Potential::Kind::HalfSquare;
  ParticleCloud m;
  m.positions = {{0.2, 0.2}};
  m.weights = Eigen::ArrayXd::Ones(1);

  SUBCASE("strength zero ignores the measure") {
    F.strength = 0.0;
    Vec2 x{1.0, -1.0};
    CHECK(F.eval(m, x) == doctest::Approx(0.5 * x.squaredNorm()));
  }
  SUBCASE("single particle at the evaluation point adds the kernel peak") {
    F.strength = 0.3;
    F.mollifier.eps = 0.5;
    Vec2 x = m.positions[0];
    CHECK(F.eval(m, x) ==
          doctest::Approx(0.5 * x.squaredNorm() + 0.3 * F.mollifier.value(Vec2::Zero())));
  }
  SUBCASE("two symmetric particles") {
    F.strength = 1.0;
    F.mollifier.eps = 1.0;
    ParticleCloud m2;
    Vec2 x{0.0, 0.0}, off{0.3, 0.0};
    m2.positions = {x + off, x - off};
    m2.weights = Eigen::ArrayXd::Constant(2, 0.5);
    CHECK(F.eval(m2, x) == doctest::Approx(F.mollifier.value(off)));
  }
}

TEST_CASE("coupling is d1-Lipschitz with the advertised constant") {
  Coupling F;
  F.strength = 0.7;
  F.mollifier.eps = 0.6;
  double L = F.strength * F.mollifier.lipschitz();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  for (int trial = 0; trial < 10; ++trial) {
    ParticleCloud a, b;
    for (int i = 0; i < 4; ++i) {
      a.positions.push_back({U(rng), U(rng)});
      b.positions.push_back({U(rng), U(rng)});
    }
    a.weights = Eigen::ArrayXd::Constant(4, 0.25);
    b.weights = Eigen::ArrayXd::Constant(4, 0.25);
    double dist = d1(a, b);
    for (Vec2 x : {Vec2{0, 0}, Vec2{0.4, -0.2}})
      CHECK(std::abs(F.eval(a, x) - F.eval(b, x)) <= L * dist + 1e-12);
  }
}

TEST_CASE("spec validation enforces the reachability margin") {
  ProblemSpec spec;
  spec.h = DegeneracyProfile::constant(1.0);
  spec.T = 1.0;
  spec.A_max = 4.0;
  spec.m0.radius = 0.5;
  spec.box = Box{-2, 2, -2, 2};  // 0.5 + 4.0 does not fit
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec.box = Box{-5, 5, -5, 5};
  CHECK_NOTHROW(spec.validate());
}
