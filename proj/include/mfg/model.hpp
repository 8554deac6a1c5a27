#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>

#include "mfg/types.hpp"

namespace mfg {

/// Value and first two derivatives of the degeneracy profile h at a point.
struct HJet {
  double h, dh, ddh;
};

/// The profile h(x1) that switches the x2 direction on and off. The built-in
/// kinds all have a totally disconnected zero set.
struct DegeneracyProfile {
  enum class Kind { Sine, Sigmoid, Constant, Custom };
  Kind kind = Kind::Constant;
  double param = 1.0;  // Constant value; unused otherwise
  std::function<HJet(double)> custom;

  static DegeneracyProfile sine() { return {Kind::Sine, 1.0, {}}; }
  static DegeneracyProfile sigmoid() { return {Kind::Sigmoid, 1.0, {}}; }
  static DegeneracyProfile constant(double c) { return {Kind::Constant, c, {}}; }

  HJet eval(double z) const;
  double operator()(double z) const { return eval(z).h; }
  /// sup |h| (sampled bound for Custom; exact for built-ins).
  double sup_abs() const;
  /// ||h||_{C2} diagnostic by sampling.
  double c2_bound(double z_lo, double z_hi) const;
};

/// Smooth potential part phi0 of a coupling, with analytic derivatives.
struct Potential {
  enum class Kind { Zero, HalfSquare, Cosine, Bump };
  Kind kind = Kind::Zero;
  // Cosine: amp*cos(freq*x1)*cos(freq*x2); Bump: amp * bump((x-center)/radius)
  double amp = 1.0, freq = 1.0, radius = 1.0;
  Vec2 center = Vec2::Zero();

  double value(const Vec2& x) const;
  Vec2 gradient(const Vec2& x) const;
  Eigen::Matrix2d hessian(const Vec2& x) const;
  double c2_bound(const Box& box) const;
};

/// Normalized C^2 bump kernel rho_eps(x) = 4/(pi eps^2) (1-|x|^2/eps^2)^3_+.
struct BumpKernel {
  double eps = 1.0;
  double value(const Vec2& x) const;
  Vec2 gradient(const Vec2& x) const;
  Eigen::Matrix2d hessian(const Vec2& x) const;
  double peak() const { return 4.0 / (M_PI * eps * eps); }
  /// Lipschitz constant of rho_eps (max |grad|).
  double lipschitz() const;
};

/// F(x,m) = phi0(x) + c (rho_eps * m)(x). Regularizing in m by construction.
struct Coupling {
  Potential potential;
  double strength = 0.0;
  BumpKernel mollifier{1.0};

  double eval(const ParticleCloud& m, const Vec2& x) const;
  Vec2 gradient(const ParticleCloud& m, const Vec2& x) const;
  Eigen::Matrix2d hessian(const ParticleCloud& m, const Vec2& x) const;
  ScalarField eval_on_grid(const Grid& g, const ParticleCloud& m) const;
};

/// Compactly supported C^2 initial density: bump of given center and radius.
struct InitialDensity {
  Vec2 center = Vec2::Zero();
  double radius = 1.0;

  double density(const Vec2& x) const {
    double q = (x - center).squaredNorm() / (radius * radius);
    if (q >= 1.0) return 0.0;
    double u = 1.0 - q;
    return 4.0 / (M_PI * radius * radius) * u * u * u;
  }
};

/// The full data of one MFG instance.
struct ProblemSpec {
  DegeneracyProfile h;
  Coupling F, G;
  InitialDensity m0;
  double T = 1.0;
  Box box{-1, 1, -1, 1};
  double A_max = 1.0;

  /// Dynamics b(x, alpha) = (alpha1, h(x1) alpha2).
  Vec2 dynamics(const Vec2& x, const Vec2& alpha) const {
    return {alpha.x(), h(x.x()) * alpha.y()};
  }
  void validate() const;
};

/// Numerical resolution parameters, separate from the problem data.
struct SolverSettings {
  int n1 = 51, n2 = 51;
  int n_steps = 50;
  int n_radial = 4, n_angular = 16;
  int n_particles = 200;
  int seed = 0;
  bool polish_feedback = true;  // continuous refinement of the argmin control
  double shooting_tol = 1e-8;
  int shooting_max_iters = 50;

  Grid make_grid(const Box& box) const { return Grid(box, n1, n2); }
  TimeGrid make_time_grid(double T) const { return TimeGrid(0.0, T, n_steps); }
};

double hamiltonian(const ProblemSpec& spec, const Vec2& x, const Vec2& p);

/// Degenerate gradient D_G u = (d_{x1}u, h(x1) d_{x2}u) by central differences
/// of the interpolated field, step one grid cell.
Vec2 grushin_gradient(const ScalarField& u, const Vec2& x, const DegeneracyProfile& h);

/// Plain gradient (d_{x1}u, d_{x2}u), same stencil.
Vec2 field_gradient(const ScalarField& u, const Vec2& x);

}  // namespace mfg
