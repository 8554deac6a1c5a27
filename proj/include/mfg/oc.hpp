#pragma once

#include <vector>

#include "mfg/hjb.hpp"
#include "mfg/model.hpp"
#include "mfg/transport.hpp"
#include "mfg/types.hpp"

namespace mfg {

/// Result of a Newton shooting solve of the two-point boundary value problem.
struct ShootingResult {
  Trajectory trajectory;
  double residual = 0;  // |p(T) + Dg(x(T))|
  int newton_iters = 0;
  bool converged = false;
};

struct NecessaryConditionsReport {
  double ode_residual = 0;       // state/costate equations, finite differences
  double feedback_residual = 0;  // |alpha1 - p1|, |alpha2 - p2 h(x1)|
  double maximality_gap = 0;     // worst Hamiltonian-maximality violation
  double transversality = 0;     // |p(T) + Dg(x(T))|
};

struct RestTimeReport {
  double t_rest = 0;        // sup{ r : x == x(t) on [t,r] } within tol
  double t_stationary = 0;  // sup{ r : h(x1) == 0 on [t,r] } within tol
  bool agree = false;       // the two detectors match within one time step
};

struct BifurcationReport {
  double max_distance = 0;  // max pairwise sup-distance among optimal restarts
  int n_converged = 0;
  bool conclusive = false;  // at least two converged near-optimal restarts
};

/// Integrate x1' = alpha1, x2' = h(x1) alpha2 from x0 at time t to T, with the
/// control linearly interpolated between its samples (one per time node).
Trajectory simulate_dynamics(const ProblemSpec& spec, const Vec2& x0, double t,
                             const std::vector<Vec2>& alpha_samples);

/// J_t(x, alpha): trapezoidal running cost 1/2|alpha|^2 + F(x, m(s)) plus
/// terminal G(x(T), m(T)).
double cost(const ProblemSpec& spec, const MeasurePath& m_path, const Trajectory& traj);

/// Right-hand side of the state/costate system at (y, s),
/// y = (x1, x2, p1, p2).
Eigen::Vector4d pontryagin_rhs(const ProblemSpec& spec, const MeasurePath& m_path,
                               const Eigen::Vector4d& y, double s);

/// Initial costate guess -Du(x,t) read off a solved value function. At
/// degenerate points the p2 component is reconstructed from the costate
/// integral along the rest trajectory instead.
Vec2 seed_costate(const ProblemSpec& spec, const MeasurePath& m_path, const ValueFunctionPath& u,
                  const Vec2& x, double t);

/// Newton shooting on S(p0) = p(T) + Dg(x(T)) with finite-difference
/// Jacobian. The returned trajectory carries state, control and costate.
ShootingResult shoot(const ProblemSpec& spec, const SolverSettings& st, const MeasurePath& m_path,
                     const Vec2& x0, double t, const Vec2& p0_guess);

/// Residuals of the Pontryagin necessary conditions along a trajectory with
/// costate.
NecessaryConditionsReport necessary_conditions_residual(const ProblemSpec& spec,
                                                        const MeasurePath& m_path,
                                                        const Trajectory& traj);

/// |u(x,t) - u(x(r),r) - int_t^r (1/2|alpha|^2 + f) ds| along the trajectory.
double dpp_check(const ProblemSpec& spec, const MeasurePath& m_path, const ValueFunctionPath& u,
                 const Trajectory& traj, double r);

/// Glue a trajectory on [t,r] with one on [r,T]; endpoints must match.
Trajectory concatenate(const Trajectory& traj1, const Trajectory& traj2, double tol = 1e-8);

/// Restrict a trajectory to [r, t_end].
Trajectory restrict_from(const Trajectory& traj, double r);

RestTimeReport rest_time(const DegeneracyProfile& h, const Trajectory& traj, double tol);

/// Restart the OC problem at (x(r), r) from several Newton initializations
/// and measure how far the converged near-optimal trajectories spread.
BifurcationReport bifurcation_probe(const ProblemSpec& spec, const SolverSettings& st,
                                    const MeasurePath& m_path, const ValueFunctionPath& u,
                                    const Vec2& x0, double t, double r, int n_restarts);

/// Roll a state trajectory forward along the interpolated HJB feedback;
/// independent of shooting, used for cross-checks.
Trajectory rollout_feedback(const ProblemSpec& spec, const ValueFunctionPath& u, const Vec2& x0,
                            double t);

}  // namespace mfg
