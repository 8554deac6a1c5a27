#pragma once

#include <vector>

#include "mfg/hjb.hpp"
#include "mfg/model.hpp"
#include "mfg/types.hpp"

namespace mfg {

/// A probe of the degenerate differentials of a field u at one point: the
/// directional derivative along the anisotropic dilation (l th1, h(x1) l th2),
/// the reachable G-gradients, and the superdifferential inequality.
struct GDiffProbe {
  Vec2 x;
  const ScalarField* u = nullptr;
  DegeneracyProfile h;
  double ell = 0.1;     // largest probe radius
  int n_angular = 32;   // ring resolution for gradient sampling

  void validate() const;
};

/// One-sided derivative lim_{l->0+} [u(x1+l th1, x2+h(x1) l th2) - u(x)]/l,
/// Richardson-extrapolated over l, l/2, l/4.
double g_directional_derivative(const GDiffProbe& probe, const Vec2& theta);

struct ReachableGradients {
  std::vector<Vec2> clusters;  // representatives of the limit gradients
  bool conclusive = false;     // false when every sample sat on a kink
};

/// Sample D_G u on shrinking rings around x, drop kink cells (second
/// difference spikes), and cluster the remaining gradients.
ReachableGradients reachable_g_gradients(const GDiffProbe& probe, int n_samples);

struct SuperdifferentialCheck {
  bool ok = false;
  double violation = 0;  // worst excess over the semiconcavity bound
};

/// Test u(x1+v1, x2+h(x1)v2) - u(x) - p.v <= C |(v1, h v2)|^2 over a fan of
/// directions and three radii.
SuperdifferentialCheck superdifferential_check(const GDiffProbe& probe, const Vec2& p, int n_dirs,
                                               double C, double tol = 1e-6);

struct MinFormulaReport {
  double max_gap = 0;  // worst |directional derivative - min_p (p, theta)|
  bool conclusive = false;
};

/// Check that the directional derivative equals the minimum of (p, theta)
/// over the reachable gradients, over n_dirs directions.
MinFormulaReport min_formula_check(const GDiffProbe& probe, int n_dirs);

/// Max over the trajectory samples of |D_G u(x(s), s) + alpha(s)|, central
/// differences; points within a cell of the wall are skipped.
double feedback_gradient_consistency(const ProblemSpec& spec, const ValueFunctionPath& u,
                                     const Trajectory& traj);

}  // namespace mfg
