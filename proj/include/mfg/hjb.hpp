#pragma once

#include <vector>

#include "mfg/model.hpp"
#include "mfg/types.hpp"

namespace mfg {

struct MeasurePath;  // transport.hpp

/// Feedback control field on one time slice: argmin controls per node.
struct FeedbackSlice {
  Eigen::ArrayXd a1, a2;
};

/// Backward-solved value function u(., t_k) with its feedback field.
struct ValueFunctionPath {
  TimeGrid time_grid;
  std::vector<ScalarField> slices;     // n_steps+1 entries
  std::vector<FeedbackSlice> feedback; // n_steps entries, control on [t_k, t_{k+1})

  const ScalarField& slice(int k) const { return slices[k]; }

  /// Value interpolated in space, constant in time within a step.
  double value(const Vec2& x, double t) const;

  /// Feedback control interpolated in space at time t (slice of the step
  /// containing t).
  Vec2 feedback_at(const Vec2& x, double t) const;
};

std::vector<Vec2> control_set(double A_max, int n_radial, int n_angular);

/// Per-slice scalar diagnostics written to diagnostics.csv.
struct HjbDiagnostics {
  std::vector<double> t, linf, semiconcavity;
  double L_space = 0, L_time = 0;
};

/// One backward DPP step: from u(., t_{k+1}) and the running cost slice f_k
/// to u(., t_k) plus its argmin feedback.
void hjb_backward_step(const ProblemSpec& spec, const SolverSettings& st,
                       const std::vector<Vec2>& controls, const ScalarField& f_k,
                       const ScalarField& u_next, double dt, ScalarField& u_k,
                       FeedbackSlice& fb);

/// Solve the backward HJB for fixed m-path by the semi-Lagrangian scheme.
ValueFunctionPath solve_hjb(const ProblemSpec& spec, const SolverSettings& st,
                            const MeasurePath& m_path);

/// Variant taking precomputed running-cost slices f_k (k = 0..n_steps) and the
/// terminal condition g.
ValueFunctionPath solve_hjb_with_costs(const ProblemSpec& spec, const SolverSettings& st,
                                       const std::vector<ScalarField>& f_slices,
                                       const ScalarField& g);

/// (L_space, L_time): max Euclidean norm of forward-difference spatial
/// gradients over all slices, and max time difference quotient per node.
std::pair<double, double> lipschitz_diagnostic(const ValueFunctionPath& u);

/// Max centered second difference over interior nodes and axis directions.
double semiconcavity_diagnostic(const ScalarField& u_slice);

HjbDiagnostics hjb_diagnostics(const ValueFunctionPath& u);

}  // namespace mfg
