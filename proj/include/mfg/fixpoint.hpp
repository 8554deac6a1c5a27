#pragma once

#include <utility>
#include <vector>

#include "mfg/hjb.hpp"
#include "mfg/model.hpp"
#include "mfg/transport.hpp"

namespace mfg {

/// One Picard iterate of the MFG coupling map.
struct FixpointState {
  int iterate = 0;
  MeasurePath m_path;
  ValueFunctionPath u;
  double residual = 0;  // sup over probe times of d1(m, T(m))
  double theta = 0.5;
  bool converged = false;
  std::vector<double> residual_history;
};

/// The coupling map T: solve the HJB against m, then push m0 forward along
/// the resulting feedback.
std::pair<ValueFunctionPath, MeasurePath> apply_T(const ProblemSpec& spec,
                                                  const SolverSettings& st,
                                                  const MeasurePath& m_path);

/// sup over the probe times {0, T/4, T/2, 3T/4, T} of d1(a(t), b(t)).
double path_distance(const MeasurePath& a, const MeasurePath& b);

/// Damped Picard iteration m <- (1-theta) m (+) theta T(m), with the mixture
/// realized as a weighted particle union, pruned to keep d1 exactly solvable.
FixpointState solve_mfg(const ProblemSpec& spec, const SolverSettings& st, double theta = 0.5,
                        double tol = 1e-3, int max_iters = 50);

/// sup_t d1 between two converged solutions; near zero when the mollified
/// coupling is monotone.
double monotonicity_uniqueness_probe(const FixpointState& a, const FixpointState& b);

/// Numerical checklist for a candidate solution pair: the value function
/// reproduces its own one-step recursion under the stored feedback, and the
/// measure path satisfies the continuity equation weakly.
struct SolutionPairReport {
  double hjb_consistency = 0;     // max one-step recursion defect at sample nodes
  double transport_residual = 0;  // weak residual against a fixed bump test fn
};

SolutionPairReport check_solution_pair(const ProblemSpec& spec, const SolverSettings& st,
                                       const FixpointState& state);

}  // namespace mfg
