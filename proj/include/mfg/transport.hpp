#pragma once

#include <functional>
#include <vector>

#include "mfg/hjb.hpp"
#include "mfg/model.hpp"
#include "mfg/types.hpp"

namespace mfg {

/// Particle-cloud representation of t -> m(t), one cloud per time node.
struct MeasurePath {
  TimeGrid time_grid;
  std::vector<ParticleCloud> clouds;  // n_steps+1 entries

  const ParticleCloud& at_time_index(int k) const { return clouds[k]; }
  /// Cloud of the time node nearest to t.
  const ParticleCloud& nearest(double t) const;
};

/// A stationary path: the same cloud at every time node. Used for decoupled
/// problems and as the Picard starting point.
MeasurePath constant_path(const TimeGrid& tg, const ParticleCloud& m);

/// Deterministic weighted-grid sample of the initial density: quasi-uniform
/// nodes over supp(m0), weights proportional to the density there. The seed
/// only shuffles particle order.
ParticleCloud sample_m0(const ProblemSpec& spec, int n_particles, int seed);

/// Push m0 forward along the feedback flow of a solved value function,
/// recording the cloud at every time node. Weights never change.
MeasurePath push_forward(const ProblemSpec& spec, const ValueFunctionPath& u,
                         const ParticleCloud& m0_cloud);

/// Smooth compactly supported test function psi(x,t) with its derivatives.
struct TestFn {
  std::function<double(const Vec2&, double)> value;
  std::function<Vec2(const Vec2&, double)> grad;
  std::function<double(const Vec2&, double)> dt;
};

/// Residual of the continuity equation tested against psi along the particle
/// paths: | int_0^T sum_i w_i [dt_psi + Dpsi . b] dt + int psi(.,0) dm0
/// - int psi(.,T) dm(T) |.
double weak_residual(const ProblemSpec& spec, const ValueFunctionPath& u, const MeasurePath& m_path,
                     const TestFn& psi);

/// Exact Kantorovich-Rubinstein distance between two particle measures.
/// Combined support must not exceed `cap` points; aggregate first otherwise.
double d1(const ParticleCloud& a, const ParticleCloud& b, int cap = 4000);

/// Bin particle mass to the nearest grid node. Mass is conserved exactly;
/// each particle moves at most half a cell diagonal.
ParticleCloud aggregate_to_grid(const ParticleCloud& cloud, const Grid& grid);

/// Kernel density estimate of a cloud with the C^2 bump kernel.
ScalarField render_density(const ParticleCloud& cloud, const Grid& grid, double bandwidth);

}  // namespace mfg
