#pragma once

#include <vector>

#include "mfg/model.hpp"
#include "mfg/transport.hpp"
#include "mfg/types.hpp"

namespace mfg {

/// Diagnostics recorded for one sigma level of the vanishing-viscosity sweep.
struct ViscousEstimates {
  double u_inf = 0;             // sup |u^sigma|
  double du_inf = 0;            // sup |Du^sigma| (forward differences)
  double semiconcavity = 0;     // max centered one-sided second difference
  double m_inf = 0;             // sup of the density
  double holder_quotient = 0;   // max d1(m(t1),m(t2)) / sqrt(t2-t1) over probes
  double moment2_max = 0;       // max second moment of m over time
  double mass_error = 0;        // max | integral m - 1 |
  double m_min = 0;             // most negative cell value
};

struct ViscousSolution {
  double sigma = 0;
  std::vector<ScalarField> u_slices;  // n_steps+1, index = time node
  std::vector<ScalarField> m_slices;  // n_steps+1
  ViscousEstimates report;
};

/// Backward IMEX solve of -du/dt - sigma Lap u + 1/2|D_G u|^2 = f with
/// terminal u = g: implicit factorized diffusion, explicit Godunov
/// Hamiltonian (the Hamiltonian splits per axis). Homogeneous Neumann walls.
std::vector<ScalarField> solve_viscous_hjb(const ProblemSpec& spec, const SolverSettings& st,
                                           const MeasurePath& m_path, double sigma);

/// Forward conservative solve of dm/dt - sigma Lap m - div(m w) = 0 with
/// w = (u_{x1}, h^2 u_{x2}): upwind finite-volume drift fluxes (CFL substeps)
/// plus implicit diffusion. No-flux walls; mass and nonnegativity preserved.
std::vector<ScalarField> solve_fokker_planck(const ProblemSpec& spec, const SolverSettings& st,
                                             const std::vector<ScalarField>& u_slices,
                                             double sigma, const ScalarField& m0_field);

/// Initial density sampled on grid nodes and normalized to unit mass.
ScalarField m0_on_grid(const ProblemSpec& spec, const Grid& grid);

/// Particle cloud with one particle per grid node carrying mass
/// value*h1*h2; near-zero cells dropped, support capped by coarsening.
ParticleCloud field_to_cloud(const ScalarField& density, int cap = 1900);

ViscousSolution solve_viscous(const ProblemSpec& spec, const SolverSettings& st,
                              const MeasurePath& m_path, double sigma);

struct SweepRow {
  double sigma = 0;
  ViscousEstimates est;
  double dist_to_prev_sigma = 0;  // ||u^sigma_prev - u^sigma||_inf, 0 for first
};

struct SweepResult {
  std::vector<ViscousSolution> solutions;
  std::vector<SweepRow> table;
};

SweepResult sigma_sweep(const ProblemSpec& spec, const SolverSettings& st,
                        const MeasurePath& m_path, const std::vector<double>& sigmas);

}  // namespace mfg
