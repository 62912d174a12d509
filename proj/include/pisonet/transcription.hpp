#pragma once

// Direct-transcription reference solver: positions on a uniform grid,
// velocities and accelerations by central differences (ghost nodes carry the
// endpoint velocities), controls recovered from the drag dynamics, barrier
// continuation and L-BFGS.

#include "pisonet/hamiltonian.hpp"

namespace pisonet {

struct TranscriptionOptions {
  int intervals = 200;
  double eps_start = 1e-2;
  double ell_start = 1e-2;
  double eps_final = 1e-4;
  double ell_final = 1e-4;
  double decay = 0.1;
  int iters_per_stage = 400;
  double grad_tol = 1e-9;
};

struct TranscriptionResult {
  TimeGrid grid;
  RowMat positions;  // (intervals+1) x N*d
  RowMat velocities;
  RowMat controls;
  double cost = 0.0;            // physical cost, barrier excluded
  double barrier_cost = 0.0;    // integral of U at the final (eps, ell)
  double min_clearance = 0.0;   // min constraint value over the grid
  int iterations = 0;
};

/// Discrete objective (cost + barrier) and its gradient over the interior
/// positions; exposed for testing.
double transcription_objective(const ProblemInstance& inst, const RowMat& interior, double horizon, const BarrierParams& bp,
                               RowMat* grad, double* physical_cost = nullptr);

/// Solves from an initial guess of all grid positions (intervals+1 rows,
/// endpoints overwritten); a straight line is used when guess is empty.
TranscriptionResult solve_transcription(const ProblemInstance& inst, const TranscriptionOptions& opt = {},
                                        const RowMat& guess = RowMat());

/// Positions of a phase trajectory resampled on a uniform grid by linear interpolation.
RowMat resample_positions(const PhaseTrajectory& traj, int num_agents, int spatial_dim, int intervals);

}  // namespace pisonet
