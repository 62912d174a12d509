#pragma once

// The physical problem family: drag dynamics, separation / obstacle
// constraints, the smooth barrier, the Pontryagin Hamiltonian and its exact
// derivatives, and control recovery from the costate.

#include "pisonet/core.hpp"

namespace pisonet {

/// Barrier U_{eps,ell}(h) = (1/eps) * sum_k ell * log(1 + exp(-h_k / ell)).
struct BarrierParams {
  double eps = 1e-4;
  double ell = 1e-4;
};

/// Regularisation of |v| in the drag term: |v|_delta = sqrt(|v|^2 + delta^2).
inline constexpr double kDragDelta = 1e-8;

/// f_i(x_i) = (v_i, -k_i v_i |v_i|_delta); the control enters the velocity rows.
Vec dynamics_drift(const ProblemInstance& inst, int agent, const Vec& xi);

/// Constraint vector: pairwise entries (i<j, lexicographic) followed by
/// per-agent obstacle entries (agent-major). Positive means feasible.
Vec constraint_values(const ProblemInstance& inst, const RowMat& positions);

/// Number of entries constraint_values returns.
int constraint_count(const ProblemInstance& inst);

double barrier(const Vec& h, const BarrierParams& bp);

/// Unique maximiser of <p, B u> - c_u |u|^2, i.e. p_v / (2 c_u).
Vec conjugate_control(const ProblemInstance& inst, int agent, const Vec& pi);

double hamiltonian_value(const ProblemInstance& inst, const Vec& x, const Vec& p, const BarrierParams& bp);

struct PhaseGradient {
  Vec dx;  // d/dx
  Vec dp;  // d/dp
};

PhaseGradient hamiltonian_grads(const ProblemInstance& inst, const Vec& x, const Vec& p, const BarrierParams& bp);

/// Hessian of H applied to the direction (dir_x, dir_p).
PhaseGradient hamiltonian_hvp(const ProblemInstance& inst, const Vec& x, const Vec& p, const BarrierParams& bp,
                              const Vec& dir_x, const Vec& dir_p);

/// Minimum constraint value over all entries (+inf when there are none).
double min_constraint(const ProblemInstance& inst, const Vec& x);

/// Distance from w to the obstacle surface (negative inside boxes) and the
/// outward unit normal at the nearest surface point.
double surface_distance(const Obstacle& ob, const Vec& w, Vec* normal = nullptr);

// Scalar building blocks shared with the transcription oracle.
double softplus(double x);
double logistic(double x);

/// Gradient of U(h(w)) w.r.t. the flattened N x d positions.
Vec barrier_position_gradient(const ProblemInstance& inst, const RowMat& positions, const BarrierParams& bp);

}  // namespace pisonet
