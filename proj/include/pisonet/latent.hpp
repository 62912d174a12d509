#pragma once

// Right-space solver: per-agent linear Hamiltonian systems
//   d/dt (y, q) = H (y, q),  H = [[A, C], [Q, -A^T]],
// solved exactly through matrix exponentials with fixed endpoint states.

#include "pisonet/core.hpp"

#include <optional>

namespace pisonet {

struct DecoderWeights;

enum class LatentVariant { lqr, lqr_rotation, lqr_composed };

LatentVariant parse_latent_variant(const std::string& s);
std::string latent_variant_name(LatentVariant v);

struct LatentConfig {
  LatentVariant variant = LatentVariant::lqr;
  double rotation_rate = 0.0;  // C_B, rad/time; positive is counter-clockwise
  double velocity_cost = 0.0;  // C_Q
  std::string composed_checkpoint;
};

class ConjugatePointError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// 2dx x 2dx per-agent matrix. Drag is ignored (linear prior).
Mat build_latent_matrix(const AgentSpec& agent, const LatentConfig& cfg, double control_weight);

/// exp(t M) by scaling and squaring with a degree-13 Pade approximant.
Mat matrix_exponential(const Mat& M, double t);

/// Solves the rest-to-rest (or general endpoint) latent BVP and samples it on grid.
/// The composed variant is not handled here; see compose_pretrained.
LatentTrajectory solve_latent_bvp(const ProblemInstance& inst, const LatentConfig& cfg, const TimeGrid& grid);

/// H~(y, q) at every sample.
std::vector<double> latent_energy(const LatentTrajectory& traj, const ProblemInstance& inst, const LatentConfig& cfg);

/// Applies a pretrained single-instance decoder pointwise. Velocities become
/// DPhi * zdot + dPhi/dt.
LatentTrajectory compose_pretrained(const LatentTrajectory& latent, const DecoderWeights& pretrained,
                                    const Vec& pretrained_theta);

/// Latent trajectory for any variant; composed requires the pretrained map.
LatentTrajectory solve_latent(const ProblemInstance& inst, const LatentConfig& cfg, const TimeGrid& grid,
                              const DecoderWeights* pretrained = nullptr, const Vec* pretrained_theta = nullptr);

}  // namespace pisonet
