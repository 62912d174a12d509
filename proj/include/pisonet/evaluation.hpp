#pragma once

// Reported metrics: physical running cost, continuous-time safety violation,
// pass rates and residual summaries.

#include "pisonet/decoder.hpp"
#include "pisonet/hamiltonian.hpp"
#include "pisonet/latent.hpp"
#include "pisonet/scenario.hpp"

#include <json.hpp>

namespace pisonet {

/// Trapezoidal integral of sum_i c_v |v_i|^2 + c_u |u_i|^2, u from the costate.
double running_cost(const PhaseTrajectory& traj, const ProblemInstance& inst);

struct SafetyResult {
  double max_violation = 0.0;
  bool pass = true;
};

/// max_t max(0, -min_k h_k) over a grid m times denser than traj's, with
/// positions linearly interpolated between samples.
SafetyResult safety_violation(const PhaseTrajectory& traj, const ProblemInstance& inst, int m = 10);

struct EvalOptions {
  int refinement = 10;        // m
  int time_samples = 64;      // coarse grid; decoded on (Nt-1)m+1 points
  BarrierParams bp;           // for the residual column
  int refine_steps = 0;       // L-BFGS steps on failing instances, on the dense grid
};

struct InstanceMetrics {
  double cost = 0.0;
  double max_violation = 0.0;
  bool pass = true;
  double mean_residual = 0.0;  // mean over the coarse grid of |r_x|^2 + |r_p|^2
  bool refined = false;
};

struct EvalReport {
  std::vector<InstanceMetrics> rows;
  int pass_count = 0;
  int total = 0;
  double avg_cost = 0.0;
  double avg_max_violation = 0.0;
  double avg_residual = 0.0;
  double batched_seconds = 0.0;
};

/// Latent solve plus decoder forward for every instance on the given grid.
std::vector<PhaseTrajectory> decode_batch(const std::vector<ProblemInstance>& insts, const std::vector<Vec>& thetas,
                                          const DecoderWeights& w, const LatentConfig& lcfg, const TimeGrid& grid,
                                          const DecoderWeights* pretrained = nullptr,
                                          const Vec* pretrained_theta = nullptr);

EvalReport evaluate_batch(const std::vector<ProblemInstance>& insts, const std::vector<Vec>& thetas,
                          const DecoderWeights& w, const LatentConfig& lcfg, const EvalOptions& opt = {},
                          const DecoderWeights* pretrained = nullptr, const Vec* pretrained_theta = nullptr);

/// Aggregates recomputed from rows.
void summarize(EvalReport& r);

void to_json(nlohmann::json& j, const InstanceMetrics& m);
void from_json(const nlohmann::json& j, InstanceMetrics& m);
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

/// Aligned text table: one line per instance, then the aggregate line.
std::string report_table(const EvalReport& r);

}  // namespace pisonet
