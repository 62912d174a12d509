#pragma once

// Physics-informed training of the decoder on Pontryagin residuals.

#include "pisonet/decoder.hpp"
#include "pisonet/hamiltonian.hpp"
#include "pisonet/latent.hpp"
#include "pisonet/optim.hpp"

#include <optional>

namespace pisonet {

struct AnnealConfig {
  bool enabled = false;
  double eps0 = 0.1;
  double ell0 = 0.1;
  double rho_eps = 0.6;
  double rho_ell = 0.6;
  int period_steps = 20;
  // used when annealing is off
  double eps = 1e-4;
  double ell = 1e-4;
};

struct TrainConfig {
  int adam_steps = 150;
  int lbfgs_steps = 100;
  double adam_lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int lbfgs_memory = 10;
  double weight_decay = 0.0;
  double ic_weight = 0.0;
  double tc_weight = 0.0;
  AnnealConfig anneal;
  int batch_size = 0;  // 0 = full training set
  int collocation_count = 64;
  std::uint64_t rng_seed = 0;
  int pretrain_steps = 0;
  double pretrain_lr = 1e-3;
  bool verbose = false;
};

struct AnnealState {
  int stage = 0;
  double eps = 1e-4;
  double ell = 1e-4;
  bool carry_optimizer_state = true;
};

/// (eps_m, ell_m) after `step` Adam steps.
AnnealState anneal_state(const AnnealConfig& cfg, int step);

struct TrainReport {
  std::vector<double> loss;
  std::vector<double> residual;  // mean squared PMP residual per step
  std::vector<double> eps, ell;
  std::vector<double> elapsed;   // seconds since start
  std::vector<double> pretrain_loss;
  AnnealState final_anneal;
  int lbfgs_line_search_failures = 0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One training sample: an instance, its encoding and its latent trajectory
/// on the collocation grid.
struct TrainSample {
  ProblemInstance inst;
  Vec theta;
  LatentTrajectory latent;
};

struct PmpResiduals {
  RowMat rx, rp;  // Nt x n
};

PmpResiduals pmp_residuals(const ProblemInstance& inst, const DecoderWeights& w, const Vec& theta,
                           const LatentTrajectory& latent, const BarrierParams& bp);

struct LossOptions {
  BarrierParams bp;
  double weight_decay = 0.0;
  double ic_weight = 0.0;
  double tc_weight = 0.0;
};

struct LossValue {
  double total = 0.0;
  double residual = 0.0;  // mean squared residual
  double ic = 0.0;        // mean squared initial-state mismatch
  double tc = 0.0;        // mean squared terminal-state mismatch
  Vec grad;               // d(total)/d(params)
  int worst_instance = -1;
};

/// Mean over batch and collocation points of |r_x|^2 + |r_p|^2 plus
/// penalties. When want_grad is false, grad is left empty.
LossValue total_loss(const std::vector<TrainSample>& batch, const PhaseOperator& op, const Vec& params,
                     const LossOptions& opt, bool want_grad = true);

/// Samples with latent trajectories on the uniform collocation grid.
std::vector<TrainSample> make_samples(const std::vector<ProblemInstance>& insts, const std::vector<Vec>& thetas,
                                      const LatentConfig& lcfg, int collocation_count,
                                      const DecoderWeights* pretrained = nullptr, const Vec* pretrained_theta = nullptr);

/// Reference positions (Nt x N*d) per sample for regression pretraining.
using ReferenceSet = std::vector<RowMat>;

/// Adam on the mean squared position mismatch. Returns per-step losses.
std::vector<double> pretrain_regression(DecoderWeights& w, const std::vector<TrainSample>& samples,
                                        const ReferenceSet& refs, int steps, double lr);

/// Full schedule: optional pretraining, Adam with annealing, then L-BFGS.
TrainReport train(DecoderWeights& w, const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                  const ReferenceSet* refs = nullptr);

struct RefineResult {
  Vec delta;  // refined params minus shared params
  PhaseTrajectory traj;
  int steps = 0;
  bool line_search_failed = false;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Per-instance L-BFGS on the PMP loss starting from the shared weights.
RefineResult refine_instance(const TrainSample& sample, const DecoderWeights& w, int max_steps,
                             const BarrierParams& bp, int refine_grid = 0);

/// Max relative error of the analytic loss gradient against central
/// differences (step 1e-5) over every weight; denominator max(|g|, 1e-8).
double gradient_check(const DecoderWeights& w, const TrainSample& sample, const BarrierParams& bp,
                      GradientFault fault = GradientFault::none);

/// Decoded trajectory on the sample's latent grid.
PhaseTrajectory decode_trajectory(const DecoderWeights& w, const Vec& theta, const LatentTrajectory& latent);

}  // namespace pisonet
