#pragma once

// Unstructured ablation baseline: a plain network on (z, theta, t/T) whose
// state output is y + t(T-t)/T^2 * x' and whose costate output is raw.

#include "pisonet/decoder.hpp"

namespace pisonet {

class MlpBaseline final : public PhaseOperator {
 public:
  MlpBaseline(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim, double horizon);

  std::size_t param_count() const override { return net_.param_count(); }
  int half_dim() const override { return n_; }
  double horizon() const override { return T_; }
  std::unique_ptr<Workspace> make_workspace(int slots) const override;
  void begin(const Vec& params, const Vec& theta, Workspace& ws) const override;
  void eval(const Vec& params, Workspace& ws, int slot, double t, const Vec& z, const Vec& zdot, double tau, Vec& X,
            Vec& Xdot) const override;
  void backward(const Vec& params, Workspace& ws, int slot, const Vec& Xbar, const Vec& Xdotbar,
                Vec& grad) const override;
  void end(const Vec&, Workspace&, Vec&) const override {}

  Vec init_params(std::uint64_t seed) const;

 private:
  struct Ws;
  int n_, theta_dim_;
  double T_;
  DenseNet net_;
};

std::size_t mlp_parameter_count(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim);

/// MLP config (two hidden layers) whose parameter count is closest to that
/// of the given decoder config.
DecoderConfig matched_mlp_config(const DecoderConfig& sonet, int num_agents, int agent_dim, int theta_dim);

/// Decoded point (x, p) of the baseline.
Vec mlp_baseline_forward(const DecoderWeights& w, const Vec& theta, double t, const Vec& z);

}  // namespace pisonet
