#pragma once

// Conditional symplectic decoder: alternating low/up shears
//   low: q <- q + sigma(y),  up: y <- y + beta(t) sigma(q),
//   sigma(v) = K^T (a .* (K v + b)),  beta(t) = t (T - t),
// with K, b generated from theta and a from (theta, t) by small networks.
//
// PhaseOperator is the interface the trainer sees. It evaluates the map and
// its total tangent X' = DPhi * zdot + tau * dPhi/dt in one pass, and
// back-propagates adjoints of both channels into a flat gradient.

#include "pisonet/dense.hpp"

#include <memory>

namespace pisonet {

enum class Architecture { sonet, mlp };

struct DecoderConfig {
  Architecture arch = Architecture::sonet;  // mlp: unstructured baseline, cond_* give its hidden sizes
  int layers = 3;      // low+up pairs
  int cond_width = 8;  // hidden width of the conditioning networks
  int cond_depth = 2;  // hidden layers per conditioning network
  int time_width = 8;  // hidden width of the (theta, t) -> a networks
  int time_depth = 2;
  Activation activation = Activation::tanh;
  bool block_diagonal = true;
};

struct DecoderWeights {
  static constexpr std::uint32_t kVersion = 1;
  DecoderConfig cfg;
  int num_agents = 0;
  int agent_dim = 0;
  int theta_dim = 0;
  double horizon = 1.0;
  Vec params;

  int half_dim() const { return num_agents * agent_dim; }
};

/// Deliberate defects used by the gradient-check mutation test.
enum class GradientFault { none, flip_up_shear_backward };

class PhaseOperator {
 public:
  struct Workspace {
    virtual ~Workspace() = default;
  };

  virtual ~PhaseOperator() = default;
  virtual std::size_t param_count() const = 0;
  virtual int half_dim() const = 0;
  virtual double horizon() const = 0;
  virtual std::unique_ptr<Workspace> make_workspace(int slots) const = 0;

  /// Per-instance setup; resets the workspace's conditioning accumulators.
  virtual void begin(const Vec& params, const Vec& theta, Workspace& ws) const = 0;
  /// Evaluates X = Phi(t, z) and its tangent along (zdot, tau); records slot.
  virtual void eval(const Vec& params, Workspace& ws, int slot, double t, const Vec& z, const Vec& zdot, double tau,
                    Vec& X, Vec& Xdot) const = 0;
  /// Reverse pass for a recorded slot; accumulates into grad.
  virtual void backward(const Vec& params, Workspace& ws, int slot, const Vec& Xbar, const Vec& Xdotbar,
                        Vec& grad) const = 0;
  /// Flushes per-instance conditioning adjoints into grad.
  virtual void end(const Vec& params, Workspace& ws, Vec& grad) const = 0;
};

struct LayerParams {
  Mat K;  // n x n (block-diagonal when configured)
  Vec b;
  Vec a;
};

enum class ShearDir { low, up };

class SymplecticDecoder final : public PhaseOperator {
 public:
  SymplecticDecoder(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim, double horizon);
  explicit SymplecticDecoder(const DecoderWeights& w)
      : SymplecticDecoder(w.cfg, w.num_agents, w.agent_dim, w.theta_dim, w.horizon) {}

  std::size_t param_count() const override { return count_; }
  int half_dim() const override { return n_; }
  double horizon() const override { return T_; }
  std::unique_ptr<Workspace> make_workspace(int slots) const override;
  void begin(const Vec& params, const Vec& theta, Workspace& ws) const override;
  void eval(const Vec& params, Workspace& ws, int slot, double t, const Vec& z, const Vec& zdot, double tau, Vec& X,
            Vec& Xdot) const override;
  void backward(const Vec& params, Workspace& ws, int slot, const Vec& Xbar, const Vec& Xdotbar,
                Vec& grad) const override;
  void end(const Vec& params, Workspace& ws, Vec& grad) const override;

  /// Identity-start initialisation: a-net final layers zero, K heads biased to identity.
  Vec init_params(std::uint64_t seed) const;
  std::vector<LayerParams> condition(const Vec& params, const Vec& theta, double t) const;

  void set_fault(GradientFault f) { fault_ = f; }
  int shear_count() const { return 2 * cfg_.layers; }
  int theta_dim() const { return theta_dim_; }

 private:
  struct Shear {
    DenseNet knet, bnet, anet;
  };
  struct Ws;

  DecoderConfig cfg_;
  int N_, dx_, n_, theta_dim_;
  double T_;
  int blocks_, bs_;  // K = blockdiag of blocks_ matrices of size bs_
  std::vector<Shear> shears_;
  std::size_t count_ = 0;
  GradientFault fault_ = GradientFault::none;
};

/// Builds a decoder description plus initial parameters.
DecoderWeights make_decoder_weights(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim,
                                    double horizon, std::uint64_t seed);

std::size_t count_parameters(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim);

/// Per-shear parameters at (theta, t), ordered low_1, up_1, low_2, ...
std::vector<LayerParams> condition_params(const DecoderWeights& w, const Vec& theta, double t);

Vec shear_forward(const Vec& z, const LayerParams& layer, double t, ShearDir dir, double horizon);

Vec decoder_forward(const DecoderWeights& w, const Vec& theta, double t, const Vec& z);
Vec decoder_jvp(const DecoderWeights& w, const Vec& theta, double t, const Vec& z, const Vec& zdot);
Vec decoder_time_derivative(const DecoderWeights& w, const Vec& theta, double t, const Vec& z);

/// Jacobian of z -> Phi(theta, t, z) for either architecture (2n x 2n).
Mat operator_jacobian(const DecoderWeights& w, const Vec& theta, double t, const Vec& z);

/// |J^T Omega J - Omega|_F and |det J - 1| of the operator Jacobian.
struct SymplecticDefect {
  double form = 0.0;
  double det = 0.0;
};
SymplecticDefect symplectic_defect(const DecoderWeights& w, const Vec& theta, double t, const Vec& z);

struct DecoderSample {
  double t = 0.0;
  Vec z, zdot;         // latent point and latent velocity
  Vec Xbar, Xdot_bar;  // adjoints of the decoded point and decoded velocity
};

/// Exact reverse accumulation over a batch of samples; same layout as w.params.
Vec decoder_param_gradient(const DecoderWeights& w, const Vec& theta, const std::vector<DecoderSample>& batch);

/// Builds the operator matching a weights description (decoder or MLP baseline).
std::unique_ptr<PhaseOperator> make_operator(const DecoderWeights& w);

}  // namespace pisonet
