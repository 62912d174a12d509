#include "pisonet/mlp_baseline.hpp"

#include <cstdlib>

namespace pisonet {

namespace {

std::vector<int> mlp_sizes(const DecoderConfig& cfg, int n, int theta_dim) {
  std::vector<int> sizes{2 * n + theta_dim + 1};
  for (int l = 0; l < cfg.cond_depth; ++l) sizes.push_back(cfg.cond_width);
  sizes.push_back(2 * n);
  return sizes;
}

}  // namespace

struct MlpBaseline::Ws : PhaseOperator::Workspace {
  Vec theta;
  std::vector<DenseNet::Tape> tapes;
  std::vector<double> t, tau;
  Vec in, in_dot, ob, odb;
};

MlpBaseline::MlpBaseline(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim, double horizon)
    : n_(num_agents * agent_dim),
      theta_dim_(theta_dim),
      T_(horizon),
      net_(mlp_sizes(cfg, num_agents * agent_dim, theta_dim), cfg.activation, 0) {
  if (!(horizon > 0.0)) throw DomainError("MlpBaseline: horizon must be positive");
}

std::unique_ptr<PhaseOperator::Workspace> MlpBaseline::make_workspace(int slots) const {
  auto ws = std::make_unique<Ws>();
  ws->tapes.resize(slots);
  ws->t.assign(slots, 0.0);
  ws->tau.assign(slots, 0.0);
  return ws;
}

void MlpBaseline::begin(const Vec&, const Vec& theta, Workspace& base) const {
  auto& ws = static_cast<Ws&>(base);
  if (theta.size() != theta_dim_) throw DomainError("MlpBaseline: theta length mismatch");
  ws.theta = theta;
}

void MlpBaseline::eval(const Vec& params, Workspace& base, int slot, double t, const Vec& z, const Vec& zdot,
                       double tau, Vec& X, Vec& Xdot) const {
  auto& ws = static_cast<Ws&>(base);
  const int m = 2 * n_;
  ws.in.resize(m + theta_dim_ + 1);
  ws.in << z, ws.theta, t / T_;
  ws.in_dot.setZero(m + theta_dim_ + 1);
  ws.in_dot.head(m) = zdot;
  ws.in_dot[m + theta_dim_] = tau / T_;
  auto& tape = ws.tapes[slot];
  net_.forward(params.data(), ws.in, ws.in_dot, tape);
  ws.t[slot] = t;
  ws.tau[slot] = tau;
  const Vec& o = net_.output(tape);
  const Vec& od = net_.output_dot(tape);
  const double bt = t * (T_ - t) / (T_ * T_);
  const double btd = (T_ - 2.0 * t) / (T_ * T_);
  X.resize(m);
  Xdot.resize(m);
  X.head(n_) = z.head(n_) + bt * o.head(n_);
  X.tail(n_) = o.tail(n_);
  Xdot.head(n_) = zdot.head(n_) + bt * od.head(n_) + tau * btd * o.head(n_);
  Xdot.tail(n_) = od.tail(n_);
}

void MlpBaseline::backward(const Vec& params, Workspace& base, int slot, const Vec& Xbar, const Vec& Xdotbar,
                           Vec& grad) const {
  auto& ws = static_cast<Ws&>(base);
  const double t = ws.t[slot], tau = ws.tau[slot];
  const double bt = t * (T_ - t) / (T_ * T_);
  const double btd = (T_ - 2.0 * t) / (T_ * T_);
  ws.ob.resize(2 * n_);
  ws.odb.resize(2 * n_);
  ws.ob.head(n_) = bt * Xbar.head(n_) + tau * btd * Xdotbar.head(n_);
  ws.ob.tail(n_) = Xbar.tail(n_);
  ws.odb.head(n_) = bt * Xdotbar.head(n_);
  ws.odb.tail(n_) = Xdotbar.tail(n_);
  net_.backward(params.data(), ws.tapes[slot], ws.ob, ws.odb, grad.data());
}

Vec MlpBaseline::init_params(std::uint64_t seed) const {
  Vec p = Vec::Zero(static_cast<Eigen::Index>(param_count()));
  std::mt19937_64 rng(seed);
  net_.init(p.data(), rng);
  return p;
}

std::size_t mlp_parameter_count(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim) {
  return DenseNet(mlp_sizes(cfg, num_agents * agent_dim, theta_dim), cfg.activation, 0).param_count();
}

DecoderConfig matched_mlp_config(const DecoderConfig& sonet, int num_agents, int agent_dim, int theta_dim) {
  const auto target = static_cast<long long>(count_parameters(sonet, num_agents, agent_dim, theta_dim));
  DecoderConfig c = sonet;
  c.arch = Architecture::mlp;
  c.cond_depth = 2;
  long long best = -1;
  int best_w = 1;
  for (int wdt = 1; wdt <= 4096; ++wdt) {
    c.cond_width = wdt;
    const long long diff = std::llabs(static_cast<long long>(mlp_parameter_count(c, num_agents, agent_dim, theta_dim)) - target);
    if (best < 0 || diff < best) {
      best = diff;
      best_w = wdt;
    }
  }
  c.cond_width = best_w;
  return c;
}

Vec mlp_baseline_forward(const DecoderWeights& w, const Vec& theta, double t, const Vec& z) {
  MlpBaseline op(w.cfg, w.num_agents, w.agent_dim, w.theta_dim, w.horizon);
  auto ws = op.make_workspace(1);
  op.begin(w.params, theta, *ws);
  Vec X, Xd;
  op.eval(w.params, *ws, 0, t, z, Vec::Zero(z.size()), 0.0, X, Xd);
  return X;
}

}  // namespace pisonet
