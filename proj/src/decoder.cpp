#include "pisonet/decoder.hpp"

#include "pisonet/mlp_baseline.hpp"

namespace pisonet {

namespace {

std::vector<int> net_sizes(int in, int width, int depth, int out) {
  std::vector<int> s{in};
  for (int l = 0; l < depth; ++l) s.push_back(width);
  s.push_back(out);
  return s;
}

// out = K v for K stored as `blocks` row-major bs x bs matrices.
void block_mul(const double* K, int blocks, int bs, const Vec& v, Vec& out) {
  out.resize(blocks * bs);
  for (int b = 0; b < blocks; ++b) {
    Eigen::Map<const RowMat> Kb(K + b * bs * bs, bs, bs);
    out.segment(b * bs, bs).noalias() = Kb * v.segment(b * bs, bs);
  }
}

void block_mul_t(const double* K, int blocks, int bs, const Vec& v, Vec& out) {
  out.resize(blocks * bs);
  for (int b = 0; b < blocks; ++b) {
    Eigen::Map<const RowMat> Kb(K + b * bs * bs, bs, bs);
    out.segment(b * bs, bs).noalias() = Kb.transpose() * v.segment(b * bs, bs);
  }
}

// Kbar += u w^T restricted to the block pattern.
void block_outer_add(double* Kbar, int blocks, int bs, const Vec& u, const Vec& w) {
  for (int b = 0; b < blocks; ++b) {
    Eigen::Map<RowMat> Kb(Kbar + b * bs * bs, bs, bs);
    Kb.noalias() += u.segment(b * bs, bs) * w.segment(b * bs, bs).transpose();
  }
}

}  // namespace

struct SymplecticDecoder::Ws : PhaseOperator::Workspace {
  struct ShearCond {
    DenseNet::Tape ktape, btape;
    Vec Kbar, bbar;
  };
  struct ShearRec {
    DenseNet::Tape atape;
    Vec v, vd, s, sd;
  };
  struct Slot {
    double t = 0.0, tau = 0.0;
    std::vector<ShearRec> rec;
  };

  Vec theta, a_in, a_in_dot, zero_theta;
  std::vector<ShearCond> cond;
  std::vector<Slot> slots;
  // scratch
  Vec y, q, yd, qd, g, gd, sig, sigd;
  Vec yb, qb, ydb, qdb, sigb, sigdb, gb, gdb, sb, sdb, ab, adb, vb, vdb;
};

SymplecticDecoder::SymplecticDecoder(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim,
                                     double horizon)
    : cfg_(cfg), N_(num_agents), dx_(agent_dim), n_(num_agents * agent_dim), theta_dim_(theta_dim), T_(horizon) {
  if (cfg.layers < 0 || cfg.cond_width < 1 || cfg.cond_depth < 0 || cfg.time_width < 1 || cfg.time_depth < 0)
    throw DomainError("SymplecticDecoder: invalid configuration");
  if (num_agents < 1 || agent_dim < 1 || theta_dim < 0) throw DomainError("SymplecticDecoder: invalid dimensions");
  if (!(horizon > 0.0)) throw DomainError("SymplecticDecoder: horizon must be positive");
  blocks_ = cfg.block_diagonal ? N_ : 1;
  bs_ = cfg.block_diagonal ? dx_ : n_;
  std::size_t off = 0;
  for (int s = 0; s < 2 * cfg.layers; ++s) {
    Shear sh;
    sh.knet = DenseNet(net_sizes(theta_dim, cfg.cond_width, cfg.cond_depth, blocks_ * bs_ * bs_), cfg.activation, off);
    off += sh.knet.param_count();
    sh.bnet = DenseNet(net_sizes(theta_dim, cfg.cond_width, cfg.cond_depth, n_), cfg.activation, off);
    off += sh.bnet.param_count();
    sh.anet = DenseNet(net_sizes(theta_dim + 1, cfg.time_width, cfg.time_depth, n_), cfg.activation, off);
    off += sh.anet.param_count();
    shears_.push_back(std::move(sh));
  }
  count_ = off;
}

std::unique_ptr<PhaseOperator::Workspace> SymplecticDecoder::make_workspace(int slots) const {
  auto ws = std::make_unique<Ws>();
  ws->cond.resize(shears_.size());
  ws->slots.resize(slots);
  for (auto& s : ws->slots) s.rec.resize(shears_.size());
  ws->a_in.resize(theta_dim_ + 1);
  ws->a_in_dot = Vec::Zero(theta_dim_ + 1);
  ws->a_in_dot[theta_dim_] = 1.0 / T_;
  ws->zero_theta = Vec::Zero(theta_dim_);
  return ws;
}

void SymplecticDecoder::begin(const Vec& params, const Vec& theta, Workspace& base) const {
  auto& ws = static_cast<Ws&>(base);
  if (theta.size() != theta_dim_) throw DomainError("SymplecticDecoder: theta length mismatch");
  ws.theta = theta;
  ws.a_in.head(theta_dim_) = theta;
  for (std::size_t s = 0; s < shears_.size(); ++s) {
    auto& c = ws.cond[s];
    shears_[s].knet.forward(params.data(), theta, ws.zero_theta, c.ktape);
    shears_[s].bnet.forward(params.data(), theta, ws.zero_theta, c.btape);
    c.Kbar.setZero(blocks_ * bs_ * bs_);
    c.bbar.setZero(n_);
  }
}

void SymplecticDecoder::eval(const Vec& params, Workspace& base, int slot, double t, const Vec& z, const Vec& zdot,
                             double tau, Vec& X, Vec& Xdot) const {
  auto& ws = static_cast<Ws&>(base);
  auto& sl = ws.slots[slot];
  sl.t = t;
  sl.tau = tau;
  ws.y = z.head(n_);
  ws.q = z.tail(n_);
  ws.yd = zdot.head(n_);
  ws.qd = zdot.tail(n_);
  ws.a_in[theta_dim_] = t / T_;
  const double beta = t * (T_ - t);
  const double dbeta = T_ - 2.0 * t;
  for (std::size_t s = 0; s < shears_.size(); ++s) {
    const bool up = (s % 2) == 1;
    auto& r = sl.rec[s];
    const auto& c = ws.cond[s];
    const double* K = shears_[s].knet.output(c.ktape).data();
    const Vec& b = shears_[s].bnet.output(c.btape);
    shears_[s].anet.forward(params.data(), ws.a_in, ws.a_in_dot, r.atape);
    const Vec& a = shears_[s].anet.output(r.atape);
    const Vec& ad = shears_[s].anet.output_dot(r.atape);
    r.v = up ? ws.q : ws.y;
    r.vd = up ? ws.qd : ws.yd;
    block_mul(K, blocks_, bs_, r.v, r.s);
    r.s += b;
    block_mul(K, blocks_, bs_, r.vd, r.sd);
    ws.g = a.cwiseProduct(r.s);
    ws.gd = tau * ad.cwiseProduct(r.s) + a.cwiseProduct(r.sd);
    block_mul_t(K, blocks_, bs_, ws.g, ws.sig);
    block_mul_t(K, blocks_, bs_, ws.gd, ws.sigd);
    if (up) {
      ws.y += beta * ws.sig;
      ws.yd += beta * ws.sigd + (tau * dbeta) * ws.sig;
    } else {
      ws.q += ws.sig;
      ws.qd += ws.sigd;
    }
  }
  X.resize(2 * n_);
  Xdot.resize(2 * n_);
  X << ws.y, ws.q;
  Xdot << ws.yd, ws.qd;
}

void SymplecticDecoder::backward(const Vec& params, Workspace& base, int slot, const Vec& Xbar, const Vec& Xdotbar,
                                 Vec& grad) const {
  auto& ws = static_cast<Ws&>(base);
  auto& sl = ws.slots[slot];
  const double t = sl.t, tau = sl.tau;
  const double beta = t * (T_ - t);
  const double dbeta = T_ - 2.0 * t;
  ws.yb = Xbar.head(n_);
  ws.qb = Xbar.tail(n_);
  ws.ydb = Xdotbar.head(n_);
  ws.qdb = Xdotbar.tail(n_);
  for (int s = static_cast<int>(shears_.size()) - 1; s >= 0; --s) {
    const bool up = (s % 2) == 1;
    auto& r = sl.rec[s];
    auto& c = ws.cond[s];
    const double* K = shears_[s].knet.output(c.ktape).data();
    const Vec& a = shears_[s].anet.output(r.atape);
    const Vec& ad = shears_[s].anet.output_dot(r.atape);
    if (up) {
      ws.sigb = beta * ws.yb + (tau * dbeta) * ws.ydb;
      ws.sigdb = beta * ws.ydb;
      if (fault_ == GradientFault::flip_up_shear_backward) {
        ws.sigb = -ws.sigb;
        ws.sigdb = -ws.sigdb;
      }
    } else {
      ws.sigb = ws.qb;
      ws.sigdb = ws.qdb;
    }
    ws.g = a.cwiseProduct(r.s);
    ws.gd = tau * ad.cwiseProduct(r.s) + a.cwiseProduct(r.sd);
    block_mul(K, blocks_, bs_, ws.sigb, ws.gb);
    block_mul(K, blocks_, bs_, ws.sigdb, ws.gdb);
    block_outer_add(c.Kbar.data(), blocks_, bs_, ws.g, ws.sigb);
    block_outer_add(c.Kbar.data(), blocks_, bs_, ws.gd, ws.sigdb);
    ws.sb = ws.gb.cwiseProduct(a) + tau * ws.gdb.cwiseProduct(ad);
    ws.sdb = ws.gdb.cwiseProduct(a);
    ws.ab = ws.gb.cwiseProduct(r.s) + ws.gdb.cwiseProduct(r.sd);
    ws.adb = tau * ws.gdb.cwiseProduct(r.s);
    block_outer_add(c.Kbar.data(), blocks_, bs_, ws.sb, r.v);
    block_outer_add(c.Kbar.data(), blocks_, bs_, ws.sdb, r.vd);
    c.bbar += ws.sb;
    block_mul_t(K, blocks_, bs_, ws.sb, ws.vb);
    block_mul_t(K, blocks_, bs_, ws.sdb, ws.vdb);
    if (up) {
      ws.qb += ws.vb;
      ws.qdb += ws.vdb;
    } else {
      ws.yb += ws.vb;
      ws.ydb += ws.vdb;
    }
    shears_[s].anet.backward(params.data(), r.atape, ws.ab, ws.adb, grad.data());
  }
}

void SymplecticDecoder::end(const Vec& params, Workspace& base, Vec& grad) const {
  auto& ws = static_cast<Ws&>(base);
  for (std::size_t s = 0; s < shears_.size(); ++s) {
    auto& c = ws.cond[s];
    shears_[s].knet.backward(params.data(), c.ktape, c.Kbar, Vec::Zero(c.Kbar.size()), grad.data());
    shears_[s].bnet.backward(params.data(), c.btape, c.bbar, Vec::Zero(n_), grad.data());
    c.Kbar.setZero();
    c.bbar.setZero();
  }
}

Vec SymplecticDecoder::init_params(std::uint64_t seed) const {
  Vec p = Vec::Zero(static_cast<Eigen::Index>(count_));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> small(-0.01, 0.01);
  for (const auto& sh : shears_) {
    sh.knet.init(p.data(), rng);
    sh.bnet.init(p.data(), rng);
    sh.anet.init(p.data(), rng);
    // K heads: identity bias plus small weights; b: small weights; a: zero.
    for (auto k = sh.knet.final_weight_offset(); k < sh.knet.final_bias_offset(); ++k) p[k] = small(rng);
    const auto kb = sh.knet.final_bias_offset();
    for (int b = 0; b < blocks_; ++b)
      for (int i = 0; i < bs_; ++i) p[kb + b * bs_ * bs_ + i * bs_ + i] = 1.0;
    for (auto k = sh.bnet.final_weight_offset(); k < sh.bnet.final_bias_offset() + n_; ++k) p[k] = small(rng);
  }
  return p;
}

std::vector<LayerParams> SymplecticDecoder::condition(const Vec& params, const Vec& theta, double t) const {
  auto base = make_workspace(1);
  auto& ws = static_cast<Ws&>(*base);
  begin(params, theta, ws);
  ws.a_in[theta_dim_] = t / T_;
  std::vector<LayerParams> out;
  for (std::size_t s = 0; s < shears_.size(); ++s) {
    LayerParams lp;
    lp.K = Mat::Zero(n_, n_);
    const double* K = shears_[s].knet.output(ws.cond[s].ktape).data();
    for (int b = 0; b < blocks_; ++b)
      lp.K.block(b * bs_, b * bs_, bs_, bs_) = Eigen::Map<const RowMat>(K + b * bs_ * bs_, bs_, bs_);
    lp.b = shears_[s].bnet.output(ws.cond[s].btape);
    DenseNet::Tape tape;
    shears_[s].anet.forward(params.data(), ws.a_in, ws.a_in_dot, tape);
    lp.a = shears_[s].anet.output(tape);
    out.push_back(std::move(lp));
  }
  return out;
}

std::size_t count_parameters(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim) {
  if (cfg.arch == Architecture::mlp) return mlp_parameter_count(cfg, num_agents, agent_dim, theta_dim);
  if (cfg.layers == 0) return 0;
  return SymplecticDecoder(cfg, num_agents, agent_dim, theta_dim, 1.0).param_count();
}

std::unique_ptr<PhaseOperator> make_operator(const DecoderWeights& w) {
  if (w.cfg.arch == Architecture::mlp)
    return std::make_unique<MlpBaseline>(w.cfg, w.num_agents, w.agent_dim, w.theta_dim, w.horizon);
  return std::make_unique<SymplecticDecoder>(w);
}

DecoderWeights make_decoder_weights(const DecoderConfig& cfg, int num_agents, int agent_dim, int theta_dim,
                                    double horizon, std::uint64_t seed) {
  DecoderWeights w;
  w.cfg = cfg;
  w.num_agents = num_agents;
  w.agent_dim = agent_dim;
  w.theta_dim = theta_dim;
  w.horizon = horizon;
  if (cfg.arch == Architecture::mlp)
    w.params = MlpBaseline(cfg, num_agents, agent_dim, theta_dim, horizon).init_params(seed);
  else
    w.params = SymplecticDecoder(w).init_params(seed);
  return w;
}

std::vector<LayerParams> condition_params(const DecoderWeights& w, const Vec& theta, double t) {
  return SymplecticDecoder(w).condition(w.params, theta, t);
}

Vec shear_forward(const Vec& z, const LayerParams& layer, double t, ShearDir dir, double horizon) {
  const auto n = z.size() / 2;
  auto sigma = [&](const Vec& v) -> Vec { return layer.K.transpose() * layer.a.cwiseProduct(layer.K * v + layer.b); };
  Vec out = z;
  if (dir == ShearDir::low) {
    out.tail(n) += sigma(z.head(n));
  } else {
    out.head(n) += t * (horizon - t) * sigma(z.tail(n));
  }
  return out;
}

namespace {

void eval_once(const DecoderWeights& w, const Vec& theta, double t, const Vec& z, const Vec& zdot, double tau, Vec& X,
               Vec& Xd) {
  if (z.size() != 2 * w.half_dim() || zdot.size() != z.size()) throw DomainError("decoder: latent size mismatch");
  auto op = make_operator(w);
  auto ws = op->make_workspace(1);
  op->begin(w.params, theta, *ws);
  op->eval(w.params, *ws, 0, t, z, zdot, tau, X, Xd);
}

}  // namespace

Vec decoder_forward(const DecoderWeights& w, const Vec& theta, double t, const Vec& z) {
  Vec X, Xd;
  eval_once(w, theta, t, z, Vec::Zero(z.size()), 0.0, X, Xd);
  return X;
}

Vec decoder_jvp(const DecoderWeights& w, const Vec& theta, double t, const Vec& z, const Vec& zdot) {
  Vec X, Xd;
  eval_once(w, theta, t, z, zdot, 0.0, X, Xd);
  return Xd;
}

Vec decoder_time_derivative(const DecoderWeights& w, const Vec& theta, double t, const Vec& z) {
  Vec X, Xd;
  eval_once(w, theta, t, z, Vec::Zero(z.size()), 1.0, X, Xd);
  return Xd;
}

Vec decoder_param_gradient(const DecoderWeights& w, const Vec& theta, const std::vector<DecoderSample>& batch) {
  auto op = make_operator(w);
  Vec grad = Vec::Zero(static_cast<Eigen::Index>(op->param_count()));
  if (batch.empty()) return grad;
  auto ws = op->make_workspace(1);
  op->begin(w.params, theta, *ws);
  Vec X, Xd;
  for (const auto& s : batch) {
    op->eval(w.params, *ws, 0, s.t, s.z, s.zdot, 1.0, X, Xd);
    op->backward(w.params, *ws, 0, s.Xbar, s.Xdot_bar, grad);
  }
  op->end(w.params, *ws, grad);
  return grad;
}

Mat operator_jacobian(const DecoderWeights& w, const Vec& theta, double t, const Vec& z) {
  const auto op = make_operator(w);
  const int m = 2 * op->half_dim();
  if (z.size() != m) throw DomainError("operator_jacobian: latent point has the wrong size");
  auto ws = op->make_workspace(1);
  op->begin(w.params, theta, *ws);
  Mat J(m, m);
  Vec X, Xd, e = Vec::Zero(m);
  for (int k = 0; k < m; ++k) {
    e[k] = 1.0;
    op->eval(w.params, *ws, 0, t, z, e, 0.0, X, Xd);
    J.col(k) = Xd;
    e[k] = 0.0;
  }
  return J;
}

SymplecticDefect symplectic_defect(const DecoderWeights& w, const Vec& theta, double t, const Vec& z) {
  const Mat J = operator_jacobian(w, theta, t, z);
  const auto n = J.rows() / 2;
  Mat Om = Mat::Zero(J.rows(), J.cols());
  Om.topRightCorner(n, n).setIdentity();
  Om.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  return {(J.transpose() * Om * J - Om).norm(), std::abs(J.determinant() - 1.0)};
}

}  // namespace pisonet
