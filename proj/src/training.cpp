#include "pisonet/training.hpp"

#include "pisonet/parallel.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

namespace pisonet {

AnnealState anneal_state(const AnnealConfig& cfg, int step) {
  AnnealState s;
  if (!cfg.enabled) {
    s.eps = cfg.eps;
    s.ell = cfg.ell;
    return s;
  }
  if (cfg.period_steps < 1) throw DomainError("anneal: period_steps must be >= 1");
  if (!(cfg.rho_eps > 0.0 && cfg.rho_eps < 1.0 && cfg.rho_ell > 0.0 && cfg.rho_ell < 1.0))
    throw DomainError("anneal: decay factors must lie in (0, 1)");
  s.stage = std::max(step, 0) / cfg.period_steps;
  s.eps = cfg.eps0 * std::pow(cfg.rho_eps, s.stage);
  s.ell = cfg.ell0 * std::pow(cfg.rho_ell, s.stage);
  return s;
}

namespace {

struct InstanceResult {
  double residual = 0.0;  // sum over collocation points
  double ic = 0.0, tc = 0.0;
};

// Loss terms of one sample; when grad is non-null, accumulates the gradient
// of scale*residual + ic_scale*ic + tc_scale*tc.
InstanceResult instance_terms(const TrainSample& s, const PhaseOperator& op, const Vec& params,
                              PhaseOperator::Workspace& ws, const LossOptions& opt, double scale, double ic_scale,
                              double tc_scale, Vec* grad) {
  const int n = op.half_dim();
  const int d = s.inst.spatial_dim();
  const int dx = 2 * d;
  const int N = s.inst.num_agents();
  const int Nt = s.latent.grid.size();
  InstanceResult r;
  op.begin(params, s.theta, ws);
  Vec X, Xd, Xbar(2 * n), Xdbar(2 * n), rx(n), rp(n);
  for (int j = 0; j < Nt; ++j) {
    op.eval(params, ws, j, s.latent.grid.times[j], s.latent.point(j), s.latent.velocity(j), 1.0, X, Xd);
    const Vec x = X.head(n), p = X.tail(n);
    const PhaseGradient g = hamiltonian_grads(s.inst, x, p, opt.bp);
    rx = Xd.head(n) - g.dp;
    rp = Xd.tail(n) + g.dx;
    r.residual += rx.squaredNorm() + rp.squaredNorm();
    double icj = 0.0, tcj = 0.0;
    Vec dstate = Vec::Zero(n);
    if (j == 0 || j == Nt - 1) {
      const RowMat& target = j == 0 ? s.inst.x0 : s.inst.xT;
      for (int i = 0; i < N; ++i) dstate.segment(i * dx, dx) = x.segment(i * dx, dx) - target.row(i).transpose();
      (j == 0 ? icj : tcj) = dstate.squaredNorm();
      r.ic += icj;
      r.tc += tcj;
    }
    if (grad == nullptr) continue;
    const PhaseGradient hv = hamiltonian_hvp(s.inst, x, p, opt.bp, rp, -rx);
    Xbar.head(n) = 2.0 * scale * hv.dx;
    Xbar.tail(n) = 2.0 * scale * hv.dp;
    if (j == 0 && ic_scale != 0.0) Xbar.head(n) += 2.0 * ic_scale * dstate;
    if (j == Nt - 1 && tc_scale != 0.0) Xbar.head(n) += 2.0 * tc_scale * dstate;
    Xdbar.head(n) = 2.0 * scale * rx;
    Xdbar.tail(n) = 2.0 * scale * rp;
    op.backward(params, ws, j, Xbar, Xdbar, *grad);
  }
  if (grad != nullptr) op.end(params, ws, *grad);
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

LossValue total_loss(const std::vector<TrainSample>& batch, const PhaseOperator& op, const Vec& params,
                     const LossOptions& opt, bool want_grad) {
  LossValue out;
  const auto P = static_cast<Eigen::Index>(op.param_count());
  if (want_grad) out.grad = Vec::Zero(P);
  if (batch.empty()) return out;
  const int B = static_cast<int>(batch.size());
  const int Nt = batch[0].latent.grid.size();
  for (const auto& s : batch)
    if (s.latent.grid.size() != Nt) throw DomainError("total_loss: all samples must share the collocation grid");
  const double scale = 1.0 / (static_cast<double>(B) * Nt);
  const double ic_scale = opt.ic_weight / B;
  const double tc_scale = opt.tc_weight / B;

  const int W = std::min(worker_count(), B);
  std::vector<std::unique_ptr<PhaseOperator::Workspace>> ws(W);
  for (auto& w : ws) w = op.make_workspace(Nt);
  std::vector<InstanceResult> res(B);
  std::vector<Vec> grads(want_grad ? B : 0);
  parallel_for(B, [&](int worker, int b) {
    Vec* g = nullptr;
    if (want_grad) {
      grads[b] = Vec::Zero(P);
      g = &grads[b];
    }
    res[b] = instance_terms(batch[b], op, params, *ws[worker], opt, scale, ic_scale, tc_scale, g);
  });
  for (int b = 0; b < B; ++b) {
    if (!std::isfinite(res[b].residual) && out.worst_instance < 0) out.worst_instance = b;
    out.residual += res[b].residual;
    out.ic += res[b].ic;
    out.tc += res[b].tc;
    if (want_grad) out.grad += grads[b];
  }
  out.residual *= scale;
  out.ic /= B;
  out.tc /= B;
  out.total = out.residual + opt.ic_weight * out.ic + opt.tc_weight * out.tc;
  if (opt.weight_decay > 0.0) {
    out.total += opt.weight_decay * params.squaredNorm();
    if (want_grad) out.grad += 2.0 * opt.weight_decay * params;
  }
  return out;
}

std::vector<TrainSample> make_samples(const std::vector<ProblemInstance>& insts, const std::vector<Vec>& thetas,
                                      const LatentConfig& lcfg, int collocation_count,
                                      const DecoderWeights* pretrained, const Vec* pretrained_theta) {
  if (insts.size() != thetas.size()) throw DomainError("make_samples: instance/theta count mismatch");
  std::vector<TrainSample> out;
  out.reserve(insts.size());
  for (std::size_t b = 0; b < insts.size(); ++b) {
    const TimeGrid grid = TimeGrid::uniform(insts[b].horizon, collocation_count);
    out.push_back({insts[b], thetas[b], solve_latent(insts[b], lcfg, grid, pretrained, pretrained_theta)});
  }
  return out;
}

PmpResiduals pmp_residuals(const ProblemInstance& inst, const DecoderWeights& w, const Vec& theta,
                           const LatentTrajectory& latent, const BarrierParams& bp) {
  auto op = make_operator(w);
  const int n = op->half_dim();
  if (latent.y.cols() != n) throw DomainError("pmp_residuals: latent dimension mismatch");
  if (!latent.grid.valid()) throw DomainError("pmp_residuals: invalid grid");
  const int Nt = latent.grid.size();
  auto ws = op->make_workspace(1);
  op->begin(w.params, theta, *ws);
  PmpResiduals r{RowMat(Nt, n), RowMat(Nt, n)};
  Vec X, Xd;
  for (int j = 0; j < Nt; ++j) {
    op->eval(w.params, *ws, 0, latent.grid.times[j], latent.point(j), latent.velocity(j), 1.0, X, Xd);
    const PhaseGradient g = hamiltonian_grads(inst, X.head(n), X.tail(n), bp);
    r.rx.row(j) = (Xd.head(n) - g.dp).transpose();
    r.rp.row(j) = (Xd.tail(n) + g.dx).transpose();
  }
  return r;
}

std::vector<double> pretrain_regression(DecoderWeights& w, const std::vector<TrainSample>& samples,
                                        const ReferenceSet& refs, int steps, double lr) {
  if (refs.size() != samples.size()) throw DomainError("pretrain_regression: one reference per sample required");
  auto op = make_operator(w);
  const int n = op->half_dim();
  const auto P = static_cast<Eigen::Index>(op->param_count());
  std::vector<double> losses;
  if (samples.empty()) return losses;
  const int B = static_cast<int>(samples.size());
  const int Nt = samples[0].latent.grid.size();
  const double scale = 1.0 / (static_cast<double>(B) * Nt);
  for (int b = 0; b < B; ++b) {
    const int d = samples[b].inst.spatial_dim();
    if (refs[b].rows() != samples[b].latent.grid.size() || refs[b].cols() != samples[b].inst.num_agents() * d)
      throw DomainError("pretrain_regression: reference must be Nt x N*d positions");
  }
  AdamOptions ao;
  ao.lr = lr;
  Adam adam(ao);
  const int W = std::min(worker_count(), B);
  std::vector<std::unique_ptr<PhaseOperator::Workspace>> ws(W);
  for (auto& x : ws) x = op->make_workspace(Nt);
  for (int step = 0; step < steps; ++step) {
    std::vector<double> lb(B, 0.0);
    std::vector<Vec> gb(B);
    parallel_for(B, [&](int worker, int b) {
      const auto& s = samples[b];
      const int d = s.inst.spatial_dim();
      const int N = s.inst.num_agents();
      gb[b] = Vec::Zero(P);
      op->begin(w.params, s.theta, *ws[worker]);
      Vec X, Xd, Xbar(2 * n), Xdbar = Vec::Zero(2 * n);
      const Vec zero = Vec::Zero(2 * n);
      for (int j = 0; j < s.latent.grid.size(); ++j) {
        op->eval(w.params, *ws[worker], j, s.latent.grid.times[j], s.latent.point(j), zero, 0.0, X, Xd);
        Xbar.setZero();
        for (int i = 0; i < N; ++i) {
          const Vec e = X.segment(2 * d * i, d) - refs[b].row(j).segment(d * i, d).transpose();
          lb[b] += e.squaredNorm();
          Xbar.segment(2 * d * i, d) = 2.0 * scale * e;
        }
        op->backward(w.params, *ws[worker], j, Xbar, Xdbar, gb[b]);
      }
      op->end(w.params, *ws[worker], gb[b]);
    });
    double loss = 0.0;
    Vec g = Vec::Zero(P);
    for (int b = 0; b < B; ++b) {
      loss += lb[b];
      g += gb[b];
    }
    loss *= scale;
    if (!std::isfinite(loss)) throw TrainingError("pretrain_regression: non-finite loss at step " + std::to_string(step));
    losses.push_back(loss);
    adam.step(w.params, g);
  }
  return losses;
}

TrainReport train(DecoderWeights& w, const std::vector<TrainSample>& samples, const TrainConfig& cfg,
                  const ReferenceSet* refs) {
  if (samples.empty()) throw DomainError("train: empty training set");
  if (cfg.collocation_count < 2) throw DomainError("train: collocation_count must be >= 2");
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport rep;
  auto op = make_operator(w);
  if (refs != nullptr && cfg.pretrain_steps > 0)
    rep.pretrain_loss = pretrain_regression(w, samples, *refs, cfg.pretrain_steps, cfg.pretrain_lr);

  const int B = static_cast<int>(samples.size());
  const int bs = cfg.batch_size > 0 ? std::min(cfg.batch_size, B) : B;
  auto batch_at = [&](int step) {
    if (bs == B) return samples;
    std::vector<TrainSample> out;
    for (int k = 0; k < bs; ++k) out.push_back(samples[(static_cast<std::size_t>(step) * bs + k) % B]);
    return out;
  };
  auto check = [&](const LossValue& lv, int step, const char* phase) {
    if (std::isfinite(lv.total)) return;
    std::ostringstream os;
    os << "train: non-finite loss in " << phase << " step " << step;
    if (lv.worst_instance >= 0) os << " (instance " << lv.worst_instance << ")";
    throw TrainingError(os.str());
  };
  auto record = [&](const LossValue& lv, const AnnealState& st) {
    rep.loss.push_back(lv.total);
    rep.residual.push_back(lv.residual);
    rep.eps.push_back(st.eps);
    rep.ell.push_back(st.ell);
    rep.elapsed.push_back(seconds_since(t0));
  };

  AdamOptions ao;
  ao.lr = cfg.adam_lr;
  ao.beta1 = cfg.adam_beta1;
  ao.beta2 = cfg.adam_beta2;
  ao.eps = cfg.adam_eps;
  Adam adam(ao);
  LossOptions lo;
  lo.weight_decay = cfg.weight_decay;
  lo.ic_weight = cfg.ic_weight;
  lo.tc_weight = cfg.tc_weight;
  AnnealState st = anneal_state(cfg.anneal, 0);
  for (int step = 0; step < cfg.adam_steps; ++step) {
    st = anneal_state(cfg.anneal, step);
    lo.bp = {st.eps, st.ell};
    const auto batch = batch_at(step);
    const LossValue lv = total_loss(batch, *op, w.params, lo);
    check(lv, step, "adam");
    record(lv, st);
    if (cfg.verbose)
      std::cout << "adam " << step << " loss " << lv.total << " eps " << st.eps << " ell " << st.ell << " t "
                << rep.elapsed.back() << "\n";
    adam.step(w.params, lv.grad);
  }

  st = anneal_state(cfg.anneal, std::max(cfg.adam_steps - 1, 0));
  rep.final_anneal = st;
  if (cfg.lbfgs_steps > 0) {
    lo.bp = {st.eps, st.ell};
    LbfgsOptions lbo;
    lbo.memory = cfg.lbfgs_memory;
    Lbfgs lbfgs(lbo);
    int evals = 0;
    const Objective fn = [&](const Vec& x, Vec& g) {
      LossValue lv = total_loss(samples, *op, x, lo);
      check(lv, evals++, "lbfgs");
      g = std::move(lv.grad);
      return lv.total;
    };
    LossValue lv = total_loss(samples, *op, w.params, lo);
    check(lv, 0, "lbfgs");
    double f = lv.total;
    Vec g = lv.grad;
    int failures_in_row = 0;
    for (int step = 0; step < cfg.lbfgs_steps; ++step) {
      const auto status = lbfgs.step(fn, w.params, f, g);
      if (status == Lbfgs::Status::converged) break;
      LossValue cur;
      cur.total = f;
      cur.residual = f - cfg.weight_decay * w.params.squaredNorm();
      record(cur, st);
      if (status == Lbfgs::Status::line_search_failed) {
        ++rep.lbfgs_line_search_failures;
        if (++failures_in_row >= 2) break;
        continue;
      }
      failures_in_row = 0;
      if (cfg.verbose) std::cout << "lbfgs " << step << " loss " << f << " t " << rep.elapsed.back() << "\n";
    }
  }
  return rep;
}

PhaseTrajectory decode_trajectory(const DecoderWeights& w, const Vec& theta, const LatentTrajectory& latent) {
  auto op = make_operator(w);
  const int n = op->half_dim();
  const int Nt = latent.grid.size();
  auto ws = op->make_workspace(1);
  op->begin(w.params, theta, *ws);
  PhaseTrajectory out{latent.grid, RowMat(Nt, n), RowMat(Nt, n)};
  Vec X, Xd;
  const Vec zero = Vec::Zero(2 * n);
  for (int j = 0; j < Nt; ++j) {
    op->eval(w.params, *ws, 0, latent.grid.times[j], latent.point(j), zero, 0.0, X, Xd);
    out.x.row(j) = X.head(n).transpose();
    out.p.row(j) = X.tail(n).transpose();
  }
  return out;
}

RefineResult refine_instance(const TrainSample& sample, const DecoderWeights& w, int max_steps, const BarrierParams& bp,
                             int refine_grid) {
  RefineResult out;
  auto op = make_operator(w);
  std::vector<TrainSample> one{sample};
  if (refine_grid > 1 && refine_grid != sample.latent.grid.size())
    throw DomainError("refine_instance: latent must already be sampled on the refinement grid");
  LossOptions lo;
  lo.bp = bp;
  DecoderWeights local = w;
  LossValue lv = total_loss(one, *op, local.params, lo);
  double f = lv.total;
  Vec g = lv.grad;
  out.initial_loss = f;
  if (max_steps > 0) {
    Lbfgs lbfgs;
    const Objective fn = [&](const Vec& x, Vec& gr) {
      LossValue v = total_loss(one, *op, x, lo);
      gr = std::move(v.grad);
      return std::isfinite(v.total) ? v.total : std::numeric_limits<double>::infinity();
    };
    for (int k = 0; k < max_steps; ++k) {
      const auto status = lbfgs.step(fn, local.params, f, g);
      if (status == Lbfgs::Status::converged) break;
      if (status == Lbfgs::Status::line_search_failed) {
        out.line_search_failed = true;
        break;
      }
      ++out.steps;
    }
  }
  out.final_loss = f;
  out.delta = local.params - w.params;
  out.traj = decode_trajectory(local, sample.theta, sample.latent);
  return out;
}

double gradient_check(const DecoderWeights& w, const TrainSample& sample, const BarrierParams& bp, GradientFault fault) {
  std::unique_ptr<PhaseOperator> op;
  if (w.cfg.arch == Architecture::sonet) {
    auto dec = std::make_unique<SymplecticDecoder>(w);
    dec->set_fault(fault);
    op = std::move(dec);
  } else {
    op = make_operator(w);
  }
  std::vector<TrainSample> one{sample};
  LossOptions lo;
  lo.bp = bp;
  const LossValue lv = total_loss(one, *op, w.params, lo);
  const double h = 1e-5;
  double worst = 0.0;
  Vec x = w.params;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + h;
    const double fp = total_loss(one, *op, x, lo, false).total;
    x[k] = orig - h;
    const double fm = total_loss(one, *op, x, lo, false).total;
    x[k] = orig;
    const double fd = (fp - fm) / (2.0 * h);
    const double err = std::abs(lv.grad[k] - fd) / std::max(std::abs(lv.grad[k]), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace pisonet
