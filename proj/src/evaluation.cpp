#include "pisonet/evaluation.hpp"

#include "pisonet/parallel.hpp"
#include "pisonet/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pisonet {

double running_cost(const PhaseTrajectory& traj, const ProblemInstance& inst) {
  const int Nt = traj.grid.size();
  if (Nt < 2) throw DomainError("running_cost: need at least two samples");
  const int N = inst.num_agents(), d = inst.spatial_dim(), dx = 2 * d;
  const double cv = inst.cost.velocity_weight, cu = inst.cost.control_weight;
  std::vector<double> f(Nt, 0.0);
  for (int j = 0; j < Nt; ++j) {
    for (int i = 0; i < N; ++i) {
      const Vec v = traj.x.row(j).segment(i * dx + d, d).transpose();
      const Vec u = conjugate_control(inst, i, traj.p.row(j).segment(i * dx, dx).transpose());
      f[j] += cv * v.squaredNorm() + cu * u.squaredNorm();
    }
  }
  double c = 0.0;
  for (int j = 0; j + 1 < Nt; ++j) c += 0.5 * (traj.grid.times[j + 1] - traj.grid.times[j]) * (f[j] + f[j + 1]);
  return c;
}

SafetyResult safety_violation(const PhaseTrajectory& traj, const ProblemInstance& inst, int m) {
  if (m < 1) throw DomainError("safety_violation: refinement must be >= 1");
  SafetyResult r;
  const int Nt = traj.grid.size();
  if (Nt == 0 || constraint_count(inst) == 0) return r;
  double worst = 0.0;
  auto at = [&](const Vec& x) {
    const double h = min_constraint(inst, x);
    worst = std::max(worst, -h);
  };
  for (int j = 0; j < Nt; ++j) {
    const Vec xj = traj.x.row(j).transpose();
    at(xj);
    if (j + 1 == Nt) break;
    const Vec xn = traj.x.row(j + 1).transpose();
    for (int k = 1; k < m; ++k) {
      const double s = static_cast<double>(k) / m;
      at((1.0 - s) * xj + s * xn);
    }
  }
  r.max_violation = std::max(0.0, worst);
  r.pass = r.max_violation == 0.0;
  return r;
}

std::vector<PhaseTrajectory> decode_batch(const std::vector<ProblemInstance>& insts, const std::vector<Vec>& thetas,
                                          const DecoderWeights& w, const LatentConfig& lcfg, const TimeGrid& grid,
                                          const DecoderWeights* pretrained, const Vec* pretrained_theta) {
  if (insts.size() != thetas.size()) throw DomainError("decode_batch: instance/theta count mismatch");
  std::vector<PhaseTrajectory> out(insts.size());
  parallel_for(static_cast<int>(insts.size()), [&](int, int b) {
    const LatentTrajectory lat = solve_latent(insts[b], lcfg, grid, pretrained, pretrained_theta);
    out[b] = decode_trajectory(w, thetas[b], lat);
  });
  return out;
}

EvalReport evaluate_batch(const std::vector<ProblemInstance>& insts, const std::vector<Vec>& thetas,
                          const DecoderWeights& w, const LatentConfig& lcfg, const EvalOptions& opt,
                          const DecoderWeights* pretrained, const Vec* pretrained_theta) {
  EvalReport rep;
  if (insts.empty()) return rep;
  if (opt.refinement < 1 || opt.time_samples < 2) throw DomainError("evaluate_batch: invalid grid options");
  const int B = static_cast<int>(insts.size());
  std::vector<TimeGrid> dense(B);
  for (int b = 0; b < B; ++b)
    dense[b] = TimeGrid::uniform(insts[b].horizon, opt.time_samples).refined(opt.refinement);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<PhaseTrajectory> trajs(B);
  parallel_for(B, [&](int, int b) {
    const LatentTrajectory lat = solve_latent(insts[b], lcfg, dense[b], pretrained, pretrained_theta);
    trajs[b] = decode_trajectory(w, thetas[b], lat);
  });
  rep.batched_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  rep.rows.resize(B);
  parallel_for(B, [&](int, int b) {
    InstanceMetrics& row = rep.rows[b];
    const TimeGrid coarse = TimeGrid::uniform(insts[b].horizon, opt.time_samples);
    const LatentTrajectory lat = solve_latent(insts[b], lcfg, coarse, pretrained, pretrained_theta);
    auto fill = [&](const DecoderWeights& ww, const PhaseTrajectory& tr) {
      row.cost = running_cost(tr, insts[b]);
      const SafetyResult s = safety_violation(tr, insts[b], 1);
      row.max_violation = s.max_violation;
      row.pass = s.pass;
      const PmpResiduals r = pmp_residuals(insts[b], ww, thetas[b], lat, opt.bp);
      row.mean_residual = (r.rx.rowwise().squaredNorm() + r.rp.rowwise().squaredNorm()).mean();
    };
    fill(w, trajs[b]);
    if (!row.pass && opt.refine_steps > 0) {
      const LatentTrajectory dl = solve_latent(insts[b], lcfg, dense[b], pretrained, pretrained_theta);
      const RefineResult rr = refine_instance({insts[b], thetas[b], dl}, w, opt.refine_steps, opt.bp, dense[b].size());
      DecoderWeights local = w;
      local.params += rr.delta;
      fill(local, rr.traj);
      row.refined = true;
    }
  });
  summarize(rep);
  return rep;
}

void summarize(EvalReport& r) {
  r.total = static_cast<int>(r.rows.size());
  r.pass_count = 0;
  r.avg_cost = r.avg_max_violation = r.avg_residual = 0.0;
  if (r.rows.empty()) return;
  for (const auto& m : r.rows) {
    r.pass_count += m.pass ? 1 : 0;
    r.avg_cost += m.cost;
    r.avg_max_violation += m.max_violation;
    r.avg_residual += m.mean_residual;
  }
  r.avg_cost /= r.total;
  r.avg_max_violation /= r.total;
  r.avg_residual /= r.total;
}

void to_json(nlohmann::json& j, const InstanceMetrics& m) {
  j = {{"cost", m.cost},
       {"max_violation", m.max_violation},
       {"pass", m.pass},
       {"mean_residual", m.mean_residual},
       {"refined", m.refined}};
}
void from_json(const nlohmann::json& j, InstanceMetrics& m) {
  m.cost = j.at("cost").get<double>();
  m.max_violation = j.at("max_violation").get<double>();
  m.pass = j.at("pass").get<bool>();
  m.mean_residual = j.at("mean_residual").get<double>();
  m.refined = j.value("refined", false);
}
void to_json(nlohmann::json& j, const EvalReport& r) {
  j = {{"rows", r.rows},
       {"pass_count", r.pass_count},
       {"total", r.total},
       {"avg_cost", r.avg_cost},
       {"avg_max_violation", r.avg_max_violation},
       {"avg_residual", r.avg_residual},
       {"batched_seconds", r.batched_seconds}};
}
void from_json(const nlohmann::json& j, EvalReport& r) {
  r.rows = j.at("rows").get<std::vector<InstanceMetrics>>();
  r.batched_seconds = j.value("batched_seconds", 0.0);
  summarize(r);
}

std::string report_table(const EvalReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %12s %14s %6s %14s\n", "instance", "cost", "max_violation", "pass", "residual");
  os << buf;
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const auto& m = r.rows[i];
    std::snprintf(buf, sizeof buf, "%-8zu %12.6f %14.3e %6s %14.3e%s\n", i, m.cost, m.max_violation,
                  m.pass ? "yes" : "no", m.mean_residual, m.refined ? " (refined)" : "");
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-8s %12.6f %14.3e %3d/%-3d %13.3e\n", "mean", r.avg_cost, r.avg_max_violation,
                r.pass_count, r.total, r.avg_residual);
  os << buf;
  std::snprintf(buf, sizeof buf, "batched inference: %.4f s\n", r.batched_seconds);
  os << buf;
  return os.str();
}

}  // namespace pisonet
