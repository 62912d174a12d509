#include "pisonet/latent.hpp"

#include "pisonet/decoder.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <sstream>

namespace pisonet {

LatentVariant parse_latent_variant(const std::string& s) {
  if (s == "lqr") return LatentVariant::lqr;
  if (s == "lqr_rotation") return LatentVariant::lqr_rotation;
  if (s == "lqr_composed") return LatentVariant::lqr_composed;
  throw DomainError("unknown latent variant '" + s + "'");
}

std::string latent_variant_name(LatentVariant v) {
  switch (v) {
    case LatentVariant::lqr: return "lqr";
    case LatentVariant::lqr_rotation: return "lqr_rotation";
    case LatentVariant::lqr_composed: return "lqr_composed";
  }
  return "lqr";
}

Mat build_latent_matrix(const AgentSpec& agent, const LatentConfig& cfg, double control_weight) {
  if (!(cfg.velocity_cost >= 0.0)) throw DomainError("latent: C_Q must be >= 0");
  if (!(control_weight > 0.0)) throw DomainError("latent: control weight must be positive");
  const int dx = agent.state_dim;
  const int d = dx / 2;
  Mat A = Mat::Zero(dx, dx);
  A.block(0, d, d, d).setIdentity();
  if (cfg.variant == LatentVariant::lqr_rotation) {
    if (d != 2) throw DomainError("latent: rotation variant requires spatial_dim = 2");
    A(d, d + 1) = -cfg.rotation_rate;
    A(d + 1, d) = cfg.rotation_rate;
  }
  Mat H = Mat::Zero(2 * dx, 2 * dx);
  H.topLeftCorner(dx, dx) = A;
  H.bottomRightCorner(dx, dx) = -A.transpose();
  H.block(d, dx + d, d, d).diagonal().setConstant(1.0 / (2.0 * control_weight));
  H.block(dx + d, d, d, d).diagonal().setConstant(cfg.velocity_cost);
  return H;
}

Mat matrix_exponential(const Mat& M, double t) {
  if (M.rows() != M.cols()) throw DomainError("matrix_exponential: matrix must be square");
  if (!M.allFinite() || !std::isfinite(t)) throw DomainError("matrix_exponential: non-finite input");
  const Mat tm = t * M;
  return tm.exp();
}

namespace {

// Per-agent system matrices, deduplicated: agents with equal matrices share propagators.
struct AgentSystems {
  std::vector<Mat> mats;
  std::vector<int> which;
};

AgentSystems agent_systems(const ProblemInstance& inst, const LatentConfig& cfg) {
  AgentSystems s;
  for (const auto& a : inst.agents) {
    Mat H = build_latent_matrix(a, cfg, inst.cost.control_weight);
    int found = -1;
    for (std::size_t k = 0; k < s.mats.size(); ++k)
      if (s.mats[k].rows() == H.rows() && s.mats[k] == H) found = static_cast<int>(k);
    if (found < 0) {
      s.mats.push_back(H);
      found = static_cast<int>(s.mats.size()) - 1;
    }
    s.which.push_back(found);
  }
  return s;
}

}  // namespace

LatentTrajectory solve_latent_bvp(const ProblemInstance& inst, const LatentConfig& cfg, const TimeGrid& grid) {
  if (cfg.variant == LatentVariant::lqr_composed)
    throw DomainError("solve_latent_bvp: composed variant needs a pretrained map; use solve_latent");
  if (!grid.valid()) throw DomainError("solve_latent_bvp: invalid time grid");
  if (std::abs(grid.horizon() - inst.horizon) > 1e-12 * inst.horizon)
    throw DomainError("solve_latent_bvp: grid horizon differs from instance horizon");
  const int N = inst.num_agents();
  const int dx = inst.agent_dim();
  const int n = N * dx;
  const int Nt = grid.size();
  const double T = inst.horizon;

  const AgentSystems sys = agent_systems(inst, cfg);
  // Propagators at every sample, per distinct system.
  std::vector<std::vector<Mat>> prop(sys.mats.size());
  for (std::size_t k = 0; k < sys.mats.size(); ++k) {
    prop[k].resize(Nt);
    for (int j = 0; j < Nt; ++j) prop[k][j] = matrix_exponential(sys.mats[k], grid.times[j]);
  }

  LatentTrajectory out;
  out.grid = grid;
  out.y.resize(Nt, n);
  out.q.resize(Nt, n);
  out.ydot.resize(Nt, n);
  out.qdot.resize(Nt, n);
  for (int i = 0; i < N; ++i) {
    const int k = sys.which[i];
    const Mat& H = sys.mats[k];
    const Mat MT = grid.times.back() == T ? prop[k][Nt - 1] : matrix_exponential(H, T);
    const Mat Myy = MT.topLeftCorner(dx, dx);
    const Mat Myq = MT.topRightCorner(dx, dx);
    Eigen::JacobiSVD<Mat> svd(Myq);
    const auto& sv = svd.singularValues();
    const double cond = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
    if (!(cond <= 1e12)) {
      std::ostringstream os;
      os << "latent BVP: conjugate point for agent " << i << " (cond(M_yq) = " << cond << ")";
      throw ConjugatePointError(os.str());
    }
    const Vec x0 = inst.x0.row(i).transpose();
    const Vec xT = inst.xT.row(i).transpose();
    const Vec q0 = Myq.colPivHouseholderQr().solve(xT - Myy * x0);
    Vec z0(2 * dx);
    z0 << x0, q0;
    for (int j = 0; j < Nt; ++j) {
      const Vec z = prop[k][j] * z0;
      const Vec zd = H * z;
      out.y.row(j).segment(i * dx, dx) = z.head(dx).transpose();
      out.q.row(j).segment(i * dx, dx) = z.tail(dx).transpose();
      out.ydot.row(j).segment(i * dx, dx) = zd.head(dx).transpose();
      out.qdot.row(j).segment(i * dx, dx) = zd.tail(dx).transpose();
    }
  }
  return out;
}

std::vector<double> latent_energy(const LatentTrajectory& traj, const ProblemInstance& inst, const LatentConfig& cfg) {
  const int N = inst.num_agents();
  const int dx = inst.agent_dim();
  std::vector<Mat> H;
  for (const auto& a : inst.agents) H.push_back(build_latent_matrix(a, cfg, inst.cost.control_weight));
  std::vector<double> e(traj.grid.size(), 0.0);
  for (int j = 0; j < traj.grid.size(); ++j) {
    for (int i = 0; i < N; ++i) {
      const Vec y = traj.y.row(j).segment(i * dx, dx).transpose();
      const Vec q = traj.q.row(j).segment(i * dx, dx).transpose();
      const Mat A = H[i].topLeftCorner(dx, dx);
      const Mat C = H[i].topRightCorner(dx, dx);
      const Mat Q = H[i].bottomLeftCorner(dx, dx);
      e[j] += q.dot(A * y) - 0.5 * y.dot(Q * y) + 0.5 * q.dot(C * q);
    }
  }
  return e;
}

LatentTrajectory compose_pretrained(const LatentTrajectory& latent, const DecoderWeights& pretrained,
                                    const Vec& pretrained_theta) {
  const int n = static_cast<int>(latent.y.cols());
  if (pretrained.half_dim() != n) throw DomainError("compose_pretrained: checkpoint architecture mismatch");
  if (pretrained_theta.size() != pretrained.theta_dim)
    throw DomainError("compose_pretrained: checkpoint theta dimension mismatch");
  auto op = make_operator(pretrained);
  auto ws = op->make_workspace(1);
  op->begin(pretrained.params, pretrained_theta, *ws);
  LatentTrajectory out = latent;
  Vec X, Xd;
  for (int j = 0; j < latent.grid.size(); ++j) {
    op->eval(pretrained.params, *ws, 0, latent.grid.times[j], latent.point(j), latent.velocity(j), 1.0, X, Xd);
    out.y.row(j) = X.head(n).transpose();
    out.q.row(j) = X.tail(n).transpose();
    out.ydot.row(j) = Xd.head(n).transpose();
    out.qdot.row(j) = Xd.tail(n).transpose();
  }
  return out;
}

LatentTrajectory solve_latent(const ProblemInstance& inst, const LatentConfig& cfg, const TimeGrid& grid,
                              const DecoderWeights* pretrained, const Vec* pretrained_theta) {
  if (cfg.variant != LatentVariant::lqr_composed) return solve_latent_bvp(inst, cfg, grid);
  if (pretrained == nullptr || pretrained_theta == nullptr)
    throw DomainError("solve_latent: composed variant requires a pretrained checkpoint");
  LatentConfig base = cfg;
  base.variant = cfg.rotation_rate != 0.0 ? LatentVariant::lqr_rotation : LatentVariant::lqr;
  return compose_pretrained(solve_latent_bvp(inst, base, grid), *pretrained, *pretrained_theta);
}

}  // namespace pisonet
