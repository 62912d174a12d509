#include "pisonet/eikonal.hpp"

#include "pisonet/hamiltonian.hpp"
#include "pisonet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace pisonet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kObstacleSpeed = 1e-6;
constexpr double kDenomFloor = 1e-4;

bool point_free(const EnvironmentSpec& env, const Vec& w, double clearance) {
  for (const auto& ob : env.obstacles)
    if (surface_distance(ob, w) < clearance) return false;
  return true;
}

}  // namespace

GridSpec GridSpec::covering(const AxisBox& box, double h, double clearance) {
  if (!(h > 0.0)) throw DomainError("GridSpec: spacing must be positive");
  if (box.min_corner.size() != 2 || box.max_corner.size() != 2) throw DomainError("GridSpec: domain must be 2D");
  GridSpec g;
  g.x0 = box.min_corner[0];
  g.y0 = box.min_corner[1];
  g.h = h;
  g.nx = static_cast<int>(std::lround((box.max_corner[0] - box.min_corner[0]) / h)) + 1;
  g.ny = static_cast<int>(std::lround((box.max_corner[1] - box.min_corner[1]) / h)) + 1;
  g.clearance = clearance;
  return g;
}

double ScalarField2D::value(double x, double y) const {
  const double fx = std::clamp((x - x0) / h, 0.0, nx - 1.0);
  const double fy = std::clamp((y - y0) / h, 0.0, ny - 1.0);
  const int i = std::min(static_cast<int>(fx), nx - 2), j = std::min(static_cast<int>(fy), ny - 2);
  const double s = fx - i, t = fy - j;
  return (1 - s) * (1 - t) * at(i, j) + s * (1 - t) * at(i + 1, j) + (1 - s) * t * at(i, j + 1) + s * t * at(i + 1, j + 1);
}

Eigen::Vector2d ScalarField2D::gradient(double x, double y) const {
  const double fx = std::clamp((x - x0) / h, 0.0, nx - 1.0);
  const double fy = std::clamp((y - y0) / h, 0.0, ny - 1.0);
  const int i = std::min(static_cast<int>(fx), nx - 2), j = std::min(static_cast<int>(fy), ny - 2);
  const double s = fx - i, t = fy - j;
  auto lerp = [&](const std::vector<double>& a) {
    auto A = [&](int ii, int jj) { return a[static_cast<std::size_t>(jj) * nx + ii]; };
    return (1 - s) * (1 - t) * A(i, j) + s * (1 - t) * A(i + 1, j) + (1 - s) * t * A(i, j + 1) + s * t * A(i + 1, j + 1);
  };
  return {lerp(gx), lerp(gy)};
}

ScalarField2D solve_eikonal(const EnvironmentSpec& env, const Eigen::Vector2d& target, const GridSpec& grid,
                            double tol) {
  if (env.spatial_dim != 2) throw DomainError("solve_eikonal: 2D environments only");
  if (!(grid.h > 0.0) || grid.nx < 2 || grid.ny < 2) throw DomainError("solve_eikonal: invalid grid");
  if (!point_free(env, target, grid.clearance)) throw DomainError("solve_eikonal: target lies inside an obstacle");

  ScalarField2D F;
  F.x0 = grid.x0;
  F.y0 = grid.y0;
  F.h = grid.h;
  F.nx = grid.nx;
  F.ny = grid.ny;
  const int nx = grid.nx, ny = grid.ny;
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  F.u.assign(n, kInf);
  F.free.assign(n, 1);
  std::vector<double> slow(n, 1.0);
  std::vector<unsigned char> fixed(n, 0);
  Vec w(2);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * nx + i;
      w << F.node_x(i), F.node_y(j);
      if (!point_free(env, w, grid.clearance)) {
        F.free[k] = 0;
        slow[k] = 1.0 / kObstacleSpeed;
      }
      const double r = (w - target).norm();
      if (r <= 1.5 * grid.h && F.free[k]) {
        F.u[k] = r;
        fixed[k] = 1;
      }
    }
  }
  if (std::none_of(fixed.begin(), fixed.end(), [](unsigned char c) { return c != 0; }))
    throw DomainError("solve_eikonal: target outside the grid");

  auto update = [&](int i, int j) -> double {
    const std::size_t k = static_cast<std::size_t>(j) * nx + i;
    if (fixed[k]) return 0.0;
    const double a = std::min(i > 0 ? F.u[k - 1] : kInf, i + 1 < nx ? F.u[k + 1] : kInf);
    const double b = std::min(j > 0 ? F.u[k - nx] : kInf, j + 1 < ny ? F.u[k + nx] : kInf);
    if (std::isinf(a) && std::isinf(b)) return 0.0;
    const double fh = slow[k] * grid.h;
    auto godunov = [](double a, double b, double fh) {
      if (std::abs(a - b) >= fh) return std::min(a, b) + fh;
      return 0.5 * (a + b + std::sqrt(2.0 * fh * fh - (a - b) * (a - b)));
    };
    double cand = godunov(a, b, fh);
    // same update on the 45 degree rotated stencil
    // a diagonal neighbour counts only when both nodes it cuts past are free
    auto D = [&](int di, int dj) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) return kInf;
      if (!F.free[static_cast<std::size_t>(j) * nx + ii] || !F.free[static_cast<std::size_t>(jj) * nx + i]) return kInf;
      return F.u[static_cast<std::size_t>(jj) * nx + ii];
    };
    const double c = std::min(D(-1, -1), D(1, 1));
    const double e = std::min(D(-1, 1), D(1, -1));
    if (!std::isinf(c) || !std::isinf(e)) cand = std::min(cand, godunov(c, e, std::sqrt(2.0) * fh));
    if (cand < F.u[k]) {
      const double change = std::isinf(F.u[k]) ? kInf : F.u[k] - cand;
      F.u[k] = cand;
      return change;
    }
    return 0.0;
  };

  for (;;) {
    double maxchg = 0.0;
    for (int order = 0; order < 4; ++order) {
      const bool fwd_x = order == 0 || order == 3, fwd_y = order < 2;
      for (int jj = 0; jj < ny; ++jj) {
        const int j = fwd_y ? jj : ny - 1 - jj;
        for (int ii = 0; ii < nx; ++ii) {
          const int i = fwd_x ? ii : nx - 1 - ii;
          maxchg = std::max(maxchg, update(i, j));
        }
      }
      ++F.sweeps;
    }
    if (maxchg < tol) break;
  }

  // gradient: central where both neighbours are free, one-sided next to an
  // obstacle or the grid edge
  F.gx.assign(n, 0.0);
  F.gy.assign(n, 0.0);
  auto diff = [&](std::size_t k, bool lo_ok, bool hi_ok, std::ptrdiff_t stride, bool here_free) -> double {
    const std::size_t lo = k - stride, hi = k + stride;
    const bool use_lo = lo_ok && (!here_free || F.free[lo]);
    const bool use_hi = hi_ok && (!here_free || F.free[hi]);
    if (use_lo && use_hi) return (F.u[hi] - F.u[lo]) / (2.0 * grid.h);
    if (use_hi) return (F.u[hi] - F.u[k]) / grid.h;
    if (use_lo) return (F.u[k] - F.u[lo]) / grid.h;
    return 0.0;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * nx + i;
      F.gx[k] = diff(k, i > 0, i + 1 < nx, 1, F.free[k]);
      F.gy[k] = diff(k, j > 0, j + 1 < ny, nx, F.free[k]);
    }
  }
  return F;
}

std::vector<ScalarField2D> agent_fields(const ProblemInstance& inst, double h) {
  if (inst.spatial_dim() != 2) throw DomainError("agent_fields: 2D instances only");
  std::vector<ScalarField2D> out(inst.num_agents());
  parallel_for(inst.num_agents(), [&](int, int i) {
    const GridSpec g = GridSpec::covering(inst.env.domain, h, inst.agents[i].radius);
    out[i] = solve_eikonal(inst.env, inst.xT.block(i, 0, 1, 2).transpose(), g);
  });
  return out;
}

RowMat drift_field(const RowMat& positions, const std::vector<ScalarField2D>& fields, const ProblemInstance& inst,
                   const SdeConfig& cfg) {
  const int N = inst.num_agents();
  if (positions.rows() != N || positions.cols() != 2) throw DomainError("drift_field: positions must be N x 2");
  if (static_cast<int>(fields.size()) != N) throw DomainError("drift_field: one field per agent required");
  RowMat v = RowMat::Zero(N, 2);
  Vec normal;
  for (int i = 0; i < N; ++i) {
    const Eigen::RowVector2d xi = positions.row(i);
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      const Eigen::RowVector2d dij = xi - positions.row(j);
      const double gap = std::max(0.0, dij.norm() - inst.agents[i].radius - inst.agents[j].radius);
      v.row(i) += dij / std::max(cfg.c1 * gap * gap, kDenomFloor);
    }
    for (const auto& ob : inst.env.obstacles) {
      const double gap = std::max(0.0, surface_distance(ob, xi.transpose(), &normal) - inst.agents[i].radius);
      v.row(i) += normal.transpose() / std::max(cfg.c2 * gap * gap * gap, kDenomFloor);
    }
    const Eigen::Vector2d g = fields[i].gradient(xi[0], xi[1]);
    const double gn = g.norm();
    if (gn > 0.0) v.row(i) -= g.transpose() / gn;
  }
  return v;
}

Rollout rollout_sde(const ProblemInstance& inst, const std::vector<ScalarField2D>& fields, const SdeConfig& cfg,
                    std::uint64_t seed) {
  if (!(cfg.dt > 0.0) || cfg.max_steps < 1 || cfg.record_every < 1) throw DomainError("rollout_sde: invalid config");
  const int N = inst.num_agents();
  if (inst.spatial_dim() != 2) throw DomainError("rollout_sde: 2D instances only");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-cfg.metric_noise, cfg.metric_noise);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat G = Mat::Identity(2 * N, 2 * N);
  for (int r = 0; r < 2 * N; ++r)
    for (int c = 0; c < 2 * N; ++c) G(r, c) += unif(rng);

  const RowMat goal = inst.xT.leftCols(2);
  RowMat X = inst.x0.leftCols(2);
  const double tol = 2.0 * fields.front().h;
  std::vector<RowMat> rows{X};
  Rollout out;
  auto arrived = [&] { return ((X - goal).rowwise().norm().array() <= tol).all(); };
  const double sq = cfg.sigma * std::sqrt(cfg.dt);
  for (int s = 0; s < cfg.max_steps && !arrived(); ++s) {
    const RowMat v = drift_field(X, fields, inst, cfg);
    const Vec f = G * Eigen::Map<const Vec>(v.data(), 2 * N);
    for (int k = 0; k < 2 * N; ++k) X.data()[k] += f[k] * cfg.dt + sq * normal(rng);
    ++out.steps;
    if (out.steps % cfg.record_every == 0) rows.push_back(X);
  }
  out.reached = arrived();
  if (out.steps % cfg.record_every != 0) rows.push_back(X);
  out.path.resize(static_cast<Eigen::Index>(rows.size()), 2 * N);
  for (std::size_t r = 0; r < rows.size(); ++r)
    out.path.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(rows[r].data(), 2 * N);
  return out;
}

double detour_ratio(const RowMat& path, int num_agents) {
  if (path.rows() < 1 || path.cols() != 2 * num_agents) throw DomainError("detour_ratio: path shape mismatch");
  double worst = 0.0;
  for (int i = 0; i < num_agents; ++i) {
    double len = 0.0;
    for (Eigen::Index r = 1; r < path.rows(); ++r) len += (path.block(r, 2 * i, 1, 2) - path.block(r - 1, 2 * i, 1, 2)).norm();
    const double direct = (path.block(path.rows() - 1, 2 * i, 1, 2) - path.block(0, 2 * i, 1, 2)).norm();
    worst = std::max(worst, direct > 0.0 ? len / direct : (len > 0.0 ? kInf : 1.0));
  }
  return worst;
}

double path_clearance(const RowMat& path, const ProblemInstance& inst) {
  const int N = inst.num_agents();
  if (path.cols() != 2 * N) throw DomainError("path_clearance: path shape mismatch");
  if (constraint_count(inst) == 0) return kInf;
  double worst = kInf;
  for (Eigen::Index r = 0; r < path.rows(); ++r) {
    const RowMat P = Eigen::Map<const RowMat>(path.row(r).data(), N, 2);
    worst = std::min(worst, constraint_values(inst, P).minCoeff());
  }
  return worst;
}

int select_reference(const std::vector<Rollout>& rollouts, const ProblemInstance& inst) {
  int best = -1;
  double best_c = kInf;
  std::ostringstream diag;
  for (std::size_t k = 0; k < rollouts.size(); ++k) {
    const Rollout& r = rollouts[k];
    if (!r.reached) {
      diag << " trial " << k << ": targets not reached after " << r.steps << " steps;";
      continue;
    }
    const double clr = path_clearance(r.path, inst);
    if (!(clr > 0.0)) {
      diag << " trial " << k << ": collision (clearance " << clr << ");";
      continue;
    }
    const double c = detour_ratio(r.path, inst.num_agents());
    if (c < best_c - 1e-9) {
      best_c = c;
      best = static_cast<int>(k);
    }
  }
  if (best < 0) throw SelectionError("select_reference: no admissible rollout;" + diag.str());
  return best;
}

RowMat rescale_time(const RowMat& path, int num_agents, double horizon, const TimeGrid& grid) {
  if (path.rows() < 1) throw DomainError("rescale_time: empty path");
  if (path.cols() != 2 * num_agents) throw DomainError("rescale_time: path shape mismatch");
  if (!(horizon > 0.0)) throw DomainError("rescale_time: horizon must be positive");
  const Eigen::Index R = path.rows();
  const int Nt = grid.size();
  RowMat out(Nt, 2 * num_agents);
  std::vector<double> cum(R);
  for (int i = 0; i < num_agents; ++i) {
    cum[0] = 0.0;
    for (Eigen::Index r = 1; r < R; ++r)
      cum[r] = cum[r - 1] + (path.block(r, 2 * i, 1, 2) - path.block(r - 1, 2 * i, 1, 2)).norm();
    const double total = cum[R - 1];
    for (int j = 0; j < Nt; ++j) {
      const double tau = std::clamp(grid.times[j] / horizon, 0.0, 1.0);
      if (tau <= 0.0 || total == 0.0) {
        out.block(j, 2 * i, 1, 2) = path.block(0, 2 * i, 1, 2);
        continue;
      }
      if (tau >= 1.0) {
        out.block(j, 2 * i, 1, 2) = path.block(R - 1, 2 * i, 1, 2);
        continue;
      }
      const double s = tau * total;
      const auto it = std::upper_bound(cum.begin(), cum.end(), s);
      const Eigen::Index b = std::min<Eigen::Index>(it - cum.begin(), R - 1);
      const Eigen::Index a = b - 1;
      const double seg = cum[b] - cum[a];
      const double f = seg > 0.0 ? (s - cum[a]) / seg : 0.0;
      out.block(j, 2 * i, 1, 2) = (1.0 - f) * path.block(a, 2 * i, 1, 2) + f * path.block(b, 2 * i, 1, 2);
    }
  }
  return out;
}

ReferenceResult generate_reference(const ProblemInstance& inst, const SdeConfig& cfg, double h, const TimeGrid& grid,
                                   std::uint64_t seed) {
  if (cfg.trials < 1) throw DomainError("generate_reference: need at least one trial");
  const auto fields = agent_fields(inst, h);
  ReferenceResult res;
  res.rollouts.resize(cfg.trials);
  parallel_for(cfg.trials, [&](int, int k) { res.rollouts[k] = rollout_sde(inst, fields, cfg, seed + k); });
  res.selected = select_reference(res.rollouts, inst);
  res.reference = rescale_time(res.rollouts[res.selected].path, inst.num_agents(), inst.horizon, grid);
  return res;
}

CorridorSignature corridor_signature(const RowMat& positions, int num_agents, const std::vector<Obstacle>& obstacles) {
  if (positions.cols() != 2 * num_agents) throw DomainError("corridor_signature: shape mismatch");
  CorridorSignature sig(num_agents);
  for (int i = 0; i < num_agents; ++i) {
    for (Eigen::Index r = 1; r < positions.rows(); ++r) {
      const double xa = positions(r - 1, 2 * i), ya = positions(r - 1, 2 * i + 1);
      const double xb = positions(r, 2 * i), yb = positions(r, 2 * i + 1);
      for (std::size_t k = 0; k < obstacles.size(); ++k) {
        const auto* box = std::get_if<AxisBox>(&obstacles[k]);
        if (box == nullptr || box->min_corner.size() != 2) continue;
        const double wdt = box->max_corner[0] - box->min_corner[0], hgt = box->max_corner[1] - box->min_corner[1];
        if (wdt <= hgt) continue;
        const double yc = 0.5 * (box->min_corner[1] + box->max_corner[1]);
        if ((ya - yc) * (yb - yc) > 0.0 || ya == yb) continue;
        if (yb == yc && r + 1 < positions.rows()) continue;  // counted on the next segment
        const double f = (yc - ya) / (yb - ya);
        const double xc = xa + f * (xb - xa);
        const int side = xc < box->min_corner[0] ? -1 : (xc > box->max_corner[0] ? 1 : 0);
        sig[i].emplace_back(static_cast<int>(k), side);
      }
    }
  }
  return sig;
}

}  // namespace pisonet
