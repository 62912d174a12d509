#include "pisonet/transcription.hpp"

#include "pisonet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pisonet {

namespace {

struct Layout {
  int N, d, M;  // agents, spatial dim, intervals
  double h;
};

// Full (M+3) x N*d position table including ghost rows at both ends.
RowMat assemble(const ProblemInstance& inst, const RowMat& interior, const Layout& L) {
  const int nd = L.N * L.d;
  RowMat W(L.M + 3, nd);
  for (int i = 0; i < L.N; ++i) {
    W.block(1, i * L.d, 1, L.d) = inst.x0.block(i, 0, 1, L.d);
    W.block(L.M + 1, i * L.d, 1, L.d) = inst.xT.block(i, 0, 1, L.d);
  }
  W.block(2, 0, L.M - 1, nd) = interior;
  for (int i = 0; i < L.N; ++i) {
    W.block(0, i * L.d, 1, L.d) = W.block(2, i * L.d, 1, L.d) - 2.0 * L.h * inst.x0.block(i, L.d, 1, L.d);
    W.block(L.M + 2, i * L.d, 1, L.d) = W.block(L.M, i * L.d, 1, L.d) + 2.0 * L.h * inst.xT.block(i, L.d, 1, L.d);
  }
  return W;
}

// Cholesky factor of the Hessian of the drag- and barrier-free objective
// for one coordinate column. Used to whiten the variables: x = L^{-T} z.
Eigen::LLT<Mat> quadratic_factor(const ProblemInstance& inst, const Layout& L) {
  const int n = L.M - 1;
  auto interior_index = [&](int row) {
    if (row >= 2 && row <= L.M) return row - 2;
    if (row == 0) return 0;
    if (row == L.M + 2) return L.M - 2;
    return -1;
  };
  Mat A = Mat::Zero(L.M + 1, n), V = Mat::Zero(L.M + 1, n);
  Vec wq(L.M + 1);
  for (int j = 0; j <= L.M; ++j) {
    wq[j] = (j == 0 || j == L.M) ? 0.5 * L.h : L.h;
    const int r = j + 1;
    const int ip = interior_index(r + 1), i0 = interior_index(r), im = interior_index(r - 1);
    if (ip >= 0) {
      A(j, ip) += 1.0 / (L.h * L.h);
      V(j, ip) += 1.0 / (2.0 * L.h);
    }
    if (i0 >= 0) A(j, i0) -= 2.0 / (L.h * L.h);
    if (im >= 0) {
      A(j, im) += 1.0 / (L.h * L.h);
      V(j, im) -= 1.0 / (2.0 * L.h);
    }
  }
  Mat Q = 2.0 * inst.cost.control_weight * A.transpose() * wq.asDiagonal() * A +
          2.0 * inst.cost.velocity_weight * V.transpose() * wq.asDiagonal() * V;
  Q.diagonal().array() += 1e-12 * Q.diagonal().mean();
  Eigen::LLT<Mat> llt(Q);
  if (llt.info() != Eigen::Success) throw DomainError("solve_transcription: singular quadratic part");
  return llt;
}

}  // namespace

double transcription_objective(const ProblemInstance& inst, const RowMat& interior, double horizon, const BarrierParams& bp,
                               RowMat* grad, double* physical_cost) {
  Layout L{inst.num_agents(), inst.spatial_dim(), static_cast<int>(interior.rows()) + 1, 0.0};
  if (L.M < 2) throw DomainError("transcription: need at least two intervals");
  L.h = horizon / L.M;
  const int nd = L.N * L.d;
  if (interior.cols() != nd) throw DomainError("transcription: interior width must be N*d");
  const RowMat W = assemble(inst, interior, L);
  RowMat GW = RowMat::Zero(L.M + 3, nd);
  const double cv = inst.cost.velocity_weight, cu = inst.cost.control_weight;
  double phys = 0.0, bar = 0.0;
  for (int j = 0; j <= L.M; ++j) {
    const double wq = (j == 0 || j == L.M) ? 0.5 * L.h : L.h;
    const int r = j + 1;
    for (int i = 0; i < L.N; ++i) {
      const int c = i * L.d;
      const Vec wp = W.block(r + 1, c, 1, L.d).transpose();
      const Vec w0 = W.block(r, c, 1, L.d).transpose();
      const Vec wm = W.block(r - 1, c, 1, L.d).transpose();
      const Vec v = (wp - wm) / (2.0 * L.h);
      const Vec a = (wp - 2.0 * w0 + wm) / (L.h * L.h);
      const double k = inst.agents[i].drag_coeff;
      const double s = std::sqrt(v.squaredNorm() + kDragDelta * kDragDelta);
      const Vec u = a + k * s * v;
      phys += wq * (cv * v.squaredNorm() + cu * u.squaredNorm());
      if (grad == nullptr) continue;
      const Vec gu = wq * 2.0 * cu * u;
      Vec gv = wq * 2.0 * cv * v + k * (s * gu + v * (v.dot(gu) / s));
      const Vec ga = gu;
      GW.block(r + 1, c, 1, L.d) += (gv / (2.0 * L.h) + ga / (L.h * L.h)).transpose();
      GW.block(r - 1, c, 1, L.d) += (-gv / (2.0 * L.h) + ga / (L.h * L.h)).transpose();
      GW.block(r, c, 1, L.d) += (-2.0 * ga / (L.h * L.h)).transpose();
    }
    if (constraint_count(inst) > 0) {
      const RowMat P = Eigen::Map<const RowMat>(W.row(r).data(), L.N, L.d);
      bar += wq * barrier(constraint_values(inst, P), bp);
      if (grad != nullptr) GW.row(r) += wq * barrier_position_gradient(inst, P, bp).transpose();
    }
  }
  if (physical_cost != nullptr) *physical_cost = phys;
  if (grad != nullptr) {
    // ghost rows depend on rows 2 and M
    GW.row(2) += GW.row(0);
    GW.row(L.M) += GW.row(L.M + 2);
    *grad = GW.block(2, 0, L.M - 1, nd);
  }
  return phys + bar;
}

RowMat resample_positions(const PhaseTrajectory& traj, int num_agents, int spatial_dim, int intervals) {
  const int Nt = traj.grid.size();
  if (Nt < 2) throw DomainError("resample_positions: need at least two samples");
  const int d = spatial_dim, dx = 2 * d;
  const double T0 = traj.grid.times.front(), T1 = traj.grid.times.back();
  RowMat out(intervals + 1, num_agents * d);
  int seg = 0;
  for (int j = 0; j <= intervals; ++j) {
    const double t = T0 + (T1 - T0) * j / intervals;
    while (seg + 2 < Nt && traj.grid.times[seg + 1] < t) ++seg;
    const double ta = traj.grid.times[seg], tb = traj.grid.times[seg + 1];
    const double s = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
    for (int i = 0; i < num_agents; ++i)
      out.block(j, i * d, 1, d) =
          (1.0 - s) * traj.x.block(seg, i * dx, 1, d) + s * traj.x.block(seg + 1, i * dx, 1, d);
  }
  return out;
}

TranscriptionResult solve_transcription(const ProblemInstance& inst, const TranscriptionOptions& opt, const RowMat& guess) {
  const int N = inst.num_agents(), d = inst.spatial_dim(), M = opt.intervals;
  const int nd = N * d;
  if (M < 2) throw DomainError("solve_transcription: need at least two intervals");
  if (!(opt.decay > 0.0 && opt.decay < 1.0)) throw DomainError("solve_transcription: decay must lie in (0, 1)");
  RowMat interior(M - 1, nd);
  if (guess.size() == 0) {
    for (int j = 1; j < M; ++j) {
      const double s = static_cast<double>(j) / M;
      for (int i = 0; i < N; ++i)
        interior.block(j - 1, i * d, 1, d) = (1.0 - s) * inst.x0.block(i, 0, 1, d) + s * inst.xT.block(i, 0, 1, d);
    }
  } else {
    if (guess.rows() != M + 1 || guess.cols() != nd) throw DomainError("solve_transcription: guess shape mismatch");
    interior = guess.block(1, 0, M - 1, nd);
  }
  TranscriptionResult res;
  BarrierParams bp{opt.eps_start, opt.ell_start};
  // optimise whitened variables z = L^T x
  const Eigen::LLT<Mat> llt = quadratic_factor(inst, Layout{N, d, M, inst.horizon / M});
  const auto Lo = llt.matrixL();
  const auto Up = llt.matrixU();
  auto to_x = [&](const Vec& z) {
    Mat Z = Eigen::Map<const RowMat>(z.data(), M - 1, nd);
    Up.solveInPlace(Z);
    return RowMat(Z);
  };
  Vec x;
  {
    const RowMat Z = Up * Mat(interior);
    x = Eigen::Map<const Vec>(Z.data(), Z.size());
  }
  for (;;) {
    const Objective fn = [&](const Vec& z, Vec& g) {
      RowMat G;
      const double f = transcription_objective(inst, to_x(z), inst.horizon, bp, &G);
      Mat Gz = G;
      Lo.solveInPlace(Gz);
      const RowMat Gr = Gz;
      g = Eigen::Map<const Vec>(Gr.data(), Gr.size());
      return f;
    };
    Lbfgs lbfgs;
    Vec g;
    double f = fn(x, g);
    for (int it = 0; it < opt.iters_per_stage; ++it) {
      if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) break;
      const auto st = lbfgs.step(fn, x, f, g);
      ++res.iterations;
      if (st != Lbfgs::Status::ok) break;
    }
    const bool last = bp.eps <= opt.eps_final && bp.ell <= opt.ell_final;
    if (last) break;
    bp.eps = std::max(opt.eps_final, bp.eps * opt.decay);
    bp.ell = std::max(opt.ell_final, bp.ell * opt.decay);
  }
  interior = to_x(x);
  const double total = transcription_objective(inst, interior, inst.horizon, bp, nullptr, &res.cost);
  res.barrier_cost = total - res.cost;
  Layout L{N, d, M, inst.horizon / M};
  const RowMat W = assemble(inst, interior, L);
  res.grid = TimeGrid::uniform(inst.horizon, M + 1);
  res.positions = W.block(1, 0, M + 1, nd);
  res.velocities.resize(M + 1, nd);
  res.controls.resize(M + 1, nd);
  res.min_clearance = std::numeric_limits<double>::infinity();
  for (int j = 0; j <= M; ++j) {
    const int r = j + 1;
    for (int i = 0; i < N; ++i) {
      const int c = i * d;
      const Vec v = (W.block(r + 1, c, 1, d) - W.block(r - 1, c, 1, d)).transpose() / (2.0 * L.h);
      const Vec a = (W.block(r + 1, c, 1, d) - 2.0 * W.block(r, c, 1, d) + W.block(r - 1, c, 1, d)).transpose() /
                    (L.h * L.h);
      const double s = std::sqrt(v.squaredNorm() + kDragDelta * kDragDelta);
      res.velocities.block(j, c, 1, d) = v.transpose();
      res.controls.block(j, c, 1, d) = (a + inst.agents[i].drag_coeff * s * v).transpose();
    }
    if (constraint_count(inst) > 0) {
      const RowMat P = Eigen::Map<const RowMat>(res.positions.row(j).data(), N, d);
      res.min_clearance = std::min(res.min_clearance, constraint_values(inst, P).minCoeff());
    }
  }
  return res;
}

}  // namespace pisonet
