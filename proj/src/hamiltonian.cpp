#include "pisonet/hamiltonian.hpp"

#include "pisonet/dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pisonet {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

using pisonet::logistic;

Dual logistic(const Dual& x) {
  const double s = pisonet::logistic(x.v);
  return {s, s * (1.0 - s) * x.d};
}

using std::sqrt;

template <class S>
S norm_of(const S* d, int dim) {
  S acc = 0.0;
  for (int k = 0; k < dim; ++k) acc += d[k] * d[k];
  return sqrt(acc);
}

// Distance from point w to an obstacle surface (signed for boxes) and its
// gradient w.r.t. w, written into grad[0..dim).
template <class S>
S obstacle_distance(const Obstacle& ob, const S* w, int dim, S* grad) {
  S diff[3];
  return std::visit(
      [&](const auto& o) -> S {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, Circle>) {
          for (int k = 0; k < dim; ++k) diff[k] = w[k] - o.center[k];
          const S r = norm_of(diff, dim);
          for (int k = 0; k < dim; ++k) grad[k] = value_of(r) > 0.0 ? diff[k] / r : S(0.0);
          return r - o.radius;
        } else if constexpr (std::is_same_v<T, AxisBox>) {
          // q_k = |w_k - c_k| - half_k
          S q[3] = {};
          double sgn[3] = {};
          for (int k = 0; k < dim; ++k) {
            const double c = 0.5 * (o.min_corner[k] + o.max_corner[k]);
            const double half = 0.5 * (o.max_corner[k] - o.min_corner[k]);
            const S rel = w[k] - c;
            sgn[k] = value_of(rel) >= 0.0 ? 1.0 : -1.0;
            q[k] = (value_of(rel) >= 0.0 ? rel : -rel) - half;
          }
          bool outside = false;
          for (int k = 0; k < dim; ++k) outside = outside || value_of(q[k]) > 0.0;
          if (outside) {
            for (int k = 0; k < dim; ++k) diff[k] = value_of(q[k]) > 0.0 ? q[k] : S(0.0);
            const S r = norm_of(diff, dim);
            for (int k = 0; k < dim; ++k) grad[k] = sgn[k] * diff[k] / r;
            return r;
          }
          int best = 0;
          for (int k = 1; k < dim; ++k)
            if (value_of(q[k]) > value_of(q[best])) best = k;
          for (int k = 0; k < dim; ++k) grad[k] = k == best ? S(sgn[k]) : S(0.0);
          return q[best];
        } else {
          double ab2 = 0.0;
          for (int k = 0; k < dim; ++k) ab2 += (o.b[k] - o.a[k]) * (o.b[k] - o.a[k]);
          S t = 0.0;
          if (ab2 > 0.0) {
            for (int k = 0; k < dim; ++k) t += (w[k] - o.a[k]) * (o.b[k] - o.a[k]);
            t = t / ab2;
            if (value_of(t) < 0.0) t = 0.0;
            if (value_of(t) > 1.0) t = 1.0;
          }
          for (int k = 0; k < dim; ++k) diff[k] = w[k] - (o.a[k] + t * (o.b[k] - o.a[k]));
          const S r = norm_of(diff, dim);
          for (int k = 0; k < dim; ++k) grad[k] = value_of(r) > 0.0 ? diff[k] / r : S(0.0);
          return r - o.half_width;
        }
      },
      ob);
}

// Accumulates d(-U)/dw into gw (flattened N x d). Positions read from the
// phase vector x with stride 2d.
template <class S>
void barrier_force(const ProblemInstance& inst, const S* x, const BarrierParams& bp, S* gw) {
  const int N = inst.num_agents();
  const int d = inst.spatial_dim();
  const int stride = 2 * d;
  const double inv_eps = 1.0 / bp.eps;
  S diff[3], grad[3];
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      for (int k = 0; k < d; ++k) diff[k] = x[i * stride + k] - x[j * stride + k];
      const S r = norm_of(diff, d);
      if (!(value_of(r) > 0.0)) continue;
      const S h = r - (inst.agents[i].radius + inst.agents[j].radius);
      const S wgt = inv_eps * logistic(-h / bp.ell) / r;
      for (int k = 0; k < d; ++k) {
        gw[i * d + k] += wgt * diff[k];
        gw[j * d + k] -= wgt * diff[k];
      }
    }
  }
  for (int i = 0; i < N; ++i) {
    for (const auto& ob : inst.env.obstacles) {
      const S h = obstacle_distance(ob, x + i * stride, d, grad) - inst.agents[i].radius;
      const S wgt = inv_eps * logistic(-h / bp.ell);
      for (int k = 0; k < d; ++k) gw[i * d + k] += wgt * grad[k];
    }
  }
}

template <class S>
void grads_impl(const ProblemInstance& inst, const S* x, const S* p, const BarrierParams& bp, S* gx, S* gp) {
  const int N = inst.num_agents();
  const int d = inst.spatial_dim();
  const int stride = 2 * d;
  const double cv = inst.cost.velocity_weight;
  const double cu = inst.cost.control_weight;
  for (int i = 0; i < N; ++i) {
    const int o = i * stride;
    const double kd = inst.agents[i].drag_coeff;
    const S* v = x + o + d;
    const S* pw = p + o;
    const S* pv = p + o + d;
    S vv = kDragDelta * kDragDelta, vp = 0.0;
    for (int k = 0; k < d; ++k) {
      vv += v[k] * v[k];
      vp += v[k] * pv[k];
    }
    const S s = sqrt(vv);
    for (int k = 0; k < d; ++k) {
      gp[o + k] = v[k];
      gp[o + d + k] = -kd * s * v[k] + pv[k] / (2.0 * cu);
      gx[o + k] = 0.0;
      gx[o + d + k] = pw[k] - kd * (s * pv[k] + v[k] * vp / s) - 2.0 * cv * v[k];
    }
  }
  std::vector<S> gw(static_cast<std::size_t>(N * d), S(0.0));
  barrier_force(inst, x, bp, gw.data());
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < d; ++k) gx[i * stride + k] += gw[i * d + k];
}

void check_shapes(const ProblemInstance& inst, const Vec& x, const Vec& p) {
  if (x.size() != inst.phase_dim() || p.size() != inst.phase_dim())
    throw DomainError("hamiltonian: phase vector size does not match instance");
}

}  // namespace

Vec dynamics_drift(const ProblemInstance& inst, int agent, const Vec& xi) {
  const int d = inst.spatial_dim();
  if (agent < 0 || agent >= inst.num_agents()) throw DomainError("dynamics_drift: agent index out of range");
  if (xi.size() != 2 * d) throw DomainError("dynamics_drift: state size mismatch");
  const Vec v = xi.tail(d);
  const double s = std::sqrt(v.squaredNorm() + kDragDelta * kDragDelta);
  Vec f(2 * d);
  f.head(d) = v;
  f.tail(d) = -inst.agents[agent].drag_coeff * s * v;
  return f;
}

int constraint_count(const ProblemInstance& inst) {
  const int N = inst.num_agents();
  return N * (N - 1) / 2 + N * static_cast<int>(inst.env.obstacles.size());
}

Vec constraint_values(const ProblemInstance& inst, const RowMat& positions) {
  const int N = inst.num_agents();
  const int d = inst.spatial_dim();
  if (positions.rows() != N || positions.cols() != d) throw DomainError("constraint_values: positions must be N x d");
  Vec h(constraint_count(inst));
  int c = 0;
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j)
      h[c++] = (positions.row(i) - positions.row(j)).norm() - (inst.agents[i].radius + inst.agents[j].radius);
  double grad[3];
  for (int i = 0; i < N; ++i) {
    for (const auto& ob : inst.env.obstacles) {
      h[c++] = obstacle_distance<double>(ob, positions.row(i).data(), d, grad) - inst.agents[i].radius;
    }
  }
  return h;
}

double barrier(const Vec& h, const BarrierParams& bp) {
  if (!(bp.eps > 0.0) || !(bp.ell > 0.0)) throw DomainError("barrier: eps and ell must be positive");
  double acc = 0.0;
  for (int k = 0; k < h.size(); ++k) acc += bp.ell * softplus(-h[k] / bp.ell);
  return acc / bp.eps;
}

Vec conjugate_control(const ProblemInstance& inst, int agent, const Vec& pi) {
  const int d = inst.spatial_dim();
  if (agent < 0 || agent >= inst.num_agents()) throw DomainError("conjugate_control: agent index out of range");
  if (!(inst.cost.control_weight > 0.0)) throw DomainError("conjugate_control: control weight must be positive");
  return pi.tail(d) / (2.0 * inst.cost.control_weight);
}

double hamiltonian_value(const ProblemInstance& inst, const Vec& x, const Vec& p, const BarrierParams& bp) {
  check_shapes(inst, x, p);
  const int N = inst.num_agents();
  const int d = inst.spatial_dim();
  const double cv = inst.cost.velocity_weight;
  const double cu = inst.cost.control_weight;
  double H = 0.0;
  for (int i = 0; i < N; ++i) {
    const int o = 2 * d * i;
    const auto v = x.segment(o + d, d);
    const auto pw = p.segment(o, d);
    const auto pv = p.segment(o + d, d);
    const double s = std::sqrt(v.squaredNorm() + kDragDelta * kDragDelta);
    H += pw.dot(v) - inst.agents[i].drag_coeff * s * pv.dot(v) - cv * v.squaredNorm() + pv.squaredNorm() / (4.0 * cu);
  }
  if (constraint_count(inst) > 0) H -= barrier(constraint_values(inst, positions_of(x, N, d)), bp);
  return H;
}

PhaseGradient hamiltonian_grads(const ProblemInstance& inst, const Vec& x, const Vec& p, const BarrierParams& bp) {
  check_shapes(inst, x, p);
  PhaseGradient g{Vec(x.size()), Vec(p.size())};
  grads_impl<double>(inst, x.data(), p.data(), bp, g.dx.data(), g.dp.data());
  return g;
}

PhaseGradient hamiltonian_hvp(const ProblemInstance& inst, const Vec& x, const Vec& p, const BarrierParams& bp,
                              const Vec& dir_x, const Vec& dir_p) {
  check_shapes(inst, x, p);
  check_shapes(inst, dir_x, dir_p);
  const auto n = x.size();
  std::vector<Dual> xd(n), pd(n), gx(n), gp(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    xd[k] = {x[k], dir_x[k]};
    pd[k] = {p[k], dir_p[k]};
  }
  grads_impl<Dual>(inst, xd.data(), pd.data(), bp, gx.data(), gp.data());
  PhaseGradient out{Vec(n), Vec(n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.dx[k] = gx[k].d;
    out.dp[k] = gp[k].d;
  }
  return out;
}

double surface_distance(const Obstacle& ob, const Vec& w, Vec* normal) {
  const int d = static_cast<int>(w.size());
  if (d != obstacle_dim(ob)) throw DomainError("surface_distance: dimension mismatch");
  double grad[3] = {};
  const double r = obstacle_distance<double>(ob, w.data(), d, grad);
  if (normal != nullptr) *normal = Eigen::Map<const Vec>(grad, d);
  return r;
}

double min_constraint(const ProblemInstance& inst, const Vec& x) {
  if (constraint_count(inst) == 0) return std::numeric_limits<double>::infinity();
  return constraint_values(inst, positions_of(x, inst.num_agents(), inst.spatial_dim())).minCoeff();
}

Vec barrier_position_gradient(const ProblemInstance& inst, const RowMat& positions, const BarrierParams& bp) {
  const int N = inst.num_agents();
  const int d = inst.spatial_dim();
  Vec x = Vec::Zero(inst.phase_dim());
  for (int i = 0; i < N; ++i) x.segment(2 * d * i, d) = positions.row(i).transpose();
  Vec gw = Vec::Zero(N * d);
  barrier_force<double>(inst, x.data(), bp, gw.data());
  return -gw;
}

}  // namespace pisonet
