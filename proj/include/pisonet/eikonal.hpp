#pragma once

// Reference trajectories for nonconvex 2D environments: a grid Eikonal
// solve per target, a composite drift (repulsion + walls + navigation),
// Euler-Maruyama rollouts, detour-ratio selection and arc-length time
// rescaling.

#include "pisonet/core.hpp"

#include <string>

namespace pisonet {

struct GridSpec {
  double x0 = -1.0;
  double y0 = -1.0;
  double h = 0.005;
  int nx = 401;
  int ny = 401;
  double clearance = 0.0;  // obstacles inflated by this amount

  /// Grid covering an axis box with spacing h.
  static GridSpec covering(const AxisBox& box, double h, double clearance = 0.0);
};

struct ScalarField2D {
  double x0 = 0.0;
  double y0 = 0.0;
  double h = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> u;       // row-major, index j * nx + i
  std::vector<double> gx, gy;  // discrete gradient
  std::vector<unsigned char> free;
  int sweeps = 0;

  double at(int i, int j) const { return u[static_cast<std::size_t>(j) * nx + i]; }
  bool is_free(int i, int j) const { return free[static_cast<std::size_t>(j) * nx + i] != 0; }
  double node_x(int i) const { return x0 + h * i; }
  double node_y(int j) const { return y0 + h * j; }

  /// Bilinear interpolation of u and of the gradient arrays.
  double value(double x, double y) const;
  Eigen::Vector2d gradient(double x, double y) const;
};

struct SdeConfig {
  double sigma = 0.01;
  double dt = 1e-3;
  int trials = 5;
  double c1 = 1.0;
  double c2 = 1.0;
  int max_steps = 20000;
  double metric_noise = 0.01;  // G = I + eta, eta ~ U[-a, a]
  int record_every = 1;
};

/// Free-space speed 1, speed 1e-6 inside inflated obstacles; fast sweeping
/// with Godunov updates on the axis and 45 degree stencils until the max
/// update falls below tol.
ScalarField2D solve_eikonal(const EnvironmentSpec& env, const Eigen::Vector2d& target, const GridSpec& grid,
                            double tol = 1e-8);

/// One navigation field per agent, toward its goal position.
std::vector<ScalarField2D> agent_fields(const ProblemInstance& inst, double h);

/// Composite drift for every agent (N x 2).
RowMat drift_field(const RowMat& positions, const std::vector<ScalarField2D>& fields, const ProblemInstance& inst,
                   const SdeConfig& cfg);

struct Rollout {
  RowMat path;  // steps x N*2
  bool reached = false;
  int steps = 0;
};

Rollout rollout_sde(const ProblemInstance& inst, const std::vector<ScalarField2D>& fields, const SdeConfig& cfg,
                    std::uint64_t seed);

/// max over agents of polyline length / start-goal distance.
double detour_ratio(const RowMat& path, int num_agents);

/// Smallest constraint value over the samples of a path.
double path_clearance(const RowMat& path, const ProblemInstance& inst);

class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index of the admissible rollout with the smallest detour ratio; ties
/// within 1e-9 keep the lower index.
int select_reference(const std::vector<Rollout>& rollouts, const ProblemInstance& inst);

/// Arc-length-uniform reparameterisation of each agent's polyline onto
/// [0, T], sampled at the grid times (Nt x N*2).
RowMat rescale_time(const RowMat& path, int num_agents, double horizon, const TimeGrid& grid);

struct ReferenceResult {
  std::vector<Rollout> rollouts;
  int selected = -1;
  RowMat reference;  // on the requested grid
};

/// Full procedure: fields, cfg.trials rollouts (seeds seed, seed+1, ...),
/// selection and time rescaling.
ReferenceResult generate_reference(const ProblemInstance& inst, const SdeConfig& cfg, double h, const TimeGrid& grid,
                                   std::uint64_t seed);

/// Per agent, the ordered crossings of the centre lines of horizontal band
/// obstacles (axis boxes wider than tall) as (box index, side) with side -1
/// left of the box, +1 right of it, 0 through it. Equal signatures mean the
/// same corridor sequence.
using CorridorSignature = std::vector<std::vector<std::pair<int, int>>>;
CorridorSignature corridor_signature(const RowMat& positions, int num_agents, const std::vector<Obstacle>& obstacles);

}  // namespace pisonet
