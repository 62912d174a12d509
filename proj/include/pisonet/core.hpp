#pragma once

// Shared domain types: agents, environments, problem instances, time grids
// and sampled phase-space trajectories.
//
// Phase vectors are flattened agent-major: agent i owns entries
// [i*dx, (i+1)*dx), positions first (dx/2 entries) then velocities.

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace pisonet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Thrown when an input violates a documented precondition.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentSpec {
  double radius = 0.02;
  double drag_coeff = 0.0;  // k_i
  int state_dim = 4;        // dx: position (+) velocity
  int control_dim = 2;      // du = dx / 2
};

struct Circle {
  Vec center;
  double radius = 0.0;
};

struct AxisBox {
  Vec min_corner;
  Vec max_corner;
};

struct SegmentWall {
  Vec a;
  Vec b;
  double half_width = 0.0;
};

using Obstacle = std::variant<Circle, AxisBox, SegmentWall>;

struct EnvironmentSpec {
  AxisBox domain;
  std::vector<Obstacle> obstacles;
  int spatial_dim = 2;
};

/// Running-cost weights: c_v |v|^2 + c_u |u|^2 per agent.
struct CostSpec {
  double velocity_weight = 1.0;
  double control_weight = 1.0;
};

struct ProblemInstance {
  std::string family_id;
  std::vector<AgentSpec> agents;
  EnvironmentSpec env;
  RowMat x0;  // N x dx
  RowMat xT;  // N x dx
  double horizon = 1.0;
  std::uint64_t seed = 0;
  CostSpec cost;

  int num_agents() const { return static_cast<int>(agents.size()); }
  int spatial_dim() const { return env.spatial_dim; }
  int agent_dim() const { return 2 * env.spatial_dim; }
  int phase_dim() const { return num_agents() * agent_dim(); }

  /// Flattened N*dx initial / terminal phase state.
  Vec initial_state() const;
  Vec terminal_state() const;
};

struct TimeGrid {
  std::vector<double> times;

  static TimeGrid uniform(double horizon, int count);
  int size() const { return static_cast<int>(times.size()); }
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
  /// Grid with `factor`-times more intervals, containing this grid's samples.
  TimeGrid refined(int factor) const;
  bool valid() const;
};

struct PhaseTrajectory {
  TimeGrid grid;
  RowMat x;  // Nt x n
  RowMat p;  // Nt x n
};

struct LatentTrajectory {
  TimeGrid grid;
  RowMat y, q;        // Nt x n
  RowMat ydot, qdot;  // Nt x n

  /// Concatenated latent point (y_j, q_j) of length 2n.
  Vec point(int j) const;
  Vec velocity(int j) const;
};

struct Violation {
  std::string invariant;
  std::vector<int> indices;
  std::string message;
};

/// Empty iff every instance invariant holds.
std::vector<Violation> validate_instance(const ProblemInstance& inst);

/// Positions of all agents at a flattened phase state, as an N x d matrix.
RowMat positions_of(const Vec& x, int num_agents, int spatial_dim);

int obstacle_dim(const Obstacle& ob);

}  // namespace pisonet
