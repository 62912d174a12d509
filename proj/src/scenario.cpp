#include "pisonet/scenario.hpp"

#include "pisonet/io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#ifndef PISONET_DATA_DIR
#define PISONET_DATA_DIR "data"
#endif

namespace pisonet {

DragLaw parse_drag_law(const std::string& s) {
  if (s == "none") return DragLaw::none;
  if (s == "constant") return DragLaw::constant;
  if (s == "inverse_radius") return DragLaw::inverse_radius;
  throw DomainError("unknown drag law '" + s + "'");
}

std::string drag_law_name(DragLaw d) {
  switch (d) {
    case DragLaw::none: return "none";
    case DragLaw::constant: return "constant";
    case DragLaw::inverse_radius: return "inverse_radius";
  }
  return "none";
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t instance_seed(const FamilySpec& fam, Split split, int index) {
  std::uint64_t s = fam.seed;
  std::uint64_t a = splitmix64(s);
  s = a ^ (split == Split::train ? 0x747261696EULL : 0x74657374ULL);
  std::uint64_t b = splitmix64(s);
  s = b ^ static_cast<std::uint64_t>(index);
  return splitmix64(s);
}

Vec sample_ball(std::mt19937_64& rng, int d, double r) {
  std::normal_distribution<double> G(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vec g(d);
  double nrm = 0.0;
  do {
    for (int k = 0; k < d; ++k) g[k] = G(rng);
    nrm = g.norm();
  } while (nrm == 0.0);
  return g * (r * std::pow(U(rng), 1.0 / d) / nrm);
}

double family_drag(const FamilySpec& fam, double radius) {
  switch (fam.drag) {
    case DragLaw::none: return 0.0;
    case DragLaw::constant: return fam.drag_constant;
    case DragLaw::inverse_radius: return 1.0 / (50.0 * radius);
  }
  return 0.0;
}

namespace {

AxisBox make_box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  AxisBox b;
  b.min_corner = Eigen::Map<const Vec>(lo.begin(), static_cast<Eigen::Index>(lo.size()));
  b.max_corner = Eigen::Map<const Vec>(hi.begin(), static_cast<Eigen::Index>(hi.size()));
  return b;
}

Circle make_circle(double x, double y, double r) {
  Circle c;
  c.center = Eigen::Vector2d(x, y);
  c.radius = r;
  return c;
}

void antipodal_layout(FamilySpec& f) {
  const int N = f.num_agents;
  f.nominal_start.resize(N, 2);
  f.nominal_goal.resize(N, 2);
  for (int i = 0; i < N; ++i) {
    const double th = 2.0 * std::numbers::pi * i / N;
    f.nominal_start(i, 0) = f.layout_radius * std::cos(th);
    f.nominal_start(i, 1) = f.layout_radius * std::sin(th);
  }
  f.nominal_goal = -f.nominal_start;
}

struct MazeData {
  std::vector<Obstacle> walls;
  double start_y = -0.7;
  double goal_y = 0.7;
};

MazeData load_maze() {
  MazeData m;
  std::ifstream in(std::string(PISONET_DATA_DIR) + "/maze.json");
  if (in) {
    const auto j = nlohmann::json::parse(in);
    for (const auto& w : j.at("walls")) m.walls.push_back(w.get<Obstacle>());
    m.start_y = j.value("start_y", m.start_y);
    m.goal_y = j.value("goal_y", m.goal_y);
    return m;
  }
  m.walls.push_back(make_box({-1.0, -0.4}, {0.5, -0.3}));
  m.walls.push_back(make_box({-0.5, 0.3}, {1.0, 0.4}));
  return m;
}

void maze_layout(FamilySpec& f, const MazeData& m) {
  const int N = f.num_agents;
  const int per_row = std::min(N, 4);
  const int rows = (N + per_row - 1) / per_row;
  f.nominal_start.resize(N, 2);
  f.nominal_goal.resize(N, 2);
  for (int i = 0; i < N; ++i) {
    const int r = i / per_row, c = i % per_row;
    f.nominal_start(i, 0) = -0.8 + 0.2 * c;
    f.nominal_start(i, 1) = m.start_y - 0.15 * r + 0.075 * (rows - 1);
    f.nominal_goal(i, 0) = 0.2 + 0.2 * c;
    f.nominal_goal(i, 1) = m.goal_y + 0.15 * r - 0.075 * (rows - 1);
  }
}

void grid3d_layout(FamilySpec& f) {
  const int N = f.num_agents;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(N))));
  const int rows = (N + cols - 1) / cols;
  f.nominal_start.resize(N, 3);
  f.nominal_goal.resize(N, 3);
  for (int i = 0; i < N; ++i) {
    const int r = i / cols, c = i % cols;
    const double x = cols > 1 ? -3.0 + 8.0 * c / (cols - 1) : 1.0;
    const double z = rows > 1 ? 1.0 + 6.0 * r / (rows - 1) : 4.0;
    f.nominal_start.row(i) << x, -3.0, z;
    f.nominal_goal.row(i) << x, 3.0, z;
  }
}

}  // namespace

std::vector<Obstacle> default_maze_walls() { return load_maze().walls; }

FamilySpec make_family(const std::string& name, int num_agents, const nlohmann::json& overrides) {
  if (num_agents < 1) throw DomainError("make_family: need at least one agent");
  FamilySpec f;
  f.name = name;
  f.num_agents = num_agents;
  f.spatial_dim = 2;
  f.domain = make_box({-1.0, -1.0}, {1.0, 1.0});
  f.drag = DragLaw::inverse_radius;
  f.horizon = 10.0;
  const int N = num_agents;
  if (name == "free") {
    f.agent_radius = N >= 32 ? 0.016 : 0.02;
    f.perturbation_radius = N >= 64 ? 0.025 : (N >= 56 ? 0.04 : 0.05);
    antipodal_layout(f);
  } else if (name == "obstacle") {
    f.agent_radius = N >= 56 ? 0.016 : 0.02;
    f.perturbation_radius = N <= 8 ? 0.10 : (N <= 16 ? 0.05 : 0.025);
    f.obstacles.push_back(make_circle(0.0, 0.0, 0.15));
    antipodal_layout(f);
  } else if (name == "variable_radius_obstacle") {
    f.agent_radius = 0.02;
    f.perturbation_radius = 0.0;
    f.obstacles.push_back(make_circle(0.0, 0.0, 0.15));
    f.obstacle_radius_range = Interval{0.05, 0.25};
    antipodal_layout(f);
  } else if (name == "heterogeneous_2d") {
    f.agent_radius = 0.02;
    f.perturbation_radius = 0.0;
    f.radius_range = N <= 4 ? Interval{0.01, 0.10} : Interval{0.01, 0.05};
    f.obstacles.push_back(make_circle(0.0, 0.0, 0.15));
    antipodal_layout(f);
  } else if (name == "heterogeneous_3d") {
    f.spatial_dim = 3;
    f.domain = make_box({-5.0, -5.0, -1.0}, {7.0, 5.0, 9.0});
    f.agent_radius = 0.15;
    f.perturbation_radius = 0.0;
    f.radius_range = Interval{0.1, 0.2};
    f.obstacles.push_back(make_box({-2.0, -0.5, 0.0}, {2.0, 0.5, 7.0}));
    f.obstacles.push_back(make_box({2.0, -1.0, 0.0}, {4.0, 1.0, 4.0}));
    f.drag = DragLaw::none;
    f.cost.velocity_weight = 0.0;
    f.cost.control_weight = 0.5;
    grid3d_layout(f);
  } else if (name == "maze") {
    if (N > 8) throw DomainError("make_family: maze layout supports at most 8 agents");
    f.agent_radius = 0.02;
    f.perturbation_radius = 0.05;
    const MazeData m = load_maze();
    f.obstacles = m.walls;
    maze_layout(f, m);
  } else {
    throw DomainError("make_family: unknown family '" + name + "'");
  }
  if (!overrides.is_null() && !overrides.empty()) {
    nlohmann::json j = f;
    j.merge_patch(overrides);
    f = j.get<FamilySpec>();
  }
  return f;
}

int theta_dim(const FamilySpec& fam) {
  int d = 0;
  if (fam.perturbation_radius > 0.0) d += fam.num_agents * fam.spatial_dim;
  if (fam.obstacle_radius_range) d += 1;
  if (fam.radius_range) d += fam.num_agents;
  return d;
}

namespace {

double to_unit(double v, const Interval& r) { return r.hi > r.lo ? (2.0 * v - r.lo - r.hi) / (r.hi - r.lo) : 0.0; }
double from_unit(double u, const Interval& r) { return 0.5 * (r.lo + r.hi) + 0.5 * u * (r.hi - r.lo); }

void check_member(const ProblemInstance& inst, const FamilySpec& fam) {
  if (inst.family_id != fam.name || inst.num_agents() != fam.num_agents || inst.spatial_dim() != fam.spatial_dim)
    throw DomainError("instance does not belong to family '" + fam.name + "'");
  if (fam.obstacle_radius_range) {
    if (inst.env.obstacles.empty() || !std::holds_alternative<Circle>(inst.env.obstacles[0]))
      throw DomainError("instance lacks the family's variable circular obstacle");
  }
}

ProblemInstance base_instance(const FamilySpec& fam) {
  const int N = fam.num_agents, d = fam.spatial_dim;
  ProblemInstance inst;
  inst.family_id = fam.name;
  inst.env.domain = fam.domain;
  inst.env.obstacles = fam.obstacles;
  inst.env.spatial_dim = d;
  inst.horizon = fam.horizon;
  inst.cost = fam.cost;
  inst.seed = fam.seed;
  for (int i = 0; i < N; ++i) {
    AgentSpec a;
    a.radius = fam.agent_radius;
    a.drag_coeff = family_drag(fam, a.radius);
    a.state_dim = 2 * d;
    a.control_dim = d;
    inst.agents.push_back(a);
  }
  inst.x0 = RowMat::Zero(N, 2 * d);
  inst.xT = RowMat::Zero(N, 2 * d);
  inst.x0.leftCols(d) = fam.nominal_start;
  inst.xT.leftCols(d) = fam.nominal_goal;
  return inst;
}

void set_radii(ProblemInstance& inst, const FamilySpec& fam, const std::vector<double>& r) {
  for (std::size_t i = 0; i < r.size(); ++i) {
    inst.agents[i].radius = r[i];
    inst.agents[i].drag_coeff = family_drag(fam, r[i]);
  }
}

}  // namespace

ProblemInstance nominal_instance(const FamilySpec& fam) {
  ProblemInstance inst = base_instance(fam);
  if (fam.obstacle_radius_range)
    std::get<Circle>(inst.env.obstacles.at(0)).radius = 0.5 * (fam.obstacle_radius_range->lo + fam.obstacle_radius_range->hi);
  if (fam.radius_range)
    set_radii(inst, fam, std::vector<double>(fam.num_agents, 0.5 * (fam.radius_range->lo + fam.radius_range->hi)));
  return inst;
}

ProblemInstance sample_instance(const FamilySpec& fam, Split split, int index) {
  const int count = split == Split::train ? fam.train_count : fam.test_count;
  if (index < 0 || index >= count) throw DomainError("sample_instance: index out of range for split");
  std::mt19937_64 rng(instance_seed(fam, split, index));
  const int N = fam.num_agents, d = fam.spatial_dim;
  for (int attempt = 0; attempt < 100; ++attempt) {
    ProblemInstance inst = base_instance(fam);
    inst.seed = instance_seed(fam, split, index);
    if (fam.perturbation_radius > 0.0)
      for (int i = 0; i < N; ++i) inst.x0.row(i).head(d) += sample_ball(rng, d, fam.perturbation_radius).transpose();
    if (fam.obstacle_radius_range) {
      std::uniform_real_distribution<double> U(fam.obstacle_radius_range->lo, fam.obstacle_radius_range->hi);
      std::get<Circle>(inst.env.obstacles.at(0)).radius = U(rng);
    }
    if (fam.radius_range) {
      std::uniform_real_distribution<double> U(fam.radius_range->lo, fam.radius_range->hi);
      std::vector<double> r(N);
      for (auto& v : r) v = U(rng);
      set_radii(inst, fam, r);
    }
    if (validate_instance(inst).empty()) return inst;
  }
  throw DomainError("sample_instance: rejection budget exhausted for family '" + fam.name + "'");
}

Vec encode_theta(const ProblemInstance& inst, const FamilySpec& fam) {
  check_member(inst, fam);
  const int N = fam.num_agents, d = fam.spatial_dim;
  Vec th(theta_dim(fam));
  int c = 0;
  if (fam.perturbation_radius > 0.0)
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < d; ++k) th[c++] = (inst.x0(i, k) - fam.nominal_start(i, k)) / fam.perturbation_radius;
  if (fam.obstacle_radius_range) th[c++] = to_unit(std::get<Circle>(inst.env.obstacles[0]).radius, *fam.obstacle_radius_range);
  if (fam.radius_range)
    for (int i = 0; i < N; ++i) th[c++] = to_unit(inst.agents[i].radius, *fam.radius_range);
  return th;
}

ProblemInstance instance_from_theta(const FamilySpec& fam, const Vec& theta) {
  if (theta.size() != theta_dim(fam)) throw DomainError("instance_from_theta: theta length mismatch");
  const int N = fam.num_agents, d = fam.spatial_dim;
  ProblemInstance inst = base_instance(fam);
  int c = 0;
  if (fam.perturbation_radius > 0.0)
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < d; ++k) inst.x0(i, k) = fam.nominal_start(i, k) + theta[c++] * fam.perturbation_radius;
  if (fam.obstacle_radius_range)
    std::get<Circle>(inst.env.obstacles.at(0)).radius = from_unit(theta[c++], *fam.obstacle_radius_range);
  if (fam.radius_range) {
    std::vector<double> r(N);
    for (auto& v : r) v = from_unit(theta[c++], *fam.radius_range);
    set_radii(inst, fam, r);
  }
  return inst;
}

}  // namespace pisonet
