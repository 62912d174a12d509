#pragma once

// Declarative problem families and deterministic instance sampling.

#include "pisonet/core.hpp"

#include <json.hpp>

#include <optional>
#include <random>

namespace pisonet {

enum class DragLaw { none, constant, inverse_radius };

DragLaw parse_drag_law(const std::string& s);
std::string drag_law_name(DragLaw d);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct FamilySpec {
  std::string name;
  int num_agents = 4;
  int spatial_dim = 2;
  AxisBox domain;
  double layout_radius = 0.5;  // circle used for the antipodal layout
  RowMat nominal_start;        // N x d positions
  RowMat nominal_goal;         // N x d positions
  double perturbation_radius = 0.0;
  double agent_radius = 0.02;
  std::optional<Interval> radius_range;           // per-agent radii sampled when set
  std::vector<Obstacle> obstacles;                // fixed geometry
  std::optional<Interval> obstacle_radius_range;  // radius of obstacle 0 (a circle) sampled when set
  DragLaw drag = DragLaw::none;
  double drag_constant = 0.0;
  double horizon = 10.0;
  CostSpec cost;
  int train_count = 20;
  int test_count = 20;
  std::uint64_t seed = 1234;
};

enum class Split { train, test };

/// Family defaults. overrides is merged as a JSON patch over the defaults.
FamilySpec make_family(const std::string& name, int num_agents, const nlohmann::json& overrides = nlohmann::json::object());

/// Default maze walls; loaded from the shipped data file when present.
std::vector<Obstacle> default_maze_walls();

ProblemInstance sample_instance(const FamilySpec& fam, Split split, int index);
ProblemInstance nominal_instance(const FamilySpec& fam);

/// Length of encode_theta for this family.
int theta_dim(const FamilySpec& fam);

/// Normalised conditioning vector: perturbed initial positions, then the
/// sampled obstacle radius, then sampled agent radii, each mapped to [-1, 1]
/// by the family bounds.
Vec encode_theta(const ProblemInstance& inst, const FamilySpec& fam);

/// Inverse of encode_theta: the family member with the given encoding.
ProblemInstance instance_from_theta(const FamilySpec& fam, const Vec& theta);

/// Drag coefficient of an agent of the given radius under the family law.
double family_drag(const FamilySpec& fam, double radius);

/// Unit-ball-uniform point of dimension d scaled to radius r.
Vec sample_ball(std::mt19937_64& rng, int d, double r);

/// Deterministic 64-bit mix used to derive sub-seeds.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed of the (split, index) stream of a family.
std::uint64_t instance_seed(const FamilySpec& fam, Split split, int index);

}  // namespace pisonet
