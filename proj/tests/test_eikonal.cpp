#include "fixtures.hpp"

#include "pisonet/eikonal.hpp"
#include "pisonet/hamiltonian.hpp"

#include <doctest.h>

#include <cmath>

using namespace pisonet;

namespace {

EnvironmentSpec unit_square() {
  EnvironmentSpec env;
  env.domain = {Eigen::Vector2d(-1.0, -1.0), Eigen::Vector2d(1.0, 1.0)};
  return env;
}

EnvironmentSpec walled() {
  auto env = unit_square();
  env.obstacles.push_back(AxisBox{Eigen::Vector2d(-0.05, -0.5), Eigen::Vector2d(0.05, 0.5)});
  return env;
}

ProblemInstance planar(int N, const EnvironmentSpec& env) {
  auto inst = fixture::free_agent(2, Eigen::Vector2d(-0.5, 0.0), Eigen::Vector2d(0.5, 0.0), 1.0, 0.0, 1.0);
  inst.env = env;
  inst.agents.assign(N, inst.agents[0]);
  inst.x0 = RowMat::Zero(N, 4);
  inst.xT = RowMat::Zero(N, 4);
  return inst;
}

double polyline_length(const RowMat& path, int col) {
  double s = 0.0;
  for (Eigen::Index r = 1; r < path.rows(); ++r) s += (path.block(r, col, 1, 2) - path.block(r - 1, col, 1, 2)).norm();
  return s;
}

Rollout straight(const Eigen::Vector2d& a, const Eigen::Vector2d& mid, const Eigen::Vector2d& b) {
  Rollout r;
  r.reached = true;
  r.path.resize(3, 2);
  r.path.row(0) = a.transpose();
  r.path.row(1) = mid.transpose();
  r.path.row(2) = b.transpose();
  return r;
}

}  // namespace

TEST_CASE("free-space field is the euclidean distance") {
  const double h = 0.02;
  const auto F = solve_eikonal(unit_square(), Eigen::Vector2d(0.1, -0.2), GridSpec::covering(unit_square().domain, h));
  CHECK(F.nx == 101);
  double worst = 0.0;
  for (int j = 0; j < F.ny; ++j)
    for (int i = 0; i < F.nx; ++i) worst = std::max(worst, std::abs(F.at(i, j) - std::hypot(F.node_x(i) - 0.1, F.node_y(j) + 0.2)));
  CHECK(worst < 2 * h);
  CHECK(std::abs(F.value(0.1, -0.2)) < 1e-12);
}

TEST_CASE("field behind a wall is the geodesic around it") {
  const double h = 0.01;
  const auto F = solve_eikonal(walled(), Eigen::Vector2d(0.5, 0.0), GridSpec::covering(unit_square().domain, h));
  const double geodesic = 2.0 * std::hypot(0.45, 0.5) + 0.1;
  CHECK(std::abs(F.value(-0.5, 0.0) - geodesic) < 3 * h);
  CHECK(F.value(0.0, 0.0) > 1e3);
}

TEST_CASE("discrete gradient has unit norm in free space") {
  const double h = 0.01;
  for (const auto& env : {unit_square(), walled()}) {
    const auto F = solve_eikonal(env, Eigen::Vector2d(0.5, 0.0), GridSpec::covering(env.domain, h));
    int bad = 0, total = 0;
    for (int j = 2; j < F.ny - 2; ++j)
      for (int i = 2; i < F.nx - 2; ++i) {
        const double x = F.node_x(i), y = F.node_y(j);
        if (std::hypot(x - 0.5, y) < 5 * h || std::abs(y) < 5 * h) continue;
        bool near_wall = false;
        for (const auto& ob : env.obstacles) near_wall = near_wall || surface_distance(ob, Eigen::Vector2d(x, y)) < 3 * h;
        if (near_wall) continue;
        const std::size_t k = static_cast<std::size_t>(j) * F.nx + i;
        ++total;
        if (std::abs(std::hypot(F.gx[k], F.gy[k]) - 1.0) > 0.05) ++bad;
      }
    CHECK(total > 1000);
    CHECK(bad == 0);
  }
}

TEST_CASE("solver rejects a target inside an obstacle or off grid") {
  const auto grid = GridSpec::covering(unit_square().domain, 0.05);
  CHECK_THROWS_AS(solve_eikonal(walled(), Eigen::Vector2d(0.0, 0.0), grid), DomainError);
  CHECK_THROWS_AS(solve_eikonal(walled(), Eigen::Vector2d(3.0, 0.0), grid), DomainError);
  CHECK_THROWS_AS(GridSpec::covering(unit_square().domain, 0.0), DomainError);
}

TEST_CASE("drift examples") {
  const auto env = unit_square();
  const double h = 0.02;
  SdeConfig cfg;

  SUBCASE("single agent follows the navigation field") {
    auto inst = planar(1, env);
    inst.xT(0, 0) = 0.5;
    const std::vector<ScalarField2D> F{solve_eikonal(env, Eigen::Vector2d(0.5, 0.0), GridSpec::covering(env.domain, h))};
    RowMat P(1, 2);
    P << -0.3, 0.4;
    const RowMat v = drift_field(P, F, inst, cfg);
    const Eigen::RowVector2d expect = Eigen::RowVector2d(0.8, -0.4).normalized();
    CHECK((v - expect).norm() < 0.02);
  }

  SUBCASE("repulsion pushes approaching agents apart") {
    auto inst = planar(2, env);
    ScalarField2D flat = solve_eikonal(env, Eigen::Vector2d(0.0, 0.0), GridSpec::covering(env.domain, 0.5));
    std::fill(flat.gx.begin(), flat.gx.end(), 0.0);
    std::fill(flat.gy.begin(), flat.gy.end(), 0.0);
    const std::vector<ScalarField2D> F{flat, flat};
    RowMat P(2, 2);
    P << 0.0, 0.0, 0.2, 0.1;
    const RowMat v = drift_field(P, F, inst, cfg);
    const Eigen::RowVector2d d = P.row(0) - P.row(1);
    CHECK(v.row(0).dot(d) > 0.0);
    CHECK(v.row(1).dot(-d) > 0.0);
    const double gap = d.norm() - 0.1;
    CHECK(v.row(0).norm() == doctest::Approx(d.norm() / (gap * gap)));
  }

  SUBCASE("wall term magnitude and direction") {
    auto e2 = env;
    const double hw = 0.03;
    e2.obstacles.push_back(SegmentWall{Eigen::Vector2d(-0.5, 0.0), Eigen::Vector2d(0.5, 0.0), hw});
    auto inst = planar(1, e2);
    const double r = inst.agents[0].radius;
    ScalarField2D flat = solve_eikonal(env, Eigen::Vector2d(0.0, 0.9), GridSpec::covering(env.domain, 0.5));
    std::fill(flat.gx.begin(), flat.gx.end(), 0.0);
    std::fill(flat.gy.begin(), flat.gy.end(), 0.0);
    RowMat P(1, 2);
    P << 0.1, 2.0 * (r + hw);
    const RowMat v = drift_field(P, {flat}, inst, cfg);
    CHECK(v(0, 0) == doctest::Approx(0.0));
    CHECK(v(0, 1) == doctest::Approx(1.0 / std::pow(r + hw, 3)));
  }
}

TEST_CASE("noise-free rollout in free space goes straight to the goal") {
  const auto env = unit_square();
  auto inst = planar(1, env);
  inst.x0.row(0).head(2) << -0.5, -0.3;
  inst.xT.row(0).head(2) << 0.5, 0.2;
  const double h = 0.01;
  const auto F = agent_fields(inst, h);
  SdeConfig cfg;
  cfg.sigma = 0.0;
  cfg.metric_noise = 0.0;
  const auto r = rollout_sde(inst, F, cfg, 1);
  CHECK(r.reached);
  CHECK(detour_ratio(r.path, 1) < 1.01);
  const auto r2 = rollout_sde(inst, F, cfg, 1);
  CHECK(r.path == r2.path);
}

TEST_CASE("stochastic rollouts are seed deterministic") {
  auto inst = planar(2, unit_square());
  inst.x0.row(0).head(2) << -0.5, 0.0;
  inst.xT.row(0).head(2) << 0.5, 0.0;
  inst.x0.row(1).head(2) << 0.5, 0.05;
  inst.xT.row(1).head(2) << -0.5, 0.05;
  const auto F = agent_fields(inst, 0.02);
  SdeConfig cfg;
  cfg.c1 = 1000;
  cfg.max_steps = 3000;
  const auto a = rollout_sde(inst, F, cfg, 5), b = rollout_sde(inst, F, cfg, 5), c = rollout_sde(inst, F, cfg, 6);
  CHECK(a.path == b.path);
  CHECK(a.path != c.path);
}

TEST_CASE("reference selection") {
  auto inst = planar(1, unit_square());
  const Eigen::Vector2d A(0.0, 0.0), B(1.0, 0.0);
  const double y12 = std::sqrt(0.36 - 0.25), y15 = std::sqrt(0.5625 - 0.25);
  const auto p12 = straight(A, Eigen::Vector2d(0.5, y12), B), p15 = straight(A, Eigen::Vector2d(0.5, y15), B);
  CHECK(detour_ratio(p12.path, 1) == doctest::Approx(1.2));
  CHECK(detour_ratio(straight(A, 0.5 * (A + B), B).path, 1) == doctest::Approx(1.0));
  CHECK(select_reference({p15, p12}, inst) == 1);
  CHECK(select_reference({p12, p12}, inst) == 0);
  auto unreached = p12;
  unreached.reached = false;
  CHECK(select_reference({unreached, p15}, inst) == 1);
  CHECK_THROWS_AS(select_reference({unreached}, inst), SelectionError);

  auto blocked = planar(1, walled());
  try {
    select_reference({straight(Eigen::Vector2d(-0.5, 0.0), Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.5, 0.0)), unreached}, blocked);
    FAIL("expected a selection failure");
  } catch (const SelectionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("trial 0: collision") != std::string::npos);
    CHECK(msg.find("trial 1: targets not reached") != std::string::npos);
  }
}

TEST_CASE("arc-length rescaling") {
  RowMat arc(2001, 2);
  for (int k = 0; k <= 2000; ++k) {
    const double a = 0.5 * M_PI * std::pow(k / 2000.0, 2);
    arc.row(k) << std::cos(a), std::sin(a);
  }
  const auto grid = TimeGrid::uniform(4.0, 1001);
  const RowMat out = rescale_time(arc, 1, 4.0, grid);
  CHECK(out.row(0) == arc.row(0));
  CHECK(out.row(1000) == arc.row(2000));
  CHECK(std::abs(polyline_length(out, 0) - polyline_length(arc, 0)) / polyline_length(arc, 0) < 1e-6);
  for (int j = 1; j < 1000; ++j) {
    const double seg = (out.row(j + 1) - out.row(j)).norm();
    CHECK(seg == doctest::Approx(0.5 * M_PI / 1000).epsilon(1e-4));
  }
  RowMat line(5, 2);
  line << 0, 0, 0.25, 0, 0.5, 0, 0.75, 0, 1, 0;
  const RowMat same = rescale_time(line, 1, 1.0, TimeGrid::uniform(1.0, 5));
  CHECK((same - line).norm() < 1e-15);
}

TEST_CASE("corridor signature records band crossings") {
  const std::vector<Obstacle> obs{AxisBox{Eigen::Vector2d(-0.5, -0.05), Eigen::Vector2d(0.5, 0.05)},
                                  AxisBox{Eigen::Vector2d(-0.05, 0.4), Eigen::Vector2d(0.05, 0.9)}};
  RowMat left(3, 2), right(3, 2);
  left << 0.0, -0.5, -0.7, 0.0, 0.0, 0.5;
  right << 0.0, -0.5, 0.7, 0.0, 0.0, 0.5;
  const auto a = corridor_signature(left, 1, obs), b = corridor_signature(right, 1, obs);
  REQUIRE(a[0].size() == 1);
  CHECK(a[0][0] == std::make_pair(0, -1));
  CHECK(b[0][0] == std::make_pair(0, 1));
  CHECK(a != b);
}
