#include "fixtures.hpp"
#include "oracles.hpp"

#include "pisonet/latent.hpp"

#include <doctest.h>

#include <cmath>

using namespace pisonet;

namespace {

LatentConfig rotation(double cb, double cq) {
  LatentConfig c;
  c.variant = LatentVariant::lqr_rotation;
  c.rotation_rate = cb;
  c.velocity_cost = cq;
  return c;
}

}  // namespace

TEST_CASE("rest-to-rest 1D latent is the cubic") {
  const auto inst = fixture::rest_to_rest_1d();
  const auto lat = solve_latent_bvp(inst, LatentConfig{}, TimeGrid::uniform(1.0, 101));
  for (int j = 0; j < lat.grid.size(); ++j) {
    const double t = lat.grid.times[j];
    CHECK(std::abs(lat.y(j, 0) - (3 * t * t - 2 * t * t * t)) < 1e-10);
    CHECK(std::abs(lat.y(j, 1) - (6 * t - 6 * t * t)) < 1e-10);
  }
}

TEST_CASE("latent with C_Q = 2 c_v solves the minimum-energy problem") {
  const double cv = 1.0, cu = 1.0, T = 3.0;
  const auto inst = fixture::free_agent(2, Eigen::Vector2d(-0.5, 0.2), Eigen::Vector2d(0.7, -0.1), T, cv, cu,
                                        Eigen::Vector2d(0.1, 0.0), Eigen::Vector2d(0.0, -0.3));
  LatentConfig cfg;
  cfg.velocity_cost = 2.0 * cv;
  const auto lat = solve_latent_bvp(inst, cfg, TimeGrid::uniform(T, 31));
  for (int k = 0; k < 2; ++k) {
    const auto s = oracle::min_energy_1d(inst.x0(0, k), inst.x0(0, 2 + k), inst.xT(0, k), inst.xT(0, 2 + k), T, cv, cu);
    for (int j = 0; j < lat.grid.size(); ++j) {
      const double t = lat.grid.times[j];
      CHECK(std::abs(lat.y(j, k) - s.x(t)) < 1e-9);
      CHECK(std::abs(lat.y(j, 2 + k) - s.v(t)) < 1e-9);
      CHECK(std::abs(lat.q(j, 2 + k) / (2.0 * cu) - s.u(t)) < 1e-9);
    }
  }
}

TEST_CASE("exponential map agrees with RK4 and conserves energy") {
  const auto inst = sample_instance(make_family("free", 4), Split::train, 1);
  for (const auto& cfg : {LatentConfig{}, rotation(0.3, 2.0), rotation(-0.2, 0.5)}) {
    const auto lat = solve_latent_bvp(inst, cfg, TimeGrid::uniform(inst.horizon, 11));
    const Mat H = build_latent_matrix(inst.agents[0], cfg, inst.cost.control_weight);
    for (int i = 0; i < 4; ++i) {
      Vec z0(8);
      z0 << lat.y.row(0).segment(4 * i, 4).transpose(), lat.q.row(0).segment(4 * i, 4).transpose();
      for (int j = 1; j < lat.grid.size(); j += 3) {
        const Vec z = oracle::rk4_linear(H, z0, lat.grid.times[j], 1e-4);
        Vec got(8);
        got << lat.y.row(j).segment(4 * i, 4).transpose(), lat.q.row(j).segment(4 * i, 4).transpose();
        CHECK((z - got).cwiseAbs().maxCoeff() < 1e-6);
      }
    }
    const auto E = latent_energy(lat, inst, cfg);
    for (double e : E) CHECK(std::abs(e - E.front()) < 1e-9);
    CHECK((lat.y.row(lat.grid.size() - 1).transpose() - inst.terminal_state()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("latent velocities are the system derivative") {
  const auto inst = sample_instance(make_family("free", 2), Split::train, 0);
  const auto cfg = rotation(0.5, 2.0);
  const Mat H = build_latent_matrix(inst.agents[0], cfg, inst.cost.control_weight);
  const auto lat = solve_latent_bvp(inst, cfg, TimeGrid::uniform(inst.horizon, 5));
  for (int j = 0; j < 5; ++j) {
    Vec z(8);
    z << lat.y.row(j).head(4).transpose(), lat.q.row(j).head(4).transpose();
    const Vec zd = H * z;
    CHECK((zd.head(4) - lat.ydot.row(j).head(4).transpose()).norm() < 1e-12);
    CHECK((zd.tail(4) - lat.qdot.row(j).head(4).transpose()).norm() < 1e-12);
  }
}

TEST_CASE("positive rotation rate turns velocity counter-clockwise") {
  AgentSpec a;
  a.state_dim = 4;
  a.control_dim = 2;
  const double cb = 0.7, t = 0.9;
  const Mat H = build_latent_matrix(a, rotation(cb, 0.0), 1.0);
  const Mat E = matrix_exponential(H.topLeftCorner(4, 4), t);
  const Vec v = E.block(2, 2, 2, 2) * Eigen::Vector2d(1.0, 0.0);
  CHECK(v[0] == doctest::Approx(std::cos(cb * t)));
  CHECK(v[1] == doctest::Approx(std::sin(cb * t)));
}

TEST_CASE("matrix exponential of a nilpotent block") {
  Mat N = Mat::Zero(3, 3);
  N(0, 1) = 1.0;
  N(1, 2) = 1.0;
  const Mat E = matrix_exponential(N, 2.0);
  CHECK(E(0, 2) == doctest::Approx(2.0));
  CHECK(E(0, 1) == doctest::Approx(2.0));
  CHECK(E.diagonal() == Vec::Ones(3));
  CHECK_THROWS_AS(matrix_exponential(Mat::Zero(2, 3), 1.0), DomainError);
}

TEST_CASE("latent configuration errors") {
  const auto inst = fixture::rest_to_rest_1d();
  LatentConfig c;
  c.velocity_cost = -1.0;
  CHECK_THROWS_AS(solve_latent_bvp(inst, c, TimeGrid::uniform(1.0, 3)), DomainError);
  CHECK_THROWS_AS(solve_latent_bvp(inst, rotation(0.1, 0.0), TimeGrid::uniform(1.0, 3)), DomainError);
  CHECK_THROWS_AS(solve_latent_bvp(inst, LatentConfig{}, TimeGrid::uniform(2.0, 3)), DomainError);
  LatentConfig comp;
  comp.variant = LatentVariant::lqr_composed;
  CHECK_THROWS_AS(solve_latent(inst, comp, TimeGrid::uniform(1.0, 3)), DomainError);
  CHECK(parse_latent_variant(latent_variant_name(LatentVariant::lqr_rotation)) == LatentVariant::lqr_rotation);
}

TEST_CASE("composing with an identity-start decoder leaves the state unchanged") {
  const auto fam = make_family("free", 2);
  const auto inst = nominal_instance(fam);
  const Vec th = encode_theta(inst, fam);
  const auto w = make_decoder_weights(DecoderConfig{}, 2, 4, theta_dim(fam), fam.horizon, 1);
  const auto grid = TimeGrid::uniform(fam.horizon, 9);
  LatentConfig comp = rotation(0.2, 2.0);
  comp.variant = LatentVariant::lqr_composed;
  const auto a = solve_latent(inst, comp, grid, &w, &th);
  const auto b = solve_latent_bvp(inst, rotation(0.2, 2.0), grid);
  CHECK((a.y - b.y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.ydot - b.ydot).cwiseAbs().maxCoeff() < 1e-12);
}
