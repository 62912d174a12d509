#include "fixtures.hpp"
#include "oracles.hpp"

#include "pisonet/evaluation.hpp"
#include "pisonet/training.hpp"

#include <doctest.h>

#include <sstream>

using namespace pisonet;

namespace {

PhaseTrajectory identity_decode(const ProblemInstance& inst, const LatentConfig& lc, int Nt) {
  const auto lat = solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, Nt));
  return {lat.grid, lat.y, lat.q};
}

}  // namespace

TEST_CASE("canonical 1D rest-to-rest cost is 12") {
  const auto inst = fixture::rest_to_rest_1d();
  const double c = running_cost(identity_decode(inst, LatentConfig{}, 2001), inst);
  CHECK(c == doctest::Approx(12.0).epsilon(1e-5));
}

TEST_CASE("running cost agrees with the minimum-energy oracle") {
  const double cv = 0.5, cu = 2.0, T = 4.0;
  const Eigen::Vector2d w0(-0.6, 0.3), wT(0.4, -0.5), v0(0.2, 0.0), vT(0.0, 0.1);
  const auto inst = fixture::free_agent(2, w0, wT, T, cv, cu, v0, vT);
  LatentConfig lc;
  lc.velocity_cost = 2.0 * cv;
  const double c = running_cost(identity_decode(inst, lc, 4001), inst);
  CHECK(oracle::rel_err(c, oracle::min_energy_cost(w0, v0, wT, vT, T, cv, cu)) < 1e-5);
}

TEST_CASE("safety check sees collisions between samples") {
  const auto fam = make_family("obstacle", 1);
  auto inst = nominal_instance(fam);
  PhaseTrajectory tr;
  tr.grid = TimeGrid::uniform(1.0, 2);
  tr.x = RowMat::Zero(2, 4);
  tr.p = RowMat::Zero(2, 4);
  tr.x.row(0).head(2) << -0.2, 0.0;
  tr.x.row(1).head(2) << 0.2, 0.0;
  CHECK(safety_violation(tr, inst, 1).pass);
  const auto s = safety_violation(tr, inst, 10);
  CHECK_FALSE(s.pass);
  CHECK(s.max_violation == doctest::Approx(0.17));
  CHECK_THROWS_AS(safety_violation(tr, inst, 0), DomainError);
}

TEST_CASE("batch evaluation rows and aggregates") {
  const auto fam = make_family("obstacle", 2);
  std::vector<ProblemInstance> insts;
  std::vector<Vec> thetas;
  for (int i = 0; i < 4; ++i) {
    insts.push_back(sample_instance(fam, Split::test, i));
    thetas.push_back(encode_theta(insts.back(), fam));
  }
  const auto w = fixture::random_decoder(DecoderConfig{}, 2, 4, theta_dim(fam), fam.horizon, 4, 0.05);
  LatentConfig lc;
  lc.variant = LatentVariant::lqr_rotation;
  lc.rotation_rate = 0.15;
  lc.velocity_cost = 2.0;
  EvalOptions eo;
  eo.time_samples = 32;
  const auto rep = evaluate_batch(insts, thetas, w, lc, eo);
  REQUIRE(rep.rows.size() == 4);
  for (int b = 0; b < 4; ++b) {
    const auto dense = TimeGrid::uniform(fam.horizon, 32).refined(10);
    const auto tr = decode_trajectory(w, thetas[b], solve_latent(insts[b], lc, dense));
    CHECK(rep.rows[b].cost == doctest::Approx(running_cost(tr, insts[b])));
    CHECK(rep.rows[b].max_violation == doctest::Approx(safety_violation(tr, insts[b], 1).max_violation));
  }
  auto copy = rep;
  summarize(copy);
  CHECK(copy.pass_count == rep.pass_count);
  CHECK(copy.avg_cost == doctest::Approx(rep.avg_cost));

  const nlohmann::json j = rep;
  const auto back = j.get<EvalReport>();
  CHECK(back.rows.size() == 4);
  CHECK(back.avg_residual == rep.avg_residual);

  std::istringstream lines(report_table(rep));
  int n = 0;
  for (std::string s; std::getline(lines, s);) ++n;
  CHECK(n >= 5);
}

TEST_CASE("refinement option only touches failing rows") {
  const auto fam = make_family("obstacle", 2);
  std::vector<ProblemInstance> insts{nominal_instance(fam)};
  std::vector<Vec> thetas{encode_theta(insts[0], fam)};
  const auto w = make_decoder_weights(DecoderConfig{}, 2, 4, theta_dim(fam), fam.horizon, 1);
  LatentConfig lc;
  lc.velocity_cost = 2.0;
  EvalOptions eo;
  eo.time_samples = 16;
  eo.refinement = 2;
  eo.bp = {0.01, 0.01};
  const auto plain = evaluate_batch(insts, thetas, w, lc, eo);
  REQUIRE_FALSE(plain.rows[0].pass);
  eo.refine_steps = 3;
  const auto ref = evaluate_batch(insts, thetas, w, lc, eo);
  CHECK(ref.rows[0].refined);
  CHECK(ref.rows[0].mean_residual <= plain.rows[0].mean_residual);
}
