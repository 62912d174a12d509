#include "fixtures.hpp"
#include "oracles.hpp"

#include "pisonet/latent.hpp"
#include "pisonet/transcription.hpp"

#include <doctest.h>

using namespace pisonet;

TEST_CASE("1D rest-to-rest reproduces the cubic and cost 12") {
  const auto inst = fixture::rest_to_rest_1d();
  TranscriptionOptions o;
  o.intervals = 200;
  const auto r = solve_transcription(inst, o);
  CHECK(r.cost == doctest::Approx(12.0).epsilon(1e-3));
  for (int j = 0; j <= 200; j += 20) {
    const double t = r.grid.times[j];
    CHECK(std::abs(r.positions(j, 0) - (3 * t * t - 2 * t * t * t)) < 1e-4);
  }
}

TEST_CASE("velocity-weighted free problem matches the oracle cost") {
  const double cv = 1.0, cu = 1.0, T = 3.0;
  const Eigen::Vector2d w0(-0.5, 0.2), wT(0.7, -0.1);
  const auto inst = fixture::free_agent(2, w0, wT, T, cv, cu);
  const auto r = solve_transcription(inst);
  const double ref = oracle::min_energy_cost(w0, Vec::Zero(2), wT, Vec::Zero(2), T, cv, cu);
  CHECK(oracle::rel_err(r.cost, ref) < 1e-3);
}

TEST_CASE("objective gradient matches central differences") {
  const auto inst = sample_instance(make_family("obstacle", 2), Split::train, 0);
  const int K = 20;
  LatentConfig lc;
  lc.velocity_cost = 2.0;
  const auto lat = solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, K + 1));
  const RowMat full = resample_positions(PhaseTrajectory{lat.grid, lat.y, lat.q}, 2, 2, K);
  const RowMat interior = full.middleRows(1, K - 1);
  const BarrierParams bp{0.05, 0.05};
  RowMat grad;
  transcription_objective(inst, interior, inst.horizon, bp, &grad);
  const Vec flat = Eigen::Map<const Vec>(interior.data(), interior.size());
  const Vec fd = oracle::fd_gradient(
      [&](const Vec& v) {
        RowMat m = Eigen::Map<const RowMat>(v.data(), interior.rows(), interior.cols());
        return transcription_objective(inst, m, inst.horizon, bp, nullptr);
      },
      flat);
  const Vec g = Eigen::Map<const Vec>(grad.data(), grad.size());
  CHECK((g - fd).norm() / fd.norm() < 1e-6);
}

TEST_CASE("obstacle instance is solved without collision") {
  const auto inst = nominal_instance(make_family("obstacle", 2));
  LatentConfig lc;
  lc.variant = LatentVariant::lqr_rotation;
  lc.rotation_rate = 0.15;
  lc.velocity_cost = 2.0;
  const auto lat = solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, 101));
  TranscriptionOptions o;
  o.intervals = 100;
  const auto r = solve_transcription(inst, o, resample_positions(PhaseTrajectory{lat.grid, lat.y, lat.q}, 2, 2, 100));
  CHECK(r.min_clearance > 0.0);
  CHECK(r.cost > 0.0);
  CHECK(r.positions.row(0) == inst.x0.leftCols(2).reshaped<Eigen::RowMajor>().transpose());
}
