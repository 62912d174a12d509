#include "fixtures.hpp"
#include "oracles.hpp"

#include "pisonet/training.hpp"

#include <doctest.h>

#include <cmath>

using namespace pisonet;

namespace {

TrainSample obstacle_sample(const DecoderConfig& cfg, DecoderWeights& w, int nt, double noise) {
  const auto fam = make_family("obstacle", 2);
  const auto inst = sample_instance(fam, Split::train, 0);
  w = fixture::random_decoder(cfg, 2, 4, theta_dim(fam), inst.horizon, 3, noise);
  LatentConfig lc;
  lc.velocity_cost = 2.0;
  return {inst, encode_theta(inst, fam), solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, nt))};
}

DecoderConfig small() {
  DecoderConfig c;
  c.layers = 1;
  c.cond_width = 4;
  c.time_width = 4;
  return c;
}

}  // namespace

TEST_CASE("anneal schedule decays geometrically per stage") {
  AnnealConfig c;
  c.enabled = true;
  c.eps0 = 0.1;
  c.ell0 = 0.2;
  c.rho_eps = 0.5;
  c.rho_ell = 0.25;
  c.period_steps = 10;
  CHECK(anneal_state(c, 0).eps == doctest::Approx(0.1));
  CHECK(anneal_state(c, 9).stage == 0);
  const auto s = anneal_state(c, 25);
  CHECK(s.stage == 2);
  CHECK(s.eps == doctest::Approx(0.025));
  CHECK(s.ell == doctest::Approx(0.0125));
  c.enabled = false;
  c.eps = 3e-4;
  CHECK(anneal_state(c, 1000).eps == 3e-4);
  c.enabled = true;
  c.rho_eps = 1.0;
  CHECK_THROWS_AS(anneal_state(c, 0), DomainError);
}

TEST_CASE("exact minimum-energy latent has zero PMP residual") {
  const auto inst = fixture::free_agent(2, Eigen::Vector2d(-0.4, 0.1), Eigen::Vector2d(0.6, 0.3), 2.0, 0.7, 1.3);
  LatentConfig lc;
  lc.velocity_cost = 2.0 * 0.7;
  const auto lat = solve_latent(inst, lc, TimeGrid::uniform(2.0, 33));
  const auto w = make_decoder_weights(DecoderConfig{}, 1, 4, 0, 2.0, 1);
  const auto r = pmp_residuals(inst, w, Vec(), lat, BarrierParams{});
  CHECK(r.rx.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.rp.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loss is the mean squared residual plus penalties") {
  DecoderWeights w;
  const auto s = obstacle_sample(small(), w, 9, 0.05);
  const BarrierParams bp{0.05, 0.05};
  const auto r = pmp_residuals(s.inst, w, s.theta, s.latent, bp);
  const double expect = (r.rx.squaredNorm() + r.rp.squaredNorm()) / 9.0;
  LossOptions lo;
  lo.bp = bp;
  lo.weight_decay = 1e-3;
  const auto op = make_operator(w);
  const auto lv = total_loss({s, s}, *op, w.params, lo, false);
  CHECK(lv.residual == doctest::Approx(expect).epsilon(1e-12));
  CHECK(lv.total == doctest::Approx(expect + 1e-3 * w.params.squaredNorm()).epsilon(1e-12));
  CHECK(lv.grad.size() == 0);
}

TEST_CASE("loss gradient matches central differences") {
  DecoderWeights w;
  const auto s = obstacle_sample(small(), w, 8, 0.05);
  CHECK(gradient_check(w, s, BarrierParams{0.05, 0.05}) < 1e-4);

  LossOptions lo;
  lo.bp = {0.05, 0.05};
  lo.ic_weight = 0.3;
  lo.tc_weight = 0.2;
  lo.weight_decay = 1e-2;
  const auto op = make_operator(w);
  const auto lv = total_loss({s}, *op, w.params, lo);
  const Vec fd = oracle::fd_gradient([&](const Vec& p) { return total_loss({s}, *op, p, lo, false).total; }, w.params, 1e-6);
  CHECK((lv.grad - fd).norm() / fd.norm() < 1e-5);
}

TEST_CASE("gradient check catches a broken backward pass") {
  DecoderWeights w;
  const auto s = obstacle_sample(small(), w, 8, 0.05);
  CHECK(gradient_check(w, s, BarrierParams{0.05, 0.05}, GradientFault::flip_up_shear_backward) > 1e-2);
}

TEST_CASE("training lowers the loss on a small problem") {
  const auto fam = make_family("free", 2);
  std::vector<ProblemInstance> insts;
  std::vector<Vec> thetas;
  for (int i = 0; i < 3; ++i) {
    insts.push_back(sample_instance(fam, Split::train, i));
    thetas.push_back(encode_theta(insts.back(), fam));
  }
  LatentConfig lc;
  lc.variant = LatentVariant::lqr_rotation;
  lc.rotation_rate = 0.15;
  lc.velocity_cost = 2.0;
  const auto samples = make_samples(insts, thetas, lc, 16);
  REQUIRE(samples.size() == 3);
  CHECK(samples[0].latent.grid.size() == 16);
  auto w = make_decoder_weights(DecoderConfig{}, 2, 4, theta_dim(fam), fam.horizon, 7);
  TrainConfig tc;
  tc.adam_steps = 30;
  tc.lbfgs_steps = 10;
  tc.anneal.enabled = true;
  tc.anneal.period_steps = 10;
  const auto rep = train(w, samples, tc);
  CHECK(rep.loss.size() == 40);
  CHECK(rep.loss.back() < rep.loss.front());
  CHECK(rep.final_anneal.stage == 2);
  CHECK(rep.eps[0] == doctest::Approx(0.1));
  for (std::size_t k = 31; k < rep.loss.size(); ++k) CHECK(rep.loss[k] <= rep.loss[k - 1] * (1 + 1e-12));
}

TEST_CASE("regression pretraining fits reference positions") {
  const auto fam = make_family("free", 2);
  const auto inst = nominal_instance(fam);
  const Vec th = encode_theta(inst, fam);
  const auto samples = make_samples({inst}, {th}, LatentConfig{}, 16);
  RowMat ref(16, 4);
  for (int j = 0; j < 16; ++j) {
    const double t = samples[0].latent.grid.times[j], s = std::sin(M_PI * t / fam.horizon);
    for (int i = 0; i < 2; ++i) {
      ref(j, 2 * i) = samples[0].latent.y(j, 4 * i);
      ref(j, 2 * i + 1) = samples[0].latent.y(j, 4 * i + 1) + 0.1 * s;
    }
  }
  auto w = make_decoder_weights(DecoderConfig{}, 2, 4, theta_dim(fam), fam.horizon, 3);
  const auto L = pretrain_regression(w, samples, {ref}, 200, 1e-2);
  REQUIRE(L.size() == 200);
  CHECK(L.back() < 0.2 * L.front());
  CHECK_THROWS_AS(pretrain_regression(w, samples, {}, 1, 1e-2), DomainError);
}

TEST_CASE("refinement never increases the instance loss") {
  DecoderWeights w;
  const auto s = obstacle_sample(DecoderConfig{}, w, 16, 0.2);
  const auto r = refine_instance(s, w, 5, BarrierParams{0.01, 0.01});
  CHECK(r.steps <= 5);
  CHECK(r.final_loss <= r.initial_loss);
  CHECK(r.delta.size() == w.params.size());
  CHECK(r.traj.x.rows() == 16);
  const auto none = refine_instance(s, w, 0, BarrierParams{0.01, 0.01});
  CHECK(none.delta.norm() == 0.0);
}

TEST_CASE("decoded trajectory on the latent grid") {
  DecoderWeights w;
  const auto s = obstacle_sample(DecoderConfig{}, w, 12, 0.2);
  const auto tr = decode_trajectory(w, s.theta, s.latent);
  CHECK(tr.grid.times == s.latent.grid.times);
  CHECK((tr.x.row(0).transpose() - s.inst.initial_state()).norm() < 1e-12);
  CHECK((tr.x.row(11).transpose() - s.inst.terminal_state()).norm() < 1e-9);
}
