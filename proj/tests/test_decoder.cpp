#include "fixtures.hpp"
#include "oracles.hpp"

#include "pisonet/decoder.hpp"
#include "pisonet/mlp_baseline.hpp"

#include <doctest.h>

#include <cmath>

using namespace pisonet;

namespace {

constexpr int kN = 2, kDx = 4, kTheta = 3;
constexpr double kT = 2.0;

Mat omega(int n) {
  Mat Om = Mat::Zero(2 * n, 2 * n);
  Om.topRightCorner(n, n).setIdentity();
  Om.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  return Om;
}

// Shear stack written out from the conditioned layer parameters.
Vec manual_forward(const DecoderWeights& w, const Vec& theta, double t, const Vec& z) {
  const int n = w.half_dim();
  Vec y = z.head(n), q = z.tail(n);
  const auto layers = condition_params(w, theta, t);
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& L = layers[k];
    if (k % 2 == 0) {
      q += L.K.transpose() * L.a.cwiseProduct(L.K * y + L.b);
    } else {
      y += t * (w.horizon - t) * (L.K.transpose() * L.a.cwiseProduct(L.K * q + L.b));
    }
  }
  Vec out(2 * n);
  out << y, q;
  return out;
}

struct Case {
  Vec theta, z, zdot;
  double t;
};

Case random_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ut(0.0, kT);
  return {fixture::randn(rng, kTheta), fixture::randn(rng, 2 * kN * kDx), fixture::randn(rng, 2 * kN * kDx), ut(rng)};
}

}  // namespace

TEST_CASE("decoder forward is the alternating shear stack") {
  const auto w = fixture::random_decoder(DecoderConfig{}, kN, kDx, kTheta, kT, 3);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) {
    const auto c = random_case(rng);
    const Vec a = decoder_forward(w, c.theta, c.t, c.z), b = manual_forward(w, c.theta, c.t, c.z);
    CHECK((a - b).norm() / b.norm() < 1e-13);
  }
}

TEST_CASE("decoder is symplectic with unit determinant") {
  DecoderConfig cfg;
  for (bool block : {true, false}) {
    cfg.block_diagonal = block;
    const auto w = fixture::random_decoder(cfg, kN, kDx, kTheta, kT, 5);
    std::mt19937_64 rng(2);
    for (int k = 0; k < 30; ++k) {
      const auto c = random_case(rng);
      const auto def = symplectic_defect(w, c.theta, c.t, c.z);
      CHECK(def.form < 1e-6);
      CHECK(def.det < 1e-6);
    }
  }
}

TEST_CASE("symplectic form holds for a differenced jacobian too") {
  const auto w = fixture::random_decoder(DecoderConfig{}, kN, kDx, kTheta, kT, 6);
  std::mt19937_64 rng(3);
  const auto c = random_case(rng);
  const Mat J = oracle::fd_jacobian([&](const Vec& z) { return decoder_forward(w, c.theta, c.t, z); }, c.z, 1e-5);
  const Mat Om = omega(kN * kDx);
  CHECK((J.transpose() * Om * J - Om).norm() < 1e-6);
  CHECK((J - operator_jacobian(w, c.theta, c.t, c.z)).norm() / J.norm() < 1e-8);
}

TEST_CASE("state block is preserved at both endpoints") {
  const auto w = fixture::random_decoder(DecoderConfig{}, kN, kDx, kTheta, kT, 7);
  std::mt19937_64 rng(4);
  const int n = kN * kDx;
  for (int k = 0; k < 20; ++k) {
    const auto c = random_case(rng);
    for (double t : {0.0, kT}) CHECK((decoder_forward(w, c.theta, t, c.z).head(n) - c.z.head(n)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("identity start decodes to the latent point") {
  const auto w = make_decoder_weights(DecoderConfig{}, kN, kDx, kTheta, kT, 8);
  std::mt19937_64 rng(5);
  const auto c = random_case(rng);
  CHECK((decoder_forward(w, c.theta, c.t, c.z) - c.z).norm() == 0.0);
  CHECK(w.params.size() == static_cast<Eigen::Index>(count_parameters(DecoderConfig{}, kN, kDx, kTheta)));
}

TEST_CASE("jvp and time derivative match central differences") {
  const auto w = fixture::random_decoder(DecoderConfig{}, kN, kDx, kTheta, kT, 9);
  std::mt19937_64 rng(6);
  const double h = 1e-5;
  for (int k = 0; k < 10; ++k) {
    const auto c = random_case(rng);
    const Vec jvp = decoder_jvp(w, c.theta, c.t, c.z, c.zdot);
    const Vec fj = (decoder_forward(w, c.theta, c.t, c.z + h * c.zdot) - decoder_forward(w, c.theta, c.t, c.z - h * c.zdot)) / (2 * h);
    CHECK((jvp - fj).norm() / fj.norm() < 1e-6);
    const Vec dt = decoder_time_derivative(w, c.theta, c.t, c.z);
    const Vec ft = (decoder_forward(w, c.theta, c.t + h, c.z) - decoder_forward(w, c.theta, c.t - h, c.z)) / (2 * h);
    CHECK((dt - ft).norm() / std::max(ft.norm(), 1e-8) < 1e-6);
  }
}

TEST_CASE("operator tangent combines both channels") {
  const auto w = fixture::random_decoder(DecoderConfig{}, kN, kDx, kTheta, kT, 10);
  std::mt19937_64 rng(7);
  const auto c = random_case(rng);
  const auto op = make_operator(w);
  auto ws = op->make_workspace(2);
  op->begin(w.params, c.theta, *ws);
  Vec X, Xd;
  op->eval(w.params, *ws, 1, c.t, c.z, c.zdot, 0.5, X, Xd);
  CHECK((X - decoder_forward(w, c.theta, c.t, c.z)).norm() < 1e-13);
  const Vec expect = decoder_jvp(w, c.theta, c.t, c.z, c.zdot) + 0.5 * decoder_time_derivative(w, c.theta, c.t, c.z);
  CHECK((Xd - expect).norm() / expect.norm() < 1e-12);
}

TEST_CASE("parameter gradient matches central differences") {
  for (auto act : {Activation::tanh, Activation::silu}) {
    DecoderConfig cfg;
    cfg.layers = 2;
    cfg.cond_width = 4;
    cfg.time_width = 4;
    cfg.activation = act;
    auto w = fixture::random_decoder(cfg, kN, kDx, kTheta, kT, 11, 0.2);
    std::mt19937_64 rng(8);
    const Vec theta = fixture::randn(rng, kTheta);
    std::vector<DecoderSample> batch;
    for (int k = 0; k < 3; ++k) {
      const auto c = random_case(rng);
      batch.push_back({c.t, c.z, c.zdot, fixture::randn(rng, 16), fixture::randn(rng, 16)});
    }
    auto loss = [&](const Vec& p) {
      DecoderWeights v = w;
      v.params = p;
      double s = 0.0;
      for (const auto& b : batch) {
        const Vec X = decoder_forward(v, theta, b.t, b.z);
        const Vec Xd = decoder_jvp(v, theta, b.t, b.z, b.zdot) + decoder_time_derivative(v, theta, b.t, b.z);
        s += b.Xbar.dot(X) + b.Xdot_bar.dot(Xd);
      }
      return s;
    };
    const Vec g = decoder_param_gradient(w, theta, batch);
    const Vec fd = oracle::fd_gradient(loss, w.params, 1e-6);
    CHECK((g - fd).norm() / fd.norm() < 1e-6);
  }
}

TEST_CASE("shear forward matches its definition") {
  std::mt19937_64 rng(12);
  LayerParams L{Mat(fixture::randn(rng, 9).reshaped(3, 3)), fixture::randn(rng, 3), fixture::randn(rng, 3)};
  const Vec z = fixture::randn(rng, 6);
  const Vec lo = shear_forward(z, L, 0.4, ShearDir::low, 1.0);
  CHECK((lo.head(3) - z.head(3)).norm() == 0.0);
  CHECK((lo.tail(3) - z.tail(3) - L.K.transpose() * L.a.cwiseProduct(L.K * z.head(3) + L.b)).norm() < 1e-14);
  const Vec up = shear_forward(z, L, 0.4, ShearDir::up, 1.0);
  CHECK((up.tail(3) - z.tail(3)).norm() == 0.0);
  CHECK((up.head(3) - z.head(3) - 0.24 * L.K.transpose() * L.a.cwiseProduct(L.K * z.tail(3) + L.b)).norm() < 1e-14);
}

TEST_CASE("mlp baseline is not symplectic") {
  const auto cfg = matched_mlp_config(DecoderConfig{}, kN, kDx, kTheta);
  const auto sonet = count_parameters(DecoderConfig{}, kN, kDx, kTheta);
  const auto mlp = mlp_parameter_count(cfg, kN, kDx, kTheta);
  CHECK(std::abs(static_cast<double>(mlp) - static_cast<double>(sonet)) / sonet < 0.05);
  auto w = fixture::random_decoder(cfg, kN, kDx, kTheta, kT, 13, 0.3);
  std::mt19937_64 rng(9);
  const auto c = random_case(rng);
  CHECK(symplectic_defect(w, c.theta, c.t, c.z).form > 1e-3);
  const Vec X = mlp_baseline_forward(w, c.theta, 0.0, c.z);
  CHECK((X.head(8) - c.z.head(8)).norm() < 1e-14);
}
