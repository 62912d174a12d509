#pragma once

#include "pisonet/decoder.hpp"
#include "pisonet/scenario.hpp"

#include <random>

namespace fixture {

using namespace pisonet;

/// Free single agent in d dimensions, no drag, no obstacles.
inline ProblemInstance free_agent(int d, const Vec& w0, const Vec& wT, double T, double cv, double cu,
                                  const Vec& v0 = Vec(), const Vec& vT = Vec()) {
  ProblemInstance inst;
  inst.family_id = "fixture";
  inst.env.spatial_dim = d;
  inst.env.domain = {Vec::Constant(d, -10.0), Vec::Constant(d, 10.0)};
  AgentSpec a;
  a.radius = 0.05;
  a.state_dim = 2 * d;
  a.control_dim = d;
  inst.agents = {a};
  inst.x0 = RowMat::Zero(1, 2 * d);
  inst.xT = RowMat::Zero(1, 2 * d);
  inst.x0.block(0, 0, 1, d) = w0.transpose();
  inst.xT.block(0, 0, 1, d) = wT.transpose();
  if (v0.size() == d) inst.x0.block(0, d, 1, d) = v0.transpose();
  if (vT.size() == d) inst.xT.block(0, d, 1, d) = vT.transpose();
  inst.horizon = T;
  inst.cost = {cv, cu};
  return inst;
}

/// 1D rest-to-rest from 0 to 1 on [0, 1] with control cost only.
inline ProblemInstance rest_to_rest_1d() {
  return free_agent(1, Vec::Constant(1, 0.0), Vec::Constant(1, 1.0), 1.0, 0.0, 1.0);
}

inline Vec randn(std::mt19937_64& rng, int n, double s = 1.0) {
  std::normal_distribution<double> nd(0.0, s);
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = nd(rng);
  return v;
}

/// Decoder with its identity start perturbed so every shear is active.
inline DecoderWeights random_decoder(const DecoderConfig& cfg, int N, int dx, int theta_dim, double T,
                                     std::uint64_t seed, double scale = 0.3) {
  DecoderWeights w = make_decoder_weights(cfg, N, dx, theta_dim, T, seed);
  std::mt19937_64 rng(seed * 7919 + 1);
  w.params += randn(rng, static_cast<int>(w.params.size()), scale);
  return w;
}

inline ProblemInstance obstacle_pair() { return sample_instance(make_family("obstacle", 2), Split::train, 0); }

}  // namespace fixture
