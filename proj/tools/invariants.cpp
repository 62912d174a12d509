#include "invariants.hpp"

#include "pisonet/eikonal.hpp"
#include "pisonet/evaluation.hpp"
#include "pisonet/io.hpp"
#include "pisonet/svg.hpp"
#include "pisonet/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <cstring>

#include <unistd.h>

namespace pisonet::cli {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

ProblemInstance two_agent_obstacle() {
  auto fam = make_family("obstacle", 2);
  return sample_instance(fam, Split::train, 0);
}

Vec random_vec(std::mt19937_64& rng, int n, double s = 1.0) {
  std::normal_distribution<double> nd(0.0, s);
  Vec v(n);
  for (int k = 0; k < n; ++k) v[k] = nd(rng);
  return v;
}

DecoderWeights random_decoder(int N, int dx, int theta_dim, double T, std::uint64_t seed) {
  DecoderConfig dc;
  DecoderWeights w = make_decoder_weights(dc, N, dx, theta_dim, T, seed);
  std::mt19937_64 rng(seed + 1);
  w.params += random_vec(rng, static_cast<int>(w.params.size()), 0.3);
  return w;
}

CheckResult symplectic() {
  std::mt19937_64 rng(1);
  const auto w = random_decoder(2, 4, 3, 2.0, 3);
  double worst_form = 0.0, worst_det = 0.0;
  std::uniform_real_distribution<double> ut(0.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    const auto def = symplectic_defect(w, random_vec(rng, 3), ut(rng), random_vec(rng, 16));
    worst_form = std::max(worst_form, def.form);
    worst_det = std::max(worst_det, def.det);
  }
  return {"decoder symplectic", worst_form < 1e-6 && worst_det < 1e-6, fmt("form %.2e det %.2e", worst_form, worst_det)};
}

CheckResult endpoints() {
  std::mt19937_64 rng(2);
  const auto w = random_decoder(2, 4, 3, 2.0, 5);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vec z = random_vec(rng, 16), th = random_vec(rng, 3);
    for (double t : {0.0, 2.0}) worst = std::max(worst, (decoder_forward(w, th, t, z).head(8) - z.head(8)).cwiseAbs().maxCoeff());
  }
  return {"decoder preserves endpoint states", worst < 1e-14, fmt("max deviation %.2e", worst)};
}

CheckResult latent_rest_to_rest() {
  ProblemInstance inst;
  inst.env.spatial_dim = 1;
  inst.env.domain = {Vec::Constant(1, -10.0), Vec::Constant(1, 10.0)};
  inst.agents = {AgentSpec{0.0, 0.0, 2, 1}};
  inst.x0 = RowMat::Zero(1, 2);
  inst.xT = RowMat::Zero(1, 2);
  inst.xT(0, 0) = 1.0;
  inst.horizon = 1.0;
  inst.cost = {0.0, 1.0};
  const auto lat = solve_latent_bvp(inst, LatentConfig{}, TimeGrid::uniform(1.0, 21));
  double worst = 0.0;
  for (int j = 0; j < lat.grid.size(); ++j) {
    const double t = lat.grid.times[j];
    worst = std::max(worst, std::abs(lat.y(j, 0) - (3 * t * t - 2 * t * t * t)));
  }
  const auto E = latent_energy(lat, inst, LatentConfig{});
  double drift = 0.0;
  for (double e : E) drift = std::max(drift, std::abs(e - E.front()));
  return {"latent rest-to-rest closed form", worst < 1e-6 && drift < 1e-9, fmt("position err %.2e energy drift %.2e", worst, drift)};
}

CheckResult gradient() {
  const auto inst = two_agent_obstacle();
  const auto fam = make_family("obstacle", 2);
  DecoderConfig dc;
  dc.layers = 1;
  dc.cond_width = 4;
  dc.time_width = 4;
  auto w = make_decoder_weights(dc, 2, 4, theta_dim(fam), inst.horizon, 3);
  std::mt19937_64 rng(4);
  w.params += random_vec(rng, static_cast<int>(w.params.size()), 0.05);
  LatentConfig lc;
  lc.velocity_cost = 2.0;
  const TrainSample s{inst, encode_theta(inst, fam), solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, 8))};
  const double err = gradient_check(w, s, BarrierParams{0.05, 0.05});
  return {"loss gradient matches central differences", err < 1e-4, fmt("max relative error %.2e", err)};
}

CheckResult control_recovery() {
  const auto inst = two_agent_obstacle();
  std::mt19937_64 rng(6);
  const Vec pi = random_vec(rng, 4);
  const Vec u = conjugate_control(inst, 0, pi);
  auto obj = [&](const Vec& v) { return pi.tail(2).dot(v) - inst.cost.control_weight * v.squaredNorm(); };
  bool ok = true;
  for (int k = 0; k < 20; ++k) ok = ok && obj(u) >= obj(u + random_vec(rng, 2, 0.1));
  return {"control recovery maximises the pre-Hamiltonian", ok, ""};
}

CheckResult json_roundtrip() {
  const auto inst = two_agent_obstacle();
  const json a = inst;
  const json b = json::parse(a.dump()).get<ProblemInstance>();
  const auto fam = make_family("variable_radius_obstacle", 4);
  const json fa = fam;
  const json fb = json::parse(fa.dump()).get<FamilySpec>();
  return {"JSON round trip", a == b && fa == fb, ""};
}

CheckResult checkpoint_roundtrip() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("pisonet_check_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const auto w = random_decoder(2, 4, 3, 2.0, 9);
  const fs::path p = dir / "w.pisn";
  save_checkpoint(p, w, {{"note", "check"}});
  const auto ck = load_checkpoint(p);
  bool same = ck.weights.params.size() == w.params.size() &&
              std::memcmp(ck.weights.params.data(), w.params.data(), sizeof(double) * w.params.size()) == 0;
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(-12, std::ios::end);
    char c;
    f.read(&c, 1);
    c ^= 0x5a;
    f.seekp(-12, std::ios::end);
    f.write(&c, 1);
  }
  bool rejected = false;
  try {
    load_checkpoint(p);
  } catch (const CheckpointError&) {
    rejected = true;
  }
  fs::remove_all(dir);
  return {"checkpoint round trip and corruption detection", same && rejected, ""};
}

CheckResult csv_roundtrip() {
  const auto inst = two_agent_obstacle();
  LatentConfig lc;
  lc.velocity_cost = 2.0;
  const auto lat = solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, 11));
  const PhaseTrajectory tr{lat.grid, lat.y, lat.q};
  const std::string text = trajectory_csv(tr, inst);
  const auto tab = parse_trajectory_csv(text);
  const bool ok = tab.traj.x == tr.x && tab.traj.p == tr.p && tab.traj.grid.times == tr.grid.times;
  return {"trajectory CSV round trip", ok, ""};
}

CheckResult sampling_deterministic() {
  const auto fam = make_family("free", 4);
  const json a = sample_instance(fam, Split::test, 3), b = sample_instance(fam, Split::test, 3);
  const json c = sample_instance(fam, Split::train, 3);
  return {"instance sampling deterministic and split-separated", a == b && a != c, ""};
}

CheckResult eikonal_free() {
  EnvironmentSpec env;
  env.domain = {Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)};
  const double h = 0.02;
  const auto F = solve_eikonal(env, Eigen::Vector2d::Zero(), GridSpec::covering(env.domain, h));
  double worst = 0.0;
  for (int j = 0; j < F.ny; ++j)
    for (int i = 0; i < F.nx; ++i)
      worst = std::max(worst, std::abs(F.at(i, j) - std::hypot(F.node_x(i), F.node_y(j))));
  return {"eikonal free-space distance", worst < 2 * h, fmt("max error %.3e (h %.2g)", worst, h)};
}

CheckResult barrier_sign() {
  const BarrierParams bp{1e-2, 1e-2};
  Vec h(3);
  h << -0.1, 0.0, 0.1;
  const double a = barrier(h.head(1), bp), b = barrier(h.segment(1, 1), bp), c = barrier(h.tail(1), bp);
  return {"barrier positive and decreasing in clearance", a > b && b > c && c > 0.0, ""};
}

CheckResult svg_deterministic() {
  const auto inst = two_agent_obstacle();
  LatentConfig lc;
  lc.velocity_cost = 2.0;
  const auto lat = solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, 11));
  const auto tab = parse_trajectory_csv(trajectory_csv(PhaseTrajectory{lat.grid, lat.y, lat.q}, inst));
  SvgOptions o;
  o.arrows = 3;
  return {"SVG output deterministic", render_svg(tab, inst.env, o) == render_svg(tab, inst.env, o), ""};
}

}  // namespace

std::vector<CheckResult> run_invariant_suite() {
  const std::vector<std::function<CheckResult()>> checks = {
      symplectic,     endpoints,          latent_rest_to_rest,    gradient,     control_recovery, json_roundtrip,
      checkpoint_roundtrip, csv_roundtrip, sampling_deterministic, eikonal_free, barrier_sign,     svg_deterministic};
  std::vector<CheckResult> out;
  for (const auto& c : checks) {
    try {
      out.push_back(c());
    } catch (const std::exception& e) {
      out.push_back({"(check threw)", false, e.what()});
    }
  }
  return out;
}

}  // namespace pisonet::cli
