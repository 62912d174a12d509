#include "fixtures.hpp"
#include "tempdir.hpp"

#include "pisonet/io.hpp"
#include "pisonet/pipeline.hpp"

#include <doctest.h>

#include <cstring>

using namespace pisonet;

namespace {

CheckpointError::Kind load_error(const std::filesystem::path& p) {
  try {
    load_checkpoint(p);
  } catch (const CheckpointError& e) {
    return e.kind;
  }
  FAIL("checkpoint loaded");
  return CheckpointError::Kind::metadata;
}

template <class T>
T roundtrip(const T& v) {
  return json::parse(json(v).dump()).get<T>();
}

}  // namespace

TEST_CASE("domain types survive a JSON round trip") {
  for (const char* name : {"free", "obstacle", "variable_radius_obstacle", "heterogeneous_2d", "heterogeneous_3d", "maze"}) {
    const auto fam = make_family(name, 4);
    INFO(name);
    CHECK(json(roundtrip(fam)) == json(fam));
    const auto inst = sample_instance(fam, Split::test, 1);
    CHECK(json(roundtrip(inst)) == json(inst));
    CHECK(instance_digest(roundtrip(inst)) == instance_digest(inst));
  }
  DecoderConfig dc;
  dc.arch = Architecture::mlp;
  dc.activation = Activation::silu;
  CHECK(json(roundtrip(dc)) == json(dc));
  LatentConfig lc;
  lc.variant = LatentVariant::lqr_composed;
  lc.rotation_rate = -0.3;
  lc.composed_checkpoint = "a.pisn";
  CHECK(json(roundtrip(lc)) == json(lc));
  TrainConfig tc;
  tc.anneal.enabled = true;
  tc.weight_decay = 1e-6;
  CHECK(json(roundtrip(tc)) == json(tc));
}

TEST_CASE("doubles are written losslessly") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(std::stod(format_double(x)) == x);
  const Vec v = Eigen::Vector3d(0.1, 1.0 / 7.0, -3.0);
  CHECK(vec_from_json(json::parse(vec_to_json(v).dump())) == v);
}

TEST_CASE("unknown fields are rejected") {
  json j = nominal_instance(make_family("free", 2));
  j["speed_limit"] = 3;
  CHECK_THROWS_AS(j.get<ProblemInstance>(), DomainError);
  json t = TrainConfig{};
  t["anneal"]["bogus"] = 1;
  CHECK_THROWS_AS(t.get<TrainConfig>(), DomainError);
  CHECK_THROWS_AS(json::parse(R"({"family": {"name": "free", "num_agents": 2, "x": 1}})").get<RunConfig>(), DomainError);
}

TEST_CASE("digests are stable and sensitive") {
  const auto fam = make_family("free", 4);
  auto other = fam;
  other.horizon = 9.0;
  CHECK(family_digest(fam) == family_digest(make_family("free", 4)));
  CHECK(family_digest(fam) != family_digest(other));
  CHECK(family_digest(fam).size() == 16);
}

TEST_CASE("checkpoint round trip is bit exact") {
  fixture::TempDir dir;
  const auto w = fixture::random_decoder(DecoderConfig{}, 2, 4, 3, 2.0, 9);
  save_checkpoint(dir / "w.pisn", w, {{"family_digest", family_digest(make_family("free", 2))}});
  const auto ck = load_checkpoint(dir / "w.pisn");
  REQUIRE(ck.weights.params.size() == w.params.size());
  CHECK(std::memcmp(ck.weights.params.data(), w.params.data(), sizeof(double) * w.params.size()) == 0);
  CHECK(ck.weights.num_agents == 2);
  CHECK(ck.weights.horizon == 2.0);
  CHECK(checkpoint_matches_family(ck, make_family("free", 2)));
  CHECK_FALSE(checkpoint_matches_family(ck, make_family("obstacle", 2)));
}

TEST_CASE("checkpoint corruption is classified") {
  fixture::TempDir dir;
  const auto w = fixture::random_decoder(DecoderConfig{}, 2, 4, 3, 2.0, 9);
  save_checkpoint(dir / "w.pisn", w);
  const std::string good = fixture::slurp(dir / "w.pisn");
  const auto bad = dir / "bad.pisn";

  fixture::spit(bad, good.substr(0, good.size() - 20));
  CHECK(load_error(bad) == CheckpointError::Kind::truncated);

  std::string s = good;
  s[0] = 'X';
  fixture::spit(bad, s);
  CHECK(load_error(bad) == CheckpointError::Kind::magic);

  s = good;
  s[4] = 9;
  fixture::spit(bad, s);
  CHECK(load_error(bad) == CheckpointError::Kind::version);

  s = good;
  s[s.size() - 12] ^= 0x40;
  fixture::spit(bad, s);
  CHECK(load_error(bad) == CheckpointError::Kind::crc);

  fixture::spit(bad, good + "x");
  CHECK(load_error(bad) == CheckpointError::Kind::length);

  s = good;
  s[17] = '[';
  fixture::spit(bad, s);
  CHECK(load_error(bad) == CheckpointError::Kind::metadata);

  CHECK_THROWS_AS(load_checkpoint(dir / "missing.pisn"), IoError);
  auto wrong = w;
  wrong.params.conservativeResize(3);
  CHECK_THROWS_AS(save_checkpoint(dir / "x.pisn", wrong), DomainError);
}

TEST_CASE("trajectory CSV round trip and header") {
  const auto inst = fixture::obstacle_pair();
  LatentConfig lc;
  lc.velocity_cost = 2.0;
  const auto lat = solve_latent(inst, lc, TimeGrid::uniform(inst.horizon, 7));
  const PhaseTrajectory tr{lat.grid, lat.y, lat.q};
  const std::string text = trajectory_csv(tr, inst);
  CHECK(text.rfind("t,agent,w0,w1,v0,v1,pw0,pw1,pv0,pv1,u0,u1\n", 0) == 0);
  const auto tab = parse_trajectory_csv(text);
  CHECK(tab.num_agents == 2);
  CHECK(tab.spatial_dim == 2);
  CHECK(tab.traj.x == tr.x);
  CHECK(tab.traj.p == tr.p);
  CHECK(tab.controls(3, 2) == conjugate_control(inst, 1, tr.p.row(3).segment(4, 4).transpose())[0]);
  CHECK_THROWS(parse_trajectory_csv("t,agent,w0,v0\n0,0,1,2\n"));
  CHECK_THROWS(parse_trajectory_csv("t,agent,a0,v0,pw0,pv0,u0\n0,0,1,2,3,4,5\n"));
}
