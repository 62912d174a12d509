#include "fixtures.hpp"
#include "tempdir.hpp"

#include "pisonet/pipeline.hpp"

#include <doctest.h>

using namespace pisonet;

namespace {

RunConfig tiny(const char* family) {
  RunConfig c;
  c.family = make_family(family, 2, {{"train_count", 2}, {"test_count", 2}});
  c.decoder.layers = 1;
  c.decoder.cond_width = 4;
  c.decoder.time_width = 4;
  c.latent.velocity_cost = 2.0;
  c.train.adam_steps = 4;
  c.train.lbfgs_steps = 2;
  c.train.collocation_count = 8;
  return c;
}

}  // namespace

TEST_CASE("run configuration accepts the short family form") {
  const auto c = json::parse(R"({"family": {"name": "obstacle", "num_agents": 3, "overrides": {"horizon": 5.0}},
                                 "init_seed": 11})").get<RunConfig>();
  CHECK(c.family.num_agents == 3);
  CHECK(c.family.horizon == 5.0);
  CHECK(c.init_seed == 11);
  const auto back = json::parse(json(c).dump()).get<RunConfig>();
  CHECK(json(back) == json(c));
}

TEST_CASE("datasets follow the family splits") {
  const auto fam = make_family("obstacle", 2);
  const auto d = family_split(fam, Split::test);
  CHECK(d.insts.size() == static_cast<std::size_t>(fam.test_count));
  CHECK(d.thetas[3] == encode_theta(sample_instance(fam, Split::test, 3), fam));
  CHECK(nominal_dataset(fam).insts.size() == 1);
}

TEST_CASE("trained model metadata and reload") {
  const auto cfg = tiny("free");
  const auto m = train_model(cfg);
  CHECK(m.report.loss.size() == 6);
  const json meta = model_meta(cfg, m);
  CHECK(meta.at("family_digest") == family_digest(cfg.family));
  CHECK_FALSE(meta.dump().find("seconds") != std::string::npos);
  fixture::TempDir dir;
  save_checkpoint(dir / "m.pisn", m.weights, meta);
  const auto lm = load_model(dir / "m.pisn");
  CHECK(json(lm.family) == json(cfg.family));
  CHECK(lm.bp.eps == final_barrier(m.report).eps);
  CHECK(lm.pre() == nullptr);
}

TEST_CASE("composed latent needs a pretrained decoder") {
  auto cfg = tiny("obstacle");
  cfg.latent.variant = LatentVariant::lqr_composed;
  CHECK_THROWS_AS(train_model(cfg), DomainError);
  auto nom = tiny("obstacle");
  nom.nominal_only = true;
  const auto pm = train_model(nom);
  fixture::TempDir dir;
  save_checkpoint(dir / "nom.pisn", pm.weights, model_meta(nom, pm));
  const auto pre = pretrained_from_checkpoint(load_checkpoint(dir / "nom.pisn"));
  CHECK(pre.theta == encode_theta(nominal_instance(nom.family), nom.family));
  const auto m = train_model(cfg, &pre);
  CHECK(m.report.loss.size() == 6);
}
