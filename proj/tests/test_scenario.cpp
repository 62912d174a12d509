#include "fixtures.hpp"

#include "pisonet/io.hpp"

#include <doctest.h>

using namespace pisonet;

TEST_CASE("inverse radius drag law") {
  const auto fam = make_family("heterogeneous_2d", 4);
  CHECK(family_drag(fam, 0.02) == doctest::Approx(1.0));
  CHECK(family_drag(fam, 0.1) == doctest::Approx(0.2));
  const auto inst = sample_instance(fam, Split::test, 2);
  for (const auto& a : inst.agents) CHECK(a.drag_coeff == doctest::Approx(1.0 / (50.0 * a.radius)));
  CHECK(family_drag(make_family("heterogeneous_3d", 2), 0.15) == 0.0);
}

TEST_CASE("theta encoding is normalised and invertible") {
  for (const char* name : {"free", "obstacle", "variable_radius_obstacle", "heterogeneous_2d"}) {
    const auto fam = make_family(name, 4);
    for (int i = 0; i < 10; ++i) {
      const auto inst = sample_instance(fam, Split::train, i);
      const Vec th = encode_theta(inst, fam);
      INFO(name << " " << i);
      REQUIRE(th.size() == theta_dim(fam));
      CHECK(th.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
      const auto back = instance_from_theta(fam, th);
      CHECK((back.x0 - inst.x0).cwiseAbs().maxCoeff() < 1e-12);
      for (int a = 0; a < 4; ++a) CHECK(back.agents[a].radius == doctest::Approx(inst.agents[a].radius));
      CHECK((encode_theta(back, fam) - th).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("variable radius family samples only the obstacle radius") {
  const auto fam = make_family("variable_radius_obstacle", 4);
  CHECK(theta_dim(fam) == 1);
  for (int i = 0; i < 20; ++i) {
    const auto inst = sample_instance(fam, Split::test, i);
    const double r = std::get<Circle>(inst.env.obstacles[0]).radius;
    CHECK(r >= 0.05);
    CHECK(r <= 0.25);
    CHECK(inst.x0 == nominal_instance(fam).x0);
  }
}

TEST_CASE("sampling is deterministic and split separated") {
  const auto fam = make_family("obstacle", 4);
  const json a = sample_instance(fam, Split::train, 4);
  const json b = sample_instance(fam, Split::train, 4);
  const json c = sample_instance(fam, Split::test, 4);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(instance_seed(fam, Split::train, 4) != instance_seed(fam, Split::test, 4));
  auto other = fam;
  other.seed += 1;
  CHECK(json(sample_instance(other, Split::train, 4)) != a);
}

TEST_CASE("perturbations stay inside the family radius") {
  const auto fam = make_family("free", 4);
  const auto nom = nominal_instance(fam);
  for (int i = 0; i < 20; ++i) {
    const auto inst = sample_instance(fam, Split::train, i);
    for (int a = 0; a < 4; ++a) CHECK((inst.x0.row(a).head(2) - nom.x0.row(a).head(2)).norm() <= fam.perturbation_radius + 1e-12);
    CHECK(inst.xT == nom.xT);
  }
}

TEST_CASE("antipodal layout sends agents across the origin") {
  const auto nom = nominal_instance(make_family("free", 4));
  for (int a = 0; a < 4; ++a) CHECK((nom.x0.row(a).head(2) + nom.xT.row(a).head(2)).norm() < 1e-12);
}

TEST_CASE("family overrides merge over defaults") {
  const auto fam = make_family("free", 2, {{"horizon", 4.0}, {"train_count", 3}});
  CHECK(fam.horizon == 4.0);
  CHECK(fam.train_count == 3);
  CHECK(fam.perturbation_radius == 0.05);
  CHECK_THROWS_AS(make_family("nonexistent", 2), DomainError);
  CHECK_THROWS_AS(make_family("free", 0), DomainError);
}

TEST_CASE("ball sampling stays in the ball") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 200; ++k) CHECK(sample_ball(rng, 3, 0.5).norm() <= 0.5);
}
