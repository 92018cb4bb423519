#include "doctest.h"

#include "oblique/geninv.hpp"
#include "test_util.hpp"

using namespace oblique;
using namespace testutil;

namespace {

Matrix diag10() {
  Matrix a(2, 2);
  a << 1, 0, 0, 0;
  return a;
}

}  // namespace

TEST_SUITE("geninv") {

TEST_CASE("moore_penrose matches the SVD pseudoinverse oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 25; ++trial) {
    Index m = 2 + static_cast<Index>(rng.bits() % 5);
    Index n = 2 + static_cast<Index>(rng.bits() % 5);
    Index r = 1 + static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(
                                                      std::min(m, n)));
    Matrix a = random_rank(rng, m, n, r);
    GenInverse gi = moore_penrose(a);
    CHECK((gi.a_plus - pinv_oracle(a)).norm() < 1e-10);
    CHECK(gi.verify());
  }
}

TEST_CASE("oblique complements determine the inverse of diag(1,0)") {
  Matrix rp(2, 1), np(2, 1);
  rp << 1, 1;
  np << 0, 1;
  GenInverse gi = construct_geninv(diag10(), SubspaceBasis::from_columns(rp),
                                   SubspaceBasis::from_columns(np));
  Matrix expect(2, 2);
  expect << 1, 0, 1, 0;
  CHECK((gi.a_plus - expect).norm() < 1e-12);
  CHECK(gi.verify());
  GenInverse::Residuals r = gi.residuals();
  CHECK(r.proj_e < 1e-12);
  CHECK(r.proj_f < 1e-12);
}

TEST_CASE("construct_geninv satisfies the axioms with random oblique splittings") {
  Rng rng(22);
  for (int trial = 0; trial < 25; ++trial) {
    Index m = 2 + static_cast<Index>(rng.bits() % 6);
    Index n = 2 + static_cast<Index>(rng.bits() % 6);
    Index r = 1 + static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(
                                                      std::min(m, n)));
    Matrix a = random_rank(rng, m, n, r);
    GenInverse gi = random_geninv(rng, a);
    GenInverse::Residuals res = gi.residuals();
    double ap = gi.a_plus.norm();
    CHECK(res.inner <= 1e-10 * ap);
    CHECK(res.outer <= 1e-10 * a.norm());
    CHECK(gi.range_plus.same_subspace(range_space(gi.a_plus)));
    CHECK(gi.null_plus.same_subspace(null_space(gi.a_plus)));
  }
}

TEST_CASE("complements that fail to split are rejected") {
  Matrix rp(2, 1), np(2, 1);
  rp << 0, 1;  // equals N(A); cannot complement it
  np << 0, 1;
  CHECK_THROWS_AS(construct_geninv(diag10(), SubspaceBasis::from_columns(rp),
                                   SubspaceBasis::from_columns(np)),
                  NotComplementary);
}

TEST_CASE("perturbation maps of the rank-one worked example") {
  GenInverse gi = moore_penrose(diag10());
  Matrix t(2, 2);
  t << 1, 0.2, 0.3, 0.06;
  PerturbationContext ctx = make_perturbation(gi, t);
  Matrix c_expect(2, 2), d_expect(2, 2);
  c_expect << 1, 0, 0.3, 1;
  d_expect << 1, 0.2, 0, 1;
  CHECK((ctx.c_map - c_expect).norm() < 1e-14);
  CHECK((ctx.d_map - d_expect).norm() < 1e-14);
  CHECK(ctx.in_ball);

  ConditionReport rep = condition_report(ctx);
  CHECK(rep.all());
  CHECK(rep.consistent());

  GenInverse ti = perturbed_inverse(ctx);
  Matrix b_expect(2, 2);
  b_expect << 1, 0, 0, 0;
  CHECK((ti.a_plus - b_expect).norm() < 1e-12);
  CHECK(ti.verify());
}

TEST_CASE("a rank jump inside the ball fails all seven conditions") {
  GenInverse gi = moore_penrose(diag10());
  Matrix t(2, 2);
  t << 1, 0, 0, 1e-3;
  PerturbationContext ctx = make_perturbation(gi, t);
  REQUIRE(ctx.in_ball);
  ConditionReport rep = condition_report(ctx);
  CHECK(rep.consistent());
  for (bool h : rep.holds) CHECK_FALSE(h);
  CHECK_FALSE(rank_class_preserved(ctx));
  CHECK_THROWS_AS(perturbed_inverse(ctx), NoInverseInBall);
}

TEST_CASE("the seven conditions agree on random in-ball perturbations") {
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    Index m = 2 + static_cast<Index>(rng.bits() % 5);
    Index n = 2 + static_cast<Index>(rng.bits() % 5);
    Index r = 1 + static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(
                                                      std::min(m, n)));
    Matrix a = random_rank(rng, m, n, r);
    GenInverse gi = random_geninv(rng, a);
    Matrix t = scaled_perturbation(rng, gi, rng.uniform(0.05, 0.9));
    PerturbationContext ctx = make_perturbation(gi, t);
    REQUIRE(ctx.in_ball);
    ConditionReport rep = condition_report(ctx);
    CHECK(rep.consistent());
    CHECK(rank_class_preserved(ctx) == rep.holds[0]);
    if (rep.holds[0]) {
      GenInverse ti = perturbed_inverse(ctx);
      CHECK(ti.verify(1e-8));
      CHECK(ti.range_plus.same_subspace(gi.range_plus));
      CHECK(ti.null_plus.same_subspace(gi.null_plus));
    }
  }
}

TEST_CASE("perturbed_inverse requires the ball") {
  GenInverse gi = moore_penrose(diag10());
  Matrix t(2, 2);
  t << 1, 0, 2, 0;
  PerturbationContext ctx = make_perturbation(gi, t);
  CHECK_FALSE(ctx.in_ball);
  CHECK_THROWS_AS(perturbed_inverse(ctx), OutOfBall);
}

TEST_CASE("locally fine detection accepts a rank-stable family") {
  GenInverse gi = moore_penrose(diag10());
  OperatorFamily family = [](const Vector& x) {
    Matrix t(2, 2);
    t << 1, x(0), 0, 0;
    return t;
  };
  Vector x0 = Vector::Zero(1);
  LocallyFineReport rep = locally_fine_detect(family, x0, gi, 0.1, 32);
  CHECK(rep.locally_fine);
  CHECK(rep.inverse_gap.size() == 32);
  for (double g : rep.inverse_gap) CHECK(g < 1.0);
  CHECK_FALSE(rep.failing_sample.has_value());
}

TEST_CASE("locally fine detection rejects a rank-jumping family with a witness") {
  GenInverse gi = moore_penrose(diag10());
  OperatorFamily family = [](const Vector& x) {
    Matrix t(2, 2);
    t << 1, 0, 0, x(0);
    return t;
  };
  Vector x0 = Vector::Zero(1);
  LocallyFineReport rep = locally_fine_detect(family, x0, gi, 0.1, 32);
  CHECK_FALSE(rep.locally_fine);
  CHECK(rep.failing_sample.has_value());
}

TEST_CASE("rank preservation does not depend on the chosen inverse") {
  Rng rng(24);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = random_rank(rng, 4, 3, 2);
    GenInverse g1 = moore_penrose(a);
    GenInverse g2 = random_geninv(rng, a, 0.4);
    double delta = std::min(1.0 / operator_norm(g1.a_plus),
                            1.0 / operator_norm(g1.a_plus * a * g2.a_plus));
    Matrix dt = rng.matrix(4, 3);
    Matrix t = a + dt * (0.5 * delta / operator_norm(dt));
    CHECK(geninv_independence_check(a, g1, g2, t));
  }
}

TEST_CASE("independence check refuses points outside the shared ball") {
  Matrix a = diag10();
  GenInverse g1 = moore_penrose(a);
  Rng rng(25);
  GenInverse g2 = random_geninv(rng, a, 0.4);
  Matrix t(2, 2);
  t << 1, 0, 0, 5;
  CHECK_THROWS_AS(geninv_independence_check(a, g1, g2, t), OutOfBall);
}

}  // TEST_SUITE
