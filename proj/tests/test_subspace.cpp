#include "doctest.h"

#include "oblique/subspace.hpp"
#include "test_util.hpp"

using namespace oblique;
using namespace testutil;

TEST_SUITE("subspace") {

TEST_CASE("from_columns orthonormalizes and rejects dependent input") {
  Matrix cols(3, 2);
  cols << 1, 1, 0, 1, 0, 0;
  SubspaceBasis s = SubspaceBasis::from_columns(cols);
  CHECK(s.dim() == 2);
  CHECK((s.basis.transpose() * s.basis - Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK(s.contains(cols));

  Matrix dep(3, 2);
  dep << 1, 2, 1, 2, 0, 0;
  CHECK_THROWS_AS(SubspaceBasis::from_columns(dep), InvalidInput);
}

TEST_CASE("span keeps only the directions above the rank cutoff") {
  Matrix cols(3, 3);
  cols << 1, 2, 0, 0, 0, 1, 0, 0, 0;
  SubspaceBasis s = SubspaceBasis::span(cols);
  CHECK(s.dim() == 2);
  CHECK(s.contains(cols));
}

TEST_CASE("null and range spaces of diag(1,0)") {
  Matrix a(2, 2);
  a << 1, 0, 0, 0;
  SubspaceBasis n = null_space(a);
  SubspaceBasis r = range_space(a);
  REQUIRE(n.dim() == 1);
  REQUIRE(r.dim() == 1);
  CHECK(std::abs(std::abs(n.basis(1, 0)) - 1.0) < 1e-14);
  CHECK(std::abs(std::abs(r.basis(0, 0)) - 1.0) < 1e-14);
  CHECK(numerical_rank(a) == 1);
}

TEST_CASE("oblique projection onto the x-axis along the diagonal") {
  Matrix ex(2, 1), diag(2, 1);
  ex << 1, 0;
  diag << 1, 1;
  SplitPair split = oblique_projection(SubspaceBasis::from_columns(ex),
                                       SubspaceBasis::from_columns(diag));
  Matrix expect(2, 2);
  expect << 1, -1, 0, 0;
  CHECK((split.projection - expect).norm() < 1e-12);
}

TEST_CASE("projection is idempotent, fixes onto, kills along") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    Index n = 2 + static_cast<Index>(rng.bits() % 6);
    Index k = 1 + static_cast<Index>(rng.bits() % static_cast<std::uint64_t>(n));
    SubspaceBasis onto = SubspaceBasis::from_columns(rng.matrix(n, k));
    SubspaceBasis along = graph_complement(rng, onto, 0.8);
    SplitPair split = oblique_projection(onto, along);
    const Matrix& p = split.projection;
    CHECK((p * p - p).norm() < 1e-9 * std::max(1.0, p.norm()));
    CHECK((p * onto.basis - onto.basis).norm() < 1e-9);
    if (along.dim() > 0) CHECK((p * along.basis).norm() < 1e-9);
  }
}

TEST_CASE("non-complementary pairs are rejected") {
  Matrix ex(2, 1);
  ex << 1, 0;
  SubspaceBasis x = SubspaceBasis::from_columns(ex);
  CHECK_THROWS_AS(oblique_projection(x, x), NotComplementary);

  Matrix tall(3, 1);
  tall << 1, 0, 0;
  CHECK_THROWS_AS(
      oblique_projection(SubspaceBasis::from_columns(tall),
                         SubspaceBasis::from_columns(Matrix(tall))),
      NotComplementary);
}

TEST_CASE("trivial_intersection distinguishes touching subspaces") {
  Matrix u(3, 1), v(3, 1), w(3, 2);
  u << 1, 0, 0;
  v << 0, 1, 0;
  w << 1, 0, 0, 1, 0, 0;
  CHECK(trivial_intersection(SubspaceBasis::from_columns(u),
                             SubspaceBasis::from_columns(v)));
  CHECK_FALSE(trivial_intersection(SubspaceBasis::from_columns(u),
                                   SubspaceBasis::from_columns(w)));
}

TEST_CASE("operator_norm matches the largest singular value") {
  Matrix a(2, 2);
  a << 3, 0, 0, -4;
  CHECK(operator_norm(a) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(operator_norm(Matrix::Zero(2, 3)) == 0.0);
}

TEST_CASE("require_operator rejects non-finite entries") {
  Matrix bad(1, 1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(require_operator(bad, "test"), InvalidInput);
}

TEST_CASE("same_subspace is basis independent") {
  Rng rng(12);
  Matrix cols = rng.matrix(4, 2);
  SubspaceBasis a = SubspaceBasis::from_columns(cols);
  Matrix mix(2, 2);
  mix << 2, 1, 0, -3;
  SubspaceBasis b = SubspaceBasis::from_columns(cols * mix);
  CHECK(a.same_subspace(b));
  CHECK_FALSE(a.same_subspace(SubspaceBasis::from_columns(rng.matrix(4, 2))));
}

}  // TEST_SUITE
