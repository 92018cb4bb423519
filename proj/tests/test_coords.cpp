#include "doctest.h"

#include "oblique/coords.hpp"
#include "test_util.hpp"

using namespace oblique;
using namespace testutil;

namespace {

SubspaceBasis axis(Index ambient, Index i) {
  Matrix col = Matrix::Zero(ambient, 1);
  col(i, 0) = 1.0;
  return SubspaceBasis::from_columns(col);
}

}  // namespace

TEST_SUITE("coords") {

TEST_CASE("a line through the origin has its slope as coordinate") {
  SubspaceBasis e0 = axis(2, 0);
  SubspaceBasis e_star = axis(2, 1);
  Matrix line(2, 1);
  line << 1, -0.5;
  SubspaceBasis e1 = SubspaceBasis::from_columns(line);
  CoordinateOperator op = coordinate_operator(e0, e1, e_star);
  REQUIRE(op.alpha.rows() == 1);
  REQUIRE(op.alpha.cols() == 1);
  // alpha is expressed against the orthonormal bases of E0 and E*, whose sign
  // choices cancel in the reconstructed graph below.
  CHECK(std::abs(std::abs(op.alpha(0, 0)) - 0.5) < 1e-12);
  CHECK(graph_subspace(op).same_subspace(e1));
}

TEST_CASE("the graph of the zero operator is E0 itself") {
  SubspaceBasis e0 = axis(3, 0);
  SubspaceBasis e_star = SubspaceBasis::from_columns([] {
    Matrix m(3, 2);
    m << 0, 0, 1, 0, 0, 1;
    return m;
  }());
  CoordinateOperator op = coordinate_operator(e0, e0, e_star);
  CHECK(op.alpha.norm() < 1e-12);
  CHECK(graph_subspace(op).same_subspace(e0));
}

TEST_CASE("graph and coordinate operator are mutually inverse") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    Index n = 4 + static_cast<Index>(rng.bits() % 3);
    Index k = 1 + static_cast<Index>(rng.bits() % 3);
    SubspaceBasis e0 = SubspaceBasis::from_columns(rng.matrix(n, k));
    SubspaceBasis e_star = graph_complement(rng, e0, 0.6);
    Matrix alpha = rng.matrix(e_star.dim(), k);
    CoordinateOperator direct{e0, e_star, alpha};
    SubspaceBasis e1 = graph_subspace(direct);
    CoordinateOperator recovered = coordinate_operator(e0, e1, e_star);
    CHECK((recovered.alpha - alpha).norm() < 1e-9 * std::max(1.0, alpha.norm()));
  }
}

TEST_CASE("alpha does not depend on how E1 is presented") {
  Rng rng(32);
  SubspaceBasis e0 = SubspaceBasis::from_columns(rng.matrix(5, 2));
  SubspaceBasis e_star = graph_complement(rng, e0, 0.5);
  Matrix alpha = rng.matrix(3, 2);
  SubspaceBasis e1 = graph_subspace({e0, e_star, alpha});

  Matrix mix(2, 2);
  mix << 1, 2, -1, 1;
  SubspaceBasis e1_remixed = SubspaceBasis::from_columns(e1.basis * mix);
  CoordinateOperator a = coordinate_operator(e0, e1, e_star);
  CoordinateOperator b = coordinate_operator(e0, e1_remixed, e_star);
  CHECK((a.alpha - b.alpha).norm() < 1e-9);
}

TEST_CASE("members that fail to complement E* are rejected") {
  SubspaceBasis e0 = axis(2, 0);
  SubspaceBasis e_star = axis(2, 1);
  CHECK_THROWS_AS(coordinate_operator(e0, e_star, e_star), NotComplementary);
  CHECK(cofinal_member(e0, e_star));
  CHECK_FALSE(cofinal_member(e_star, e_star));
}

TEST_CASE("dimension mismatches are rejected") {
  SubspaceBasis e0 = axis(2, 0);
  SubspaceBasis e_star = axis(2, 1);
  Matrix plane(2, 2);
  plane << 1, 0, 0, 1;
  // E1 must be co-final, i.e. a complement of E*; a full plane is not.
  CHECK_THROWS_AS(
      coordinate_operator(e0, SubspaceBasis::from_columns(plane), e_star),
      NotComplementary);
}

}  // TEST_SUITE
