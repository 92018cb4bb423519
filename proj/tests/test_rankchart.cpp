#include "doctest.h"

#include "oblique/rankchart.hpp"
#include "test_util.hpp"

using namespace oblique;
using namespace testutil;

namespace {

Matrix diag10() {
  Matrix a(2, 2);
  a << 1, 0, 0, 0;
  return a;
}

ChartData chart10() { return make_chart(moore_penrose(diag10())); }

/* Rank-preserving step away from X: perturb thin SVD factors. */
Matrix factor_step(Rng& rng, const Matrix& x, Index r, double size) {
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix u = svd.matrixU().leftCols(r) + size * rng.matrix(x.rows(), r);
  Matrix v = svd.matrixV().leftCols(r) + size * rng.matrix(x.cols(), r);
  Vector s = svd.singularValues().head(r);
  return u * s.asDiagonal() * v.transpose();
}

}  // namespace

TEST_SUITE("rankchart") {

TEST_CASE("tangent and complement dimensions obey the rank law") {
  Rng rng(51);
  for (auto [m, n, r] : {std::tuple<Index, Index, Index>{2, 2, 1},
                         {4, 3, 2},
                         {5, 4, 1}}) {
    Matrix x = random_rank(rng, m, n, r);
    OperatorPoint p{x, moore_penrose(x)};
    SubspaceBasis tangent = tangent_space(p);
    SubspaceBasis complement = complement_space(p);
    CHECK(tangent.dim() == m * n - (m - r) * (n - r));
    CHECK(complement.dim() == (m - r) * (n - r));
    CHECK(is_complement(tangent, complement));
  }
}

TEST_CASE("the tangent space at diag(1,0) excludes the off-corner direction") {
  OperatorPoint p{diag10(), moore_penrose(diag10())};
  SubspaceBasis tangent = tangent_space(p);
  CHECK(tangent.dim() == 3);
  Matrix e11 = Matrix::Zero(2, 2), e22 = Matrix::Zero(2, 2);
  e11(0, 0) = 1.0;
  e22(1, 1) = 1.0;
  CHECK(tangent.contains(vec(e11)));
  CHECK_FALSE(tangent.contains(vec(e22)));
}

TEST_CASE("operations that need the splittings demand a generalized inverse") {
  OperatorPoint bare{diag10(), std::nullopt};
  CHECK_THROWS_AS(tangent_space(bare), NeedsSplitting);
  CHECK_THROWS_AS(complement_space(bare), NeedsSplitting);
}

TEST_CASE("the chart projector splits flattened operator space") {
  ChartData chart = chart10();
  CHECK(chart.w_radius == doctest::Approx(1.0));
  CHECK((chart.p_m0 * chart.p_m0 - chart.p_m0).norm() < 1e-12);
  CHECK((chart.p_m0 * chart.m0.basis - chart.m0.basis).norm() < 1e-12);
  CHECK((chart.p_m0 * chart.e_star.basis).norm() < 1e-12);
}

TEST_CASE("tangent_projection is idempotent and lands in the moving tangent") {
  Rng rng(52);
  ChartData chart = chart10();
  for (int trial = 0; trial < 20; ++trial) {
    Matrix x = factor_step(rng, diag10(), 1, 0.05);
    Matrix t = rng.matrix(2, 2);
    Matrix once = tangent_projection(chart, x, t);
    Matrix twice = tangent_projection(chart, x, once);
    CHECK((twice - once).norm() < 1e-10 * std::max(1.0, once.norm()));

    // Members of M(X) map N(X) into R(X).
    SubspaceBasis nx = null_space(x);
    SubspaceBasis rx = range_space(x);
    CHECK(rx.contains(once * nx.basis, 1e-8));

    // At the anchor itself the projection is the chart projector.
    Matrix at_anchor = tangent_projection(chart, diag10(), t);
    CHECK((vec(at_anchor) - chart.p_m0 * vec(t)).norm() < 1e-12);
  }
}

TEST_CASE("chart forward matches the worked rank-one example") {
  ChartData chart = chart10();
  Matrix x(2, 2);
  x << 1, 0.2, 0.3, 0.06;
  Matrix d = chart_forward(chart, x);
  Matrix expect(2, 2);
  expect << 1, 0.2, 0.3, 0;
  CHECK((d - expect).norm() < 1e-12);
  CHECK((chart_inverse(chart, d) - x).norm() < 1e-12);
}

TEST_CASE("forward and inverse round trip across random in-ball points") {
  Rng rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix a = random_rank(rng, 4, 3, 2);
    ChartData chart = make_chart(moore_penrose(a));
    Matrix dx = rng.matrix(4, 3);
    Matrix x = a + dx * (0.4 / (operator_norm(dx) * operator_norm(chart.anchor.a_plus)));
    Matrix d = chart_forward(chart, x);
    CHECK((chart_inverse(chart, d) - x).norm() < 1e-12 * (1.0 + x.norm()));
    Matrix t = chart.anchor.a  // points of M0 near A map back into the stratum
               + unvec(chart.p_m0 * vec(Matrix(0.05 * rng.matrix(4, 3))), 4, 3);
    CHECK((chart_forward(chart, chart_inverse(chart, t)) - t).norm() <
          1e-12 * (1.0 + t.norm()));
  }
}

TEST_CASE("points outside the forward ball are rejected") {
  ChartData chart = chart10();
  Matrix x(2, 2);
  x << 1, 0, 2, 0;  // ||(X - A) A+|| = 2
  CHECK_THROWS_AS(chart_forward(chart, x), OutOfBall);
}

TEST_CASE("rectification sends rank-one neighbors into the tangent plane") {
  Rng rng(54);
  ChartData chart = chart10();
  for (int trial = 0; trial < 25; ++trial) {
    Matrix x = factor_step(rng, diag10(), 1, 0.04);
    Vector d = vec(chart_forward(chart, x));
    CHECK((d - chart.p_m0 * d).norm() < 1e-8 * (1.0 + d.norm()));
    CHECK(stratum_membership(chart, x));
  }
}

TEST_CASE("a rank jump is visible to stratum membership") {
  ChartData chart = chart10();
  Matrix x(2, 2);
  x << 1, 0, 0, 1e-3;
  CHECK_FALSE(stratum_membership(chart, x));
  Matrix far(2, 2);
  far << 1, 0, 0, 2;
  CHECK_THROWS_AS(stratum_membership(chart, far), OutOfBall);
}

TEST_CASE("the tangent coordinate operator rejects bad inputs") {
  ChartData chart = chart10();
  Matrix x(2, 2);
  x << 1, 0.2, 0.3, 0.06;
  Matrix off_m0 = Matrix::Zero(2, 2);
  off_m0(1, 1) = 1.0;  // E* direction, not a tangent vector at the anchor
  CHECK_THROWS_AS(alpha_tangent(chart, x, off_m0), InvalidDirection);

  Matrix jumped(2, 2);
  jumped << 1, 0, 0, 0.5;  // inside W but off the stratum
  Matrix dx = Matrix::Zero(2, 2);
  dx(0, 0) = 1.0;
  CHECK_THROWS_AS(alpha_tangent(chart, jumped, dx), NotInS);
}

TEST_CASE("leaf_psi_rank completes the worked tangent point") {
  ChartData chart = chart10();
  Matrix z(2, 2);
  z << 1, 0.2, 0.3, 0;
  Matrix psi = leaf_psi_rank(chart, z);
  Matrix expect = Matrix::Zero(2, 2);
  expect(1, 1) = 0.06;
  CHECK((psi - expect).norm() < 1e-12);
  CHECK(numerical_rank(z + psi) == 1);

  CHECK(leaf_psi_rank(chart, diag10()).norm() < 1e-12);
  Matrix off(2, 2);
  off << 1, 0, 0, 0.3;
  CHECK_THROWS_AS(leaf_psi_rank(chart, off), InvalidInput);
}

TEST_CASE("leaf_psi_rank lands on the stratum from random tangent points") {
  Rng rng(55);
  for (int trial = 0; trial < 15; ++trial) {
    Matrix a = random_rank(rng, 3, 3, 1);
    ChartData chart = make_chart(moore_penrose(a));
    Matrix z = a + unvec(chart.p_m0 * vec(Matrix(0.05 * rng.matrix(3, 3))), 3, 3);
    Matrix psi = leaf_psi_rank(chart, z);
    CHECK(numerical_rank(z + psi) == 1);
    Vector flat = vec(psi);
    CHECK((chart.p_m0 * flat).norm() < 1e-10 * (1.0 + flat.norm()));
  }
}

TEST_CASE("two nearby charts agree on shared stratum samples") {
  Rng rng(56);
  Matrix a = diag10();
  Matrix b = factor_step(rng, a, 1, 0.05);
  ChartData chart_a = make_chart(moore_penrose(a));
  ChartData chart_b = make_chart(moore_penrose(b));
  std::vector<Matrix> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(factor_step(rng, a, 1, 0.03));
  TransitionReport rep = atlas_transition_check(chart_a, chart_b, samples);
  CHECK(rep.max_rectification_residual < 1e-8);
  CHECK(rep.residuals.size() == samples.size());
  CHECK(rep.max_jacobian_step < 1.0);

  std::vector<Matrix> bad = {Matrix::Zero(3, 3)};
  CHECK_THROWS_AS(atlas_transition_check(chart_a, chart_b, bad), InvalidInput);
}

}  // TEST_SUITE
