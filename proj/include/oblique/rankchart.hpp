#pragma once

#include "oblique/geninv.hpp"

#include <optional>
#include <vector>

namespace oblique {

/* A matrix X in B(R^n, R^m) together with a generalized inverse when one is
 * attached; operations that need the splittings X induces require it. */
struct OperatorPoint {
  Matrix x;
  std::optional<GenInverse> geninv;
};

/* M(X) = { T : T N(X) ⊂ R(X) }, the tangent space of the fixed-rank stratum
 * through X, as a subspace of column-major flattened B(R^n, R^m). */
SubspaceBasis tangent_space(const OperatorPoint& p, double tol = kDefaultTol);

/* E_X = { T : R(T) ⊂ N(X+), N(T) ⊃ R(X+) }, the complement of M(X) carved out
 * by the splittings of X; dim = (n - r)(m - r). */
SubspaceBasis complement_space(const OperatorPoint& p, double tol = kDefaultTol);

/* Chart bookkeeping at an anchor A: the flattened tangent/complement pair at
 * the anchor, the projector onto M0 along E*, and the anchor ball radius. */
struct ChartData {
  GenInverse anchor;
  Index rows = 0, cols = 0;
  SubspaceBasis m0;      // M(A), flattened
  SubspaceBasis e_star;  // E_A, flattened
  Matrix p_m0;           // projector onto M0 along E* (flattened coordinates)
  Matrix aap;            // A A+
  Matrix apa;            // A+ A
  double w_radius = 0.0;  // 1 / ||A+||
};

ChartData make_chart(const GenInverse& anchor, double tol = kDefaultTol);

/* Projection of T onto M(X) along E* for X co-final with the anchor's E*:
 *   T  ->  P(onto R(X) along N(A+)) T
 *        + P(onto N(A+) along R(X)) T P(onto R(A+) along N(X)). */
Matrix tangent_projection(const ChartData& ctx, const Matrix& x, const Matrix& t,
                          double tol = kDefaultTol);

/* D(X) = (X - A) A+ A + C^-1 X on V1 = { ||(X - A) A+|| < 1 }.  Rectifies the
 * rank stratum of A: X has rank(A) iff D(X) lands in M0 (inside W). */
Matrix chart_forward(const ChartData& ctx, const Matrix& x);

/* D*(T) = T A+ A + C(A+, T) T (I - A+ A), the inverse of D on V1. */
Matrix chart_inverse(const ChartData& ctx, const Matrix& t);

/* Coordinate operator of the tangent family along the stratum, evaluated on a
 * tangent direction dX in M0:
 *   alpha(X) dX = P_N(A+) (C^-1 dX A+ C^-1 X - C^-1 dX) P_N(A),
 * with the outer factors the anchor projections onto N(A+) and onto N(A). */
Matrix alpha_tangent(const ChartData& ctx, const Matrix& x, const Matrix& dx,
                     double tol = 1e-8);

/* Solves Phi0(T) = Z by damped Newton inside M0 with the analytic derivative
 *   Phi0'(T) dT = dT A+ A + A A+ (dT A+ T + T A+ dT)(I - A+ A),
 * then returns Psi(Z) = Phi1(T).  Z + Psi(Z) is the rank-r leaf point over Z. */
Matrix leaf_psi_rank(const ChartData& ctx, const Matrix& z, double tol = 1e-12);

/* rank X == rank A, valid inside W = { ||X - A|| < 1 / ||A+|| }. */
bool stratum_membership(const ChartData& ctx, const Matrix& x,
                        double tol = kDefaultTol);

struct TransitionReport {
  double max_rectification_residual = 0.0;
  double max_jacobian_step = 0.0;  // max FD-Jacobian gap between consecutive samples
  std::vector<double> residuals;
};

/* Checks chart compatibility on shared samples: mapping a sample through
 * chart b and back out, then through chart a, must land in M0 of a; the
 * finite-difference Jacobians of the transition at consecutive samples are
 * reported for a smoothness estimate. */
TransitionReport atlas_transition_check(const ChartData& a, const ChartData& b,
                                        const std::vector<Matrix>& samples);

}  // namespace oblique
