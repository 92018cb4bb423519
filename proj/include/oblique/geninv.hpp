#pragma once

#include "oblique/subspace.hpp"

#include <array>
#include <functional>
#include <optional>
#include <vector>

namespace oblique {

/* A (1,2) generalized inverse A+ of A : R^n -> R^m, pinned down by the
 * complements R(A+) ⊕ N(A) = R^n and N(A+) ⊕ R(A) = R^m. */
struct GenInverse {
  Matrix a;       // m x n
  Matrix a_plus;  // n x m
  SubspaceBasis range_plus;  // R(A+), subspace of R^n
  SubspaceBasis null_plus;   // N(A+), subspace of R^m

  struct Residuals {
    double inner;   // ||A+ A A+ - A+||
    double outer;   // ||A A+ A - A||
    double proj_e;  // ||A+ A - P(onto R(A+) along N(A))||
    double proj_f;  // ||A A+ - P(onto R(A) along N(A+))||
  };
  Residuals residuals() const;
  bool verify(double tol = kDefaultTol) const;
};

/* Builds the generalized inverse determined by the two complements:
 * range_plus ⊕ N(A) = R^n and R(A) ⊕ null_plus = R^m must both hold. */
GenInverse construct_geninv(const Matrix& a, const SubspaceBasis& range_plus,
                            const SubspaceBasis& null_plus, double tol = kDefaultTol);

/* Orthogonal-complement choice: range_plus = R(A^T), null_plus = N(A^T). */
GenInverse moore_penrose(const Matrix& a, double tol = kDefaultTol);

/* The two perturbation maps attached to T near A:
 *   C = I_F + (T - A) A+   on R^m,
 *   D = I_E + A+ (T - A)   on R^n.
 * Both are invertible whenever ||T - A|| < 1 / ||A+|| (spectral norm). */
struct PerturbationContext {
  GenInverse base;
  Matrix t;
  Matrix c_map;  // m x m
  Matrix d_map;  // n x n
  double gap = 0.0;     // ||T - A||_2 * ||A+||_2
  bool in_ball = false;  // gap < 1 - kBallMargin
};

PerturbationContext make_perturbation(const GenInverse& base, const Matrix& t);

/* The seven equivalent characterizations of T admitting a generalized inverse
 * with the same pair of complements as the base point:
 *   0: R(T) ∩ N(A+) = {0}
 *   1: B = A+ C^-1 = D^-1 A+ is a generalized inverse of T
 *      with R(B) = R(A+) and N(B) = N(A+)
 *   2: R(T) ⊕ N(A+) = F
 *   3: N(T) ⊕ R(A+) = E
 *   4: (I - A+ A) N(T) = N(A)
 *   5: C^-1 T N(A) ⊂ R(A)
 *   6: R(C^-1 T) ⊂ R(A)
 * They are evaluated independently; agreement is a theorem, not an input. */
struct ConditionReport {
  std::array<bool, 7> holds{};

  bool all() const;
  bool consistent() const;  // all seven agree
};

ConditionReport condition_report(const PerturbationContext& ctx, double tol = 1e-8);

/* B = A+ C^-1 (cross-checked against D^-1 A+).  Requires the ball and
 * condition 0; throws NoInverseInBall when T has no inverse with the base
 * complements. */
GenInverse perturbed_inverse(const PerturbationContext& ctx, double tol = kDefaultTol);

/* rank T == rank A inside the perturbation ball. */
bool rank_class_preserved(const PerturbationContext& ctx, double tol = kDefaultTol);

using OperatorFamily = std::function<Matrix(const Vector&)>;

struct LocallyFineReport {
  bool locally_fine = false;
  std::vector<Vector> samples;
  /* ||T(x)+ - T0+|| per sample with the inherited complements, NaN when the
   * sample left the perturbation ball; populated only on success. */
  std::vector<double> inverse_gap;
  std::optional<Vector> failing_sample;
};

/* Samples the parameter ball around x0 quasi-uniformly (seeded, deterministic)
 * and tests condition 0 at every sample.  A sound "no" is definitive; a "yes"
 * is evidence on the sampled set, not a proof over the whole ball. */
LocallyFineReport locally_fine_detect(const OperatorFamily& family, const Vector& x0,
                                      const GenInverse& geninv0, double radius,
                                      int samples, std::uint64_t seed = kDefaultSeed);

/* Whether T preserves rank near A does not depend on which generalized inverse
 * of A is used, inside the smaller ball
 *   ||T - A|| < min(1 / ||A1+||, 1 / ||A1+ A A2+||).
 * Returns true when the two inverses agree on condition 0 at T. */
bool geninv_independence_check(const Matrix& a, const GenInverse& gi1,
                               const GenInverse& gi2, const Matrix& t);

}  // namespace oblique
