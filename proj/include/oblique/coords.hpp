#pragma once

#include "oblique/subspace.hpp"

namespace oblique {

/* The unique alpha in B(E0, E*) with E1 = { e + alpha e : e in E0 }, defined
 * whenever E0 and E1 are both complements of E*.  The matrix is expressed in
 * the stored orthonormal bases of E0 (domain) and E* (codomain). */
struct CoordinateOperator {
  SubspaceBasis e0;
  SubspaceBasis e_star;
  Matrix alpha;  // dim(E*) x dim(E0)
};

/* alpha = P(onto E* along E0) ∘ P(onto E1 along E*) restricted to E0. */
CoordinateOperator coordinate_operator(const SubspaceBasis& e0,
                                       const SubspaceBasis& e1,
                                       const SubspaceBasis& e_star,
                                       double tol = kDefaultTol);

/* Rebuilds E1 = { e + alpha e } from the coordinate operator. */
SubspaceBasis graph_subspace(const CoordinateOperator& co, double tol = kDefaultTol);

/* Membership in the co-final set of E*: M ⊕ E* = ambient. */
bool cofinal_member(const SubspaceBasis& m, const SubspaceBasis& e_star,
                    double tol = kDefaultTol);

}  // namespace oblique
