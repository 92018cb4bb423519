#pragma once

#include "oblique/common.hpp"

namespace oblique {

/* A linear subspace of R^ambient, stored with an orthonormal basis even when
 * built from oblique data.  dim() == 0 is a valid, first-class value. */
struct SubspaceBasis {
  Index ambient = 0;
  Matrix basis;  // ambient x dim, orthonormal columns

  Index dim() const { return basis.cols(); }

  static SubspaceBasis zero(Index ambient);

  /* Orthonormalizes the given columns.  Throws InvalidInput if they are
   * linearly dependent at the rank tolerance. */
  static SubspaceBasis from_columns(const Matrix& cols, double tol = kDefaultTol);

  /* Numerical span of the columns; dependent columns are allowed and the
   * basis keeps only the directions above the rank cutoff. */
  static SubspaceBasis span(const Matrix& cols, double tol = kDefaultTol);

  /* True when every column of `vectors` lies in the subspace, measured by the
   * orthogonal projection residual against max(1, ||vectors||). */
  bool contains(const Matrix& vectors, double tol = 1e-8) const;

  bool same_subspace(const SubspaceBasis& other, double tol = 1e-8) const;
};

/* A complementary pair U ⊕ V = R^ambient together with the idempotent that
 * projects onto U along V. */
struct SplitPair {
  SubspaceBasis onto;
  SubspaceBasis along;
  Matrix projection;  // ambient x ambient, range = onto, kernel = along
};

void require_operator(const Matrix& a, const char* name);

/* Largest singular value (spectral norm); 0 for an all-zero matrix. */
double operator_norm(const Matrix& a);

Index numerical_rank(const Matrix& a, double tol = kDefaultTol);

SubspaceBasis null_space(const Matrix& a, double tol = kDefaultTol);

SubspaceBasis range_space(const Matrix& a, double tol = kDefaultTol);

/* Projection onto `onto` along `along`.  Throws NotComplementary when the two
 * subspaces fail to split the ambient space at the tolerance. */
SplitPair oblique_projection(const SubspaceBasis& onto, const SubspaceBasis& along,
                             double tol = kDefaultTol);

bool is_complement(const SubspaceBasis& u, const SubspaceBasis& v,
                   double tol = kDefaultTol);

/* True when U ∩ V = {0} at the rank tolerance. */
bool trivial_intersection(const SubspaceBasis& u, const SubspaceBasis& v,
                          double tol = kDefaultTol);

}  // namespace oblique
