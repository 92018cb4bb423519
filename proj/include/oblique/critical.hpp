#pragma once

#include "oblique/leaf.hpp"

namespace oblique {

/* A candidate constrained critical point: the point, the gradient of the
 * objective there, and a basis of the constraint-set tangent space. */
struct ConstraintSpec {
  SubspaceBasis tangent_basis;
  Vector x0;
  Vector gradient;
};

/* max |<g, e>| over unit vectors e of the tangent space, normalized by
 * 1 / (1 + ||g||); zero exactly when the gradient annihilates the tangent
 * space.  An empty tangent basis gives 0 by convention (degenerate
 * constraint: every point is vacuously critical). */
double criticality_residual(const ConstraintSpec& spec);

struct SweepEntry {
  std::size_t node = 0;
  Vector grid_point;  // M0 coordinates
  double value = 0.0;
  double residual = 0.0;
};

/* Evaluates the criticality residual at every interior node of a leaf sample,
 * with tangent frames taken from central differences of the reconstruction
 * between neighboring nodes.  Sorted by residual, ascending. */
std::vector<SweepEntry> sweep_candidates(
    const std::function<double(const Vector&)>& f,
    const std::function<Vector(const Vector&)>& gradient, const LeafSample& leaf);

}  // namespace oblique
