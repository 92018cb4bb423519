#include "oblique/coords.hpp"

namespace oblique {

CoordinateOperator coordinate_operator(const SubspaceBasis& e0,
                                       const SubspaceBasis& e1,
                                       const SubspaceBasis& e_star, double tol) {
  if (e0.ambient != e_star.ambient || e1.ambient != e_star.ambient)
    throw InvalidInput("coordinate_operator: ambient dimension mismatch");
  if (!is_complement(e0, e_star, tol))
    throw NotComplementary("coordinate_operator: E0 is not a complement of E*");
  if (!is_complement(e1, e_star, tol))
    throw NotComplementary("coordinate_operator: E1 is not a complement of E*");

  CoordinateOperator co;
  co.e0 = e0;
  co.e_star = e_star;
  if (e0.dim() == 0) {
    co.alpha = Matrix(e_star.dim(), 0);
    return co;
  }

  /* Send e through the projection onto E1 along E*, then keep the E*
   * component of the result (projection along E0). */
  Matrix onto_e1 = oblique_projection(e1, e_star, tol).projection;
  Matrix onto_star = oblique_projection(e_star, e0, tol).projection;
  co.alpha = e_star.basis.transpose() * (onto_star * (onto_e1 * e0.basis));
  return co;
}

SubspaceBasis graph_subspace(const CoordinateOperator& co, double tol) {
  if (co.alpha.rows() != co.e_star.dim() || co.alpha.cols() != co.e0.dim())
    throw InvalidInput("graph_subspace: alpha shape mismatch");
  Matrix cols = co.e0.basis + co.e_star.basis * co.alpha;
  SubspaceBasis graph = SubspaceBasis::from_columns(cols, tol);
  if (!is_complement(graph, co.e_star, tol))
    throw NotComplementary("graph_subspace: graph fails to complement E*");
  return graph;
}

bool cofinal_member(const SubspaceBasis& m, const SubspaceBasis& e_star,
                    double tol) {
  return is_complement(m, e_star, tol);
}

}  // namespace oblique
