#include "oblique/subspace.hpp"

namespace oblique {

namespace {

double rank_cutoff(const Eigen::JacobiSVD<Matrix>& svd, Index rows, Index cols,
                   double tol) {
  if (svd.singularValues().size() == 0) return 0.0;
  return tol * svd.singularValues()(0) * static_cast<double>(std::max(rows, cols));
}

Index count_above(const Eigen::JacobiSVD<Matrix>& svd, double cutoff) {
  Index r = 0;
  while (r < svd.singularValues().size() && svd.singularValues()(r) > cutoff) ++r;
  return r;
}

}  // namespace

void require_operator(const Matrix& a, const char* name) {
  if (a.rows() < 1 || a.cols() < 1)
    throw InvalidInput(std::string(name) + ": empty matrix");
  if (!a.allFinite())
    throw InvalidInput(std::string(name) + ": non-finite entries");
}

double operator_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(a).singularValues()(0);
}

Index numerical_rank(const Matrix& a, double tol) {
  require_operator(a, "numerical_rank");
  Eigen::JacobiSVD<Matrix> svd(a);
  return count_above(svd, rank_cutoff(svd, a.rows(), a.cols(), tol));
}

SubspaceBasis null_space(const Matrix& a, double tol) {
  require_operator(a, "null_space");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  Index r = count_above(svd, rank_cutoff(svd, a.rows(), a.cols(), tol));
  SubspaceBasis out;
  out.ambient = a.cols();
  out.basis = svd.matrixV().rightCols(a.cols() - r);
  return out;
}

SubspaceBasis range_space(const Matrix& a, double tol) {
  require_operator(a, "range_space");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU);
  Index r = count_above(svd, rank_cutoff(svd, a.rows(), a.cols(), tol));
  SubspaceBasis out;
  out.ambient = a.rows();
  out.basis = svd.matrixU().leftCols(r);
  return out;
}

SubspaceBasis SubspaceBasis::zero(Index ambient) {
  SubspaceBasis out;
  out.ambient = ambient;
  out.basis = Matrix(ambient, 0);
  return out;
}

SubspaceBasis SubspaceBasis::from_columns(const Matrix& cols, double tol) {
  if (cols.rows() < 1) throw InvalidInput("from_columns: empty ambient space");
  if (!cols.allFinite()) throw InvalidInput("from_columns: non-finite entries");
  if (cols.cols() == 0) return zero(cols.rows());
  if (cols.cols() > cols.rows())
    throw InvalidInput("from_columns: more columns than ambient dimension");
  Eigen::JacobiSVD<Matrix> svd(cols, Eigen::ComputeFullU);
  Index r = count_above(svd, rank_cutoff(svd, cols.rows(), cols.cols(), tol));
  if (r < cols.cols())
    throw InvalidInput("from_columns: columns are linearly dependent at tolerance");
  SubspaceBasis out;
  out.ambient = cols.rows();
  out.basis = svd.matrixU().leftCols(r);
  return out;
}

SubspaceBasis SubspaceBasis::span(const Matrix& cols, double tol) {
  if (cols.rows() < 1) throw InvalidInput("span: empty ambient space");
  if (!cols.allFinite()) throw InvalidInput("span: non-finite entries");
  if (cols.cols() == 0) return zero(cols.rows());
  return range_space(cols, tol);
}

bool SubspaceBasis::contains(const Matrix& vectors, double tol) const {
  if (vectors.rows() != ambient)
    throw InvalidInput("contains: ambient dimension mismatch");
  if (vectors.cols() == 0) return true;
  Matrix residual = vectors - basis * (basis.transpose() * vectors);
  return residual.norm() <= tol * std::max(1.0, vectors.norm());
}

bool SubspaceBasis::same_subspace(const SubspaceBasis& other, double tol) const {
  if (ambient != other.ambient) return false;
  if (dim() != other.dim()) return false;
  return contains(other.basis, tol) && other.contains(basis, tol);
}

SplitPair oblique_projection(const SubspaceBasis& onto, const SubspaceBasis& along,
                             double tol) {
  if (onto.ambient != along.ambient)
    throw InvalidInput("oblique_projection: ambient dimension mismatch");
  const Index n = onto.ambient;
  if (onto.dim() + along.dim() != n)
    throw NotComplementary("oblique_projection: dimensions do not sum to ambient");

  Matrix stacked(n, n);
  stacked << onto.basis, along.basis;
  Eigen::JacobiSVD<Matrix> svd(stacked);
  double cutoff = rank_cutoff(svd, n, n, tol);
  if (svd.singularValues()(n - 1) <= cutoff)
    throw NotComplementary("oblique_projection: stacked basis numerically singular");

  SplitPair out;
  out.onto = onto;
  out.along = along;
  Matrix inv = stacked.partialPivLu().inverse();
  out.projection = onto.basis * inv.topRows(onto.dim());
  return out;
}

bool is_complement(const SubspaceBasis& u, const SubspaceBasis& v, double tol) {
  if (u.ambient != v.ambient)
    throw InvalidInput("is_complement: ambient dimension mismatch");
  if (u.dim() + v.dim() != u.ambient) return false;
  if (u.ambient == 0) return true;
  Matrix stacked(u.ambient, u.ambient);
  stacked << u.basis, v.basis;
  return numerical_rank(stacked, tol) == u.ambient;
}

bool trivial_intersection(const SubspaceBasis& u, const SubspaceBasis& v,
                          double tol) {
  if (u.ambient != v.ambient)
    throw InvalidInput("trivial_intersection: ambient dimension mismatch");
  if (u.dim() == 0 || v.dim() == 0) return true;
  if (u.dim() + v.dim() > u.ambient) return false;
  Matrix stacked(u.ambient, u.dim() + v.dim());
  stacked << u.basis, v.basis;
  return numerical_rank(stacked, tol) == u.dim() + v.dim();
}

}  // namespace oblique
