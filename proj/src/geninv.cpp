#include "oblique/geninv.hpp"

#include <cmath>

namespace oblique {

GenInverse::Residuals GenInverse::residuals() const {
  Residuals r;
  r.inner = (a_plus * a * a_plus - a_plus).norm();
  r.outer = (a * a_plus * a - a).norm();
  SplitPair pe = oblique_projection(range_plus, null_space(a));
  SplitPair pf = oblique_projection(range_space(a), null_plus);
  r.proj_e = (a_plus * a - pe.projection).norm();
  r.proj_f = (a * a_plus - pf.projection).norm();
  return r;
}

bool GenInverse::verify(double tol) const {
  Residuals r = residuals();
  double sa = std::max(1.0, a.norm());
  double sp = std::max(1.0, a_plus.norm());
  return r.inner <= tol * sp && r.outer <= tol * sa &&
         r.proj_e <= tol * sp * sa && r.proj_f <= tol * sp * sa;
}

GenInverse construct_geninv(const Matrix& a, const SubspaceBasis& range_plus,
                            const SubspaceBasis& null_plus, double tol) {
  require_operator(a, "construct_geninv");
  if (range_plus.ambient != a.cols())
    throw InvalidInput("construct_geninv: range_plus lives in the wrong space");
  if (null_plus.ambient != a.rows())
    throw InvalidInput("construct_geninv: null_plus lives in the wrong space");

  SubspaceBasis na = null_space(a, tol);
  SubspaceBasis ra = range_space(a, tol);
  if (!is_complement(range_plus, na, tol))
    throw NotComplementary("construct_geninv: range_plus does not complement N(A)");
  if (!is_complement(ra, null_plus, tol))
    throw NotComplementary("construct_geninv: null_plus does not complement R(A)");

  GenInverse out;
  out.a = a;
  out.range_plus = range_plus;
  out.null_plus = null_plus;

  const Index r = range_plus.dim();
  if (r == 0) {
    out.a_plus = Matrix::Zero(a.cols(), a.rows());
    return out;
  }

  /* A restricted to range_plus is a bijection onto R(A); invert it against the
   * projection of F onto R(A) along null_plus. */
  Matrix restricted = a * range_plus.basis;  // m x r, full column rank
  Eigen::JacobiSVD<Matrix> svd(restricted, Eigen::ComputeThinU | Eigen::ComputeThinV);
  double cutoff = tol * svd.singularValues()(0) *
                  static_cast<double>(std::max(a.rows(), r));
  if (svd.singularValues()(r - 1) <= cutoff)
    throw DegenerateSplit("construct_geninv: restriction of A to range_plus is singular");

  Matrix proj = oblique_projection(ra, null_plus, tol).projection;  // m x m
  out.a_plus = range_plus.basis * svd.solve(proj);
  return out;
}

GenInverse moore_penrose(const Matrix& a, double tol) {
  require_operator(a, "moore_penrose");
  return construct_geninv(a, range_space(Matrix(a.transpose()), tol),
                          null_space(Matrix(a.transpose()), tol), tol);
}

PerturbationContext make_perturbation(const GenInverse& base, const Matrix& t) {
  require_operator(t, "make_perturbation");
  if (t.rows() != base.a.rows() || t.cols() != base.a.cols())
    throw InvalidInput("make_perturbation: T and A differ in shape");

  PerturbationContext ctx;
  ctx.base = base;
  ctx.t = t;
  Matrix delta = t - base.a;
  ctx.c_map = Matrix::Identity(t.rows(), t.rows()) + delta * base.a_plus;
  ctx.d_map = Matrix::Identity(t.cols(), t.cols()) + base.a_plus * delta;
  ctx.gap = operator_norm(delta) * operator_norm(base.a_plus);
  ctx.in_ball = ctx.gap < 1.0 - kBallMargin;
  return ctx;
}

bool ConditionReport::all() const {
  for (bool b : holds)
    if (!b) return false;
  return true;
}

bool ConditionReport::consistent() const {
  for (bool b : holds)
    if (b != holds[0]) return false;
  return true;
}

ConditionReport condition_report(const PerturbationContext& ctx, double tol) {
  if (!ctx.in_ball)
    throw OutOfBall("condition_report: ||T - A|| >= 1 / ||A+||");

  const GenInverse& gi = ctx.base;
  const Matrix& t = ctx.t;
  SubspaceBasis rt = range_space(t);
  SubspaceBasis nt = null_space(t);
  SubspaceBasis ra = range_space(gi.a);
  SubspaceBasis na = null_space(gi.a);

  ConditionReport rep;

  rep.holds[0] = trivial_intersection(rt, gi.null_plus);

  {
    /* Candidate inverse B = A+ C^-1, tested directly against the axioms and
     * the two subspace identities. */
    Matrix b = ctx.c_map.transpose()
                   .partialPivLu()
                   .solve(Matrix(gi.a_plus.transpose()))
                   .transpose();
    double sb = std::max(1.0, b.norm());
    double st = std::max(1.0, t.norm());
    bool axioms = (b * t * b - b).norm() <= tol * sb &&
                  (t * b * t - t).norm() <= tol * st;
    bool spaces = range_space(b).same_subspace(gi.range_plus, tol) &&
                  null_space(b).same_subspace(gi.null_plus, tol);
    rep.holds[1] = axioms && spaces;
  }

  rep.holds[2] = is_complement(rt, gi.null_plus);
  rep.holds[3] = is_complement(nt, gi.range_plus);

  {
    /* (I - A+ A) N(T) = N(A), as a set equality of spans. */
    Matrix w = nt.basis - gi.a_plus * (gi.a * nt.basis);
    SubspaceBasis lhs = SubspaceBasis::span(w.cols() > 0 ? w : Matrix(w.rows(), 0));
    lhs.ambient = gi.a.cols();
    rep.holds[4] = lhs.same_subspace(na, tol);
  }

  {
    Matrix tn = t * na.basis;
    Matrix lifted = ctx.c_map.partialPivLu().solve(tn);
    rep.holds[5] = ra.contains(lifted, tol);
  }

  {
    Matrix ct = ctx.c_map.partialPivLu().solve(t);
    rep.holds[6] = ra.contains(range_space(ct).basis, tol);
  }

  return rep;
}

GenInverse perturbed_inverse(const PerturbationContext& ctx, double tol) {
  if (!ctx.in_ball)
    throw OutOfBall("perturbed_inverse: ||T - A|| >= 1 / ||A+||");
  if (!trivial_intersection(range_space(ctx.t), ctx.base.null_plus, tol))
    throw NoInverseInBall("perturbed_inverse: R(T) meets N(A+) nontrivially");

  Matrix b = ctx.c_map.transpose()
                 .partialPivLu()
                 .solve(Matrix(ctx.base.a_plus.transpose()))
                 .transpose();
  Matrix b_alt = ctx.d_map.partialPivLu().solve(ctx.base.a_plus);
  double scale = std::max(1.0, b.norm());
  if ((b - b_alt).norm() > 1e-8 * scale)
    throw DegenerateSplit("perturbed_inverse: A+ C^-1 and D^-1 A+ disagree");

  GenInverse out;
  out.a = ctx.t;
  out.a_plus = b;
  out.range_plus = ctx.base.range_plus;
  out.null_plus = ctx.base.null_plus;
  return out;
}

bool rank_class_preserved(const PerturbationContext& ctx, double tol) {
  if (!ctx.in_ball)
    throw OutOfBall("rank_class_preserved: ||T - A|| >= 1 / ||A+||");
  return numerical_rank(ctx.t, tol) == numerical_rank(ctx.base.a, tol);
}

LocallyFineReport locally_fine_detect(const OperatorFamily& family, const Vector& x0,
                                      const GenInverse& geninv0, double radius,
                                      int samples, std::uint64_t seed) {
  if (!(radius > 0.0)) throw InvalidInput("locally_fine_detect: radius must be > 0");
  if (samples < 1) throw InvalidInput("locally_fine_detect: need at least one sample");

  Matrix t0 = family(x0);
  require_operator(t0, "locally_fine_detect");
  if ((t0 - geninv0.a).norm() > 1e-8 * std::max(1.0, geninv0.a.norm()))
    throw InvalidInput("locally_fine_detect: family(x0) differs from the base operator");

  const Index d = x0.size();
  Rng rng(seed);
  LocallyFineReport rep;
  rep.samples.reserve(static_cast<std::size_t>(samples));

  double plus_norm = operator_norm(geninv0.a_plus);
  for (int i = 0; i < samples; ++i) {
    Vector dir = rng.vector(d);
    double len = dir.norm();
    if (len == 0.0) dir.setZero(), dir(0) = 1.0, len = 1.0;
    double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    Vector x = x0 + (r / len) * dir;
    rep.samples.push_back(x);

    Matrix tx;
    try {
      tx = family(x);
    } catch (const std::exception& e) {
      std::string coords = "(";
      for (Index k = 0; k < d; ++k)
        coords += (k ? ", " : "") + std::to_string(x(k));
      throw Error("locally_fine_detect: family evaluation failed at " + coords +
                  "): " + e.what());
    }

    if (!trivial_intersection(range_space(tx), geninv0.null_plus)) {
      rep.locally_fine = false;
      rep.failing_sample = x;
      return rep;
    }
  }

  rep.locally_fine = true;
  rep.inverse_gap.reserve(rep.samples.size());
  for (const Vector& x : rep.samples) {
    Matrix tx = family(x);
    double gap = operator_norm(tx - geninv0.a) * plus_norm;
    if (gap < 1.0 - kBallMargin) {
      Matrix c = Matrix::Identity(tx.rows(), tx.rows()) + (tx - geninv0.a) * geninv0.a_plus;
      Matrix b = c.transpose()
                     .partialPivLu()
                     .solve(Matrix(geninv0.a_plus.transpose()))
                     .transpose();
      rep.inverse_gap.push_back((b - geninv0.a_plus).norm());
    } else {
      rep.inverse_gap.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return rep;
}

bool geninv_independence_check(const Matrix& a, const GenInverse& gi1,
                               const GenInverse& gi2, const Matrix& t) {
  require_operator(a, "geninv_independence_check");
  require_operator(t, "geninv_independence_check");
  double scale = std::max(1.0, a.norm());
  if ((gi1.a - a).norm() > 1e-8 * scale || (gi2.a - a).norm() > 1e-8 * scale)
    throw InvalidInput("geninv_independence_check: inverses do not belong to A");

  Matrix bridge = gi1.a_plus * a * gi2.a_plus;
  double delta = std::min(1.0 / operator_norm(gi1.a_plus),
                          1.0 / operator_norm(bridge));
  if (operator_norm(t - a) >= delta * (1.0 - kBallMargin))
    throw OutOfBall("geninv_independence_check: T outside the common ball");

  SubspaceBasis rt = range_space(t);
  bool p1 = trivial_intersection(rt, gi1.null_plus);
  bool p2 = trivial_intersection(rt, gi2.null_plus);
  return p1 == p2;
}

}  // namespace oblique
