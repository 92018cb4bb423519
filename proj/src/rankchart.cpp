#include "oblique/rankchart.hpp"

#include <cmath>
#include <limits>

namespace oblique {

namespace {

void check_point(const OperatorPoint& p, const char* who) {
  require_operator(p.x, who);
  if (!p.geninv)
    throw NeedsSplitting(std::string(who) + ": operator point carries no generalized inverse");
  if ((p.geninv->a - p.x).norm() > 1e-8 * std::max(1.0, p.x.norm()))
    throw InvalidInput(std::string(who) + ": attached inverse belongs to a different operator");
}

void check_shape(const ChartData& ctx, const Matrix& m, const char* who) {
  require_operator(m, who);
  if (m.rows() != ctx.rows || m.cols() != ctx.cols)
    throw InvalidInput(std::string(who) + ": shape differs from the anchor");
}

double v1_gap(const ChartData& ctx, const Matrix& x) {
  return operator_norm((x - ctx.anchor.a) * ctx.anchor.a_plus);
}

double w_gap(const ChartData& ctx, const Matrix& x) {
  return operator_norm(x - ctx.anchor.a) * operator_norm(ctx.anchor.a_plus);
}

/* A nonzero idempotent has spectral norm >= 1, and these projectors are
 * built from idempotents, so anything below 1/2 is roundoff around the zero
 * map; taking its numerical range would promote noise to basis vectors. */
SubspaceBasis projector_range(const Matrix& proj, double tol) {
  if (operator_norm(proj) < 0.5)
    return SubspaceBasis::zero(proj.rows());
  return range_space(proj, tol);
}

}  // namespace

SubspaceBasis tangent_space(const OperatorPoint& p, double tol) {
  check_point(p, "tangent_space");
  const Index m = p.x.rows(), n = p.x.cols();
  Matrix q = p.x * p.geninv->a_plus;         // onto R(X) along N(X+)
  Matrix r = p.geninv->a_plus * p.x;         // onto R(X+) along N(X)
  Matrix iq = Matrix::Identity(m, m) - q;
  Matrix proj = kron(Matrix::Identity(n, n), q) + kron(Matrix(r.transpose()), iq);
  return projector_range(proj, tol);
}

SubspaceBasis complement_space(const OperatorPoint& p, double tol) {
  check_point(p, "complement_space");
  const Index m = p.x.rows(), n = p.x.cols();
  Matrix iq = Matrix::Identity(m, m) - p.x * p.geninv->a_plus;
  Matrix ir = Matrix::Identity(n, n) - p.geninv->a_plus * p.x;
  Matrix proj = kron(Matrix(ir.transpose()), iq);
  return projector_range(proj, tol);
}

ChartData make_chart(const GenInverse& anchor, double tol) {
  require_operator(anchor.a, "make_chart");
  ChartData ctx;
  ctx.anchor = anchor;
  ctx.rows = anchor.a.rows();
  ctx.cols = anchor.a.cols();
  ctx.aap = anchor.a * anchor.a_plus;
  ctx.apa = anchor.a_plus * anchor.a;

  OperatorPoint pt{anchor.a, anchor};
  ctx.m0 = tangent_space(pt, tol);
  ctx.e_star = complement_space(pt, tol);

  const Index mn = ctx.rows * ctx.cols;
  const Index r = numerical_rank(anchor.a, tol);
  const Index expected = (ctx.cols - r) * (ctx.rows - r);
  if (ctx.e_star.dim() != expected || ctx.m0.dim() != mn - expected)
    throw DegenerateSplit("make_chart: tangent/complement dimensions are off");
  if (!is_complement(ctx.m0, ctx.e_star, tol))
    throw DegenerateSplit("make_chart: M0 and E* fail to split the flattened space");

  Matrix iq = Matrix::Identity(ctx.rows, ctx.rows) - ctx.aap;
  ctx.p_m0 = kron(Matrix::Identity(ctx.cols, ctx.cols), ctx.aap) +
             kron(Matrix(ctx.apa.transpose()), iq);

  double plus_norm = operator_norm(anchor.a_plus);
  ctx.w_radius = plus_norm > 0.0 ? 1.0 / plus_norm
                                 : std::numeric_limits<double>::infinity();
  return ctx;
}

Matrix tangent_projection(const ChartData& ctx, const Matrix& x, const Matrix& t,
                          double tol) {
  check_shape(ctx, x, "tangent_projection");
  check_shape(ctx, t, "tangent_projection");
  SplitPair p1, p2;
  try {
    p1 = oblique_projection(range_space(x, tol), ctx.anchor.null_plus, tol);
    p2 = oblique_projection(ctx.anchor.range_plus, null_space(x, tol), tol);
  } catch (const NotComplementary& e) {
    throw NotCofinal(std::string("tangent_projection: X is not co-final with the "
                                 "anchor complement: ") + e.what());
  }
  Matrix ip1 = Matrix::Identity(ctx.rows, ctx.rows) - p1.projection;
  return p1.projection * t + ip1 * t * p2.projection;
}

Matrix chart_forward(const ChartData& ctx, const Matrix& x) {
  check_shape(ctx, x, "chart_forward");
  if (v1_gap(ctx, x) >= 1.0 - kBallMargin)
    throw OutOfBall("chart_forward: ||(X - A) A+|| >= 1");
  Matrix c = Matrix::Identity(ctx.rows, ctx.rows) + (x - ctx.anchor.a) * ctx.anchor.a_plus;
  return (x - ctx.anchor.a) * ctx.apa + c.partialPivLu().solve(x);
}

Matrix chart_inverse(const ChartData& ctx, const Matrix& t) {
  check_shape(ctx, t, "chart_inverse");
  if (v1_gap(ctx, t) >= 1.0 - kBallMargin)
    throw OutOfBall("chart_inverse: ||(T - A) A+|| >= 1");
  Matrix c = Matrix::Identity(ctx.rows, ctx.rows) + (t - ctx.anchor.a) * ctx.anchor.a_plus;
  Matrix in = Matrix::Identity(ctx.cols, ctx.cols) - ctx.apa;
  return t * ctx.apa + c * (t * in);
}

Matrix alpha_tangent(const ChartData& ctx, const Matrix& x, const Matrix& dx,
                     double tol) {
  check_shape(ctx, x, "alpha_tangent");
  check_shape(ctx, dx, "alpha_tangent");
  if (w_gap(ctx, x) >= 1.0 - kBallMargin)
    throw NotInS("alpha_tangent: X is outside the anchor ball W");
  if (!trivial_intersection(range_space(x), ctx.anchor.null_plus))
    throw NotInS("alpha_tangent: X admits no inverse with the anchor complements");

  Vector flat = vec(dx);
  if ((flat - ctx.p_m0 * flat).norm() > tol * (1.0 + dx.norm()))
    throw InvalidDirection("alpha_tangent: dX has a component outside M0");

  Matrix c = Matrix::Identity(ctx.rows, ctx.rows) + (x - ctx.anchor.a) * ctx.anchor.a_plus;
  auto lu = c.partialPivLu();
  Matrix y1 = lu.solve(dx);
  Matrix y2 = lu.solve(x);
  Matrix im = Matrix::Identity(ctx.rows, ctx.rows) - ctx.aap;
  Matrix in = Matrix::Identity(ctx.cols, ctx.cols) - ctx.apa;
  return im * (y1 * ctx.anchor.a_plus * y2 - y1) * in;
}

Matrix leaf_psi_rank(const ChartData& ctx, const Matrix& z, double tol) {
  check_shape(ctx, z, "leaf_psi_rank");
  Vector flat = vec(z);
  if ((flat - ctx.p_m0 * flat).norm() > 1e-8 * (1.0 + z.norm()))
    throw InvalidInput("leaf_psi_rank: Z is not in M0");

  const Matrix& basis = ctx.m0.basis;
  const Index dm = ctx.m0.dim();
  Matrix in = Matrix::Identity(ctx.cols, ctx.cols) - ctx.apa;

  auto phi0 = [&](const Matrix& t) -> Matrix {
    Matrix c = Matrix::Identity(ctx.rows, ctx.rows) + (t - ctx.anchor.a) * ctx.anchor.a_plus;
    return t * ctx.apa + ctx.aap * (c * (t * in));
  };

  Vector coords = basis.transpose() * flat;
  Matrix t = unvec(basis * coords, ctx.rows, ctx.cols);
  double target = tol * (1.0 + z.norm());
  Vector r = basis.transpose() * vec(phi0(t) - z);
  double rn = r.norm();

  for (int iter = 0; iter < 50 && rn > target; ++iter) {
    Matrix jac(dm, dm);
    for (Index j = 0; j < dm; ++j) {
      Matrix bj = unvec(basis.col(j), ctx.rows, ctx.cols);
      Matrix dphi = bj * ctx.apa +
                    ctx.aap * ((bj * ctx.anchor.a_plus * t +
                                t * ctx.anchor.a_plus * bj) * in);
      jac.col(j) = basis.transpose() * vec(dphi);
    }
    Vector dc = jac.partialPivLu().solve(r);
    if (!dc.allFinite())
      throw InverseFailure("leaf_psi_rank: singular Newton system");
    double lambda = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 20; ++halving) {
      Vector c_try = coords - lambda * dc;
      Matrix t_try = unvec(basis * c_try, ctx.rows, ctx.cols);
      Vector r_try = basis.transpose() * vec(phi0(t_try) - z);
      if (r_try.norm() < rn) {
        coords = c_try;
        t = t_try;
        r = r_try;
        rn = r.norm();
        improved = true;
        break;
      }
      lambda /= 2.0;
    }
    if (!improved)
      throw InverseFailure("leaf_psi_rank: damping stalled, residual " +
                           std::to_string(rn));
  }
  if (rn > target)
    throw InverseFailure("leaf_psi_rank: no convergence in 50 iterations, residual " +
                         std::to_string(rn));

  Matrix c = Matrix::Identity(ctx.rows, ctx.rows) + (t - ctx.anchor.a) * ctx.anchor.a_plus;
  Matrix im = Matrix::Identity(ctx.rows, ctx.rows) - ctx.aap;
  Matrix psi = im * (c * (t * in));

  Matrix leaf_point = z + psi;
  if (operator_norm(leaf_point - ctx.anchor.a) >= ctx.w_radius * (1.0 - kBallMargin))
    throw OutOfBall("leaf_psi_rank: Z lies outside the rectified ball D(W)");
  return psi;
}

bool stratum_membership(const ChartData& ctx, const Matrix& x, double tol) {
  check_shape(ctx, x, "stratum_membership");
  if (w_gap(ctx, x) >= 1.0 - kBallMargin)
    throw OutOfBall("stratum_membership: ||X - A|| >= 1 / ||A+||");
  return numerical_rank(x, tol) == numerical_rank(ctx.anchor.a, tol);
}

TransitionReport atlas_transition_check(const ChartData& a, const ChartData& b,
                                        const std::vector<Matrix>& samples) {
  if (samples.empty())
    throw InvalidInput("atlas_transition_check: no samples given");
  if (a.rows != b.rows || a.cols != b.cols)
    throw InvalidInput("atlas_transition_check: charts cover different spaces");

  TransitionReport rep;

  /* Transition b -> a in rectified coordinates of each chart. */
  auto transition = [&](const Vector& tb_coords) -> Vector {
    Matrix tb = unvec(b.m0.basis * tb_coords, b.rows, b.cols);
    Matrix x = chart_inverse(b, tb);
    Matrix ta = chart_forward(a, x);
    return a.m0.basis.transpose() * vec(ta);
  };

  std::vector<Matrix> jacobians;
  for (const Matrix& x : samples) {
    Matrix tb = chart_forward(b, x);
    Matrix ta = chart_forward(a, x);
    Vector flat = vec(ta);
    double resid = (flat - a.p_m0 * flat).norm() / (1.0 + ta.norm());
    rep.residuals.push_back(resid);
    rep.max_rectification_residual = std::max(rep.max_rectification_residual, resid);

    Vector tc = b.m0.basis.transpose() * vec(tb);
    double h = 1e-6 * (1.0 + tc.norm());
    Matrix jac(a.m0.dim(), b.m0.dim());
    for (Index j = 0; j < b.m0.dim(); ++j) {
      Vector tp = tc, tm = tc;
      tp(j) += h;
      tm(j) -= h;
      jac.col(j) = (transition(tp) - transition(tm)) / (2.0 * h);
    }
    jacobians.push_back(jac);
  }

  for (std::size_t i = 0; i + 1 < jacobians.size(); ++i)
    rep.max_jacobian_step =
        std::max(rep.max_jacobian_step, (jacobians[i] - jacobians[i + 1]).norm());
  return rep;
}

}  // namespace oblique
