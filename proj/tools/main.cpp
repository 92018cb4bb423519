#include "CLI11.hpp"

#include "oblique/critical.hpp"
#include "oblique/geninv.hpp"
#include "oblique/io.hpp"
#include "oblique/leaf.hpp"
#include "oblique/rankchart.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace oblique;

namespace {

struct Flags {
  std::string input;
  std::string out;
  double step = 0.0;     // 0 means "take it from the problem file"
  double extent = 0.0;
  double tol = kDefaultTol;
  std::uint64_t seed = 0;
  bool parallel = false;
};

void kv(std::ostream& os, const char* key, const std::string& v) {
  os << key << ' ' << v << '\n';
}
void kv(std::ostream& os, const char* key, double v) {
  os << key << ' ' << format_full(v) << '\n';
}
void kv(std::ostream& os, const char* key, bool v) {
  os << key << ' ' << (v ? 1 : 0) << '\n';
}
void kv(std::ostream& os, const char* key, Index v) { os << key << ' ' << v << '\n'; }
void kv(std::ostream& os, const char* key, std::size_t v) {
  os << key << ' ' << v << '\n';
}

void emit_matrix(std::ostream& os, const std::string& name, const Matrix& m) {
  os << "[matrix " << name << "]\n";
  write_matrix_text(os, m);
}

void write_report(const Flags& flags, const std::string& body) {
  if (flags.out.empty()) {
    std::cout << body;
    return;
  }
  std::ofstream os(flags.out);
  if (!os) throw InvalidInput("cannot write report file: " + flags.out);
  os << body;
}

std::string csv_path(const std::string& out) {
  std::size_t slash = out.find_last_of('/');
  std::size_t dot = out.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return out + ".csv";
  return out.substr(0, dot) + ".csv";
}

void require_kind(const ProblemFile& pf, std::initializer_list<const char*> kinds) {
  for (const char* k : kinds)
    if (pf.kind == k) return;
  throw InvalidInput("problem file has kind '" + pf.kind +
                     "', which this subcommand does not accept");
}

Vector column_vector(const ProblemFile& pf, const std::string& name) {
  const Matrix& m = pf.require_matrix(name);
  if (m.cols() != 1)
    throw InvalidInput("matrix [" + name + "] must be a single column");
  return m.col(0);
}

GenInverse geninv_from_file(const ProblemFile& pf, double tol) {
  const Matrix& a = pf.require_matrix("A");
  require_operator(a, "A");
  const Matrix* rp = pf.find_matrix("RANGE_PLUS");
  const Matrix* np = pf.find_matrix("NULL_PLUS");
  if (!rp && !np) return moore_penrose(a, tol);
  SubspaceBasis range_plus = rp ? SubspaceBasis::from_columns(*rp, tol)
                                : range_space(Matrix(a.transpose()), tol);
  SubspaceBasis null_plus = np ? SubspaceBasis::from_columns(*np, tol)
                               : null_space(Matrix(a.transpose()), tol);
  return construct_geninv(a, range_plus, null_plus, tol);
}

void emit_geninv_common(std::ostream& os, const GenInverse& gi, double tol) {
  kv(os, "rows", gi.a.rows());
  kv(os, "cols", gi.a.cols());
  kv(os, "rank", numerical_rank(gi.a, tol));
  kv(os, "tol", tol);
  emit_matrix(os, "A_PLUS", gi.a_plus);
  GenInverse::Residuals r = gi.residuals();
  kv(os, "residual_inner", r.inner);
  kv(os, "residual_outer", r.outer);
  kv(os, "residual_proj_e", r.proj_e);
  kv(os, "residual_proj_f", r.proj_f);
  kv(os, "verified", gi.verify(std::max(tol, 1e-10)));
}

void emit_conditions(std::ostream& os, const PerturbationContext& ctx,
                     double cond_tol) {
  kv(os, "gap", ctx.gap);
  kv(os, "in_ball", ctx.in_ball);
  kv(os, "cond_tol", cond_tol);
  ConditionReport rep = condition_report(ctx, cond_tol);
  for (int i = 0; i < 7; ++i)
    kv(os, ("condition_" + std::to_string(i)).c_str(), rep.holds[static_cast<std::size_t>(i)]);
  kv(os, "consistent", rep.consistent());
}

int cmd_geninv(const ProblemFile& pf, const Flags& flags) {
  require_kind(pf, {"geninv", "perturb"});
  GenInverse gi = geninv_from_file(pf, flags.tol);

  std::ostringstream os;
  os << "report geninv v1\n";
  emit_geninv_common(os, gi, flags.tol);
  const Matrix* t = pf.find_matrix("T");
  PerturbationContext ctx = make_perturbation(gi, t ? *t : gi.a);
  emit_conditions(os, ctx, 1e-8);
  write_report(flags, os.str());
  return 0;
}

int cmd_perturb(const ProblemFile& pf, const Flags& flags) {
  require_kind(pf, {"perturb"});
  GenInverse gi = geninv_from_file(pf, flags.tol);
  const Matrix& t = pf.require_matrix("T");
  PerturbationContext ctx = make_perturbation(gi, t);

  std::ostringstream os;
  os << "report perturb v1\n";
  emit_geninv_common(os, gi, flags.tol);
  emit_conditions(os, ctx, 1e-8);
  ConditionReport rep = condition_report(ctx, 1e-8);
  if (ctx.in_ball) kv(os, "rank_class_preserved", rank_class_preserved(ctx, flags.tol));
  if (ctx.in_ball && rep.holds[0]) {
    GenInverse ti = perturbed_inverse(ctx, flags.tol);
    emit_matrix(os, "T_PLUS", ti.a_plus);
    GenInverse::Residuals r = ti.residuals();
    kv(os, "t_residual_inner", r.inner);
    kv(os, "t_residual_outer", r.outer);
    kv(os, "inverse_gap", operator_norm(ti.a_plus - gi.a_plus));
  } else {
    kv(os, "t_plus", std::string("none"));
  }
  write_report(flags, os.str());
  return 0;
}

/* A smooth map given by per-output quadratic forms:
 *   f_i(x) = L_i x + x' Q_i x / 2 + c_i,   f'(x)_i = L_i + x' (Q_i + Q_i') / 2. */
struct QuadraticMap {
  Matrix lin;                 // k x n
  std::vector<Matrix> quads;  // k symmetric n x n pieces (may be zero)
  Vector constant;            // k

  Vector value(const Vector& x) const {
    Vector out = lin * x + constant;
    for (std::size_t i = 0; i < quads.size(); ++i)
      out(static_cast<Index>(i)) += 0.5 * x.dot(quads[i] * x);
    return out;
  }
  Matrix jacobian(const Vector& x) const {
    Matrix j = lin;
    for (std::size_t i = 0; i < quads.size(); ++i)
      j.row(static_cast<Index>(i)) += (quads[i] * x).transpose();
    return j;
  }
};

struct LeafSetup {
  std::string family;
  QuadraticMap map;
  Vector x0;
  Index ambient = 0;
};

LeafSetup leaf_setup(const ProblemFile& pf) {
  LeafSetup s;
  s.family = pf.param_str("family", "");
  if (s.family == "circle") {
    s.ambient = 2;
    s.map.lin = Matrix::Zero(1, 2);
    s.map.quads = {2.0 * Matrix::Identity(2, 2)};
    s.map.constant = Vector::Constant(1, -1.0);
    s.x0 = pf.find_matrix("X0") ? column_vector(pf, "X0") : Vector{{0.0, 1.0}};
  } else if (s.family == "sphere") {
    s.ambient = 3;
    s.map.lin = Matrix::Zero(1, 3);
    s.map.quads = {2.0 * Matrix::Identity(3, 3)};
    s.map.constant = Vector::Constant(1, -1.0);
    s.x0 = pf.find_matrix("X0") ? column_vector(pf, "X0") : Vector{{0.0, 0.0, 1.0}};
  } else if (s.family == "quadratic") {
    s.map.lin = pf.require_matrix("LIN");
    s.ambient = s.map.lin.cols();
    const Index k = s.map.lin.rows();
    for (Index i = 0; i < k; ++i) {
      std::string name = "QUAD_" + std::to_string(i + 1);
      const Matrix* q = pf.find_matrix(name);
      Matrix sym = Matrix::Zero(s.ambient, s.ambient);
      if (q) {
        if (q->rows() != s.ambient || q->cols() != s.ambient)
          throw InvalidInput("matrix [" + name + "] must be ambient x ambient");
        sym = 0.5 * (*q + q->transpose());
      }
      s.map.quads.push_back(sym);
    }
    std::vector<double> c = pf.param_list("const");
    s.map.constant = Vector::Zero(k);
    for (std::size_t i = 0; i < c.size() && i < static_cast<std::size_t>(k); ++i)
      s.map.constant(static_cast<Index>(i)) = c[i];
    s.x0 = column_vector(pf, "X0");
  } else {
    throw InvalidInput("param 'family' must be circle, sphere, or quadratic");
  }
  if (s.x0.size() != s.ambient)
    throw InvalidInput("X0 dimension does not match the family's ambient space");
  return s;
}

/* Sup error of the reconstructed points against the closed-form hemisphere
 * graph last = sqrt(1 - sum of squares of the others); NaN nodes are skipped. */
double hemisphere_error(const LeafSample& sample) {
  double worst = 0.0;
  for (std::size_t node = 0; node < sample.size(); ++node) {
    Vector x = sample.reconstruct(node);
    if (!x.allFinite()) continue;
    const Index n = x.size();
    double s = 1.0 - x.head(n - 1).squaredNorm();
    if (s < 0.0) continue;
    worst = std::max(worst, std::abs(x(n - 1) - std::sqrt(s)));
  }
  return worst;
}

struct LeafRun {
  LeafSample sample;
  LeafSetup setup;
  std::string method;
  std::string field;
  double step = 0.0;
  Vector extents;
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string error;
};

LeafRun run_leaf(const ProblemFile& pf, const Flags& flags) {
  LeafRun run;
  run.setup = leaf_setup(pf);
  run.method = pf.param_str("method", "rk4");
  run.field = pf.param_str("field", "kernel");
  if (run.method != "rk4" && run.method != "phi")
    throw InvalidInput("param 'method' must be rk4 or phi");
  if (run.field != "kernel" && run.field != "generic")
    throw InvalidInput("param 'field' must be kernel or generic");

  run.step = flags.step > 0.0 ? flags.step : pf.param_double("step", 1e-3);
  if (!(run.step > 0.0)) throw InvalidInput("step must be > 0");
  run.seed = flags.seed ? flags.seed : pf.param_u64("seed", kDefaultSeed);

  const QuadraticMap& map = run.setup.map;
  auto f = [map](const Vector& x) { return map.value(x); };
  auto jac = [map](const Vector& x) { return map.jacobian(x); };

  GenInverse gi0 = moore_penrose(jac(run.setup.x0), flags.tol);
  const Index d = run.setup.ambient - numerical_rank(gi0.a, flags.tol);
  if (d == 0) throw InvalidInput("the family has a zero-dimensional leaf here");

  run.extents = Vector::Constant(d, 0.9);
  if (flags.extent > 0.0) {
    run.extents.setConstant(flags.extent);
  } else if (pf.has_param("extent")) {
    std::vector<double> e = pf.param_list("extent");
    if (e.size() == 1) run.extents.setConstant(e[0]);
    else if (static_cast<Index>(e.size()) == d)
      for (Index i = 0; i < d; ++i) run.extents(i) = e[static_cast<std::size_t>(i)];
    else
      throw InvalidInput("param 'extent' needs 1 value or one per leaf axis");
  }

  RegularityOptions ropts;
  ropts.seed = run.seed;

  try {
    if (run.method == "phi") {
      PhiMaps maps = phi_map(f, jac, run.setup.x0, gi0, ropts);
      run.sample = phi_leaf(maps, run.extents, run.step);
    } else {
      AlphaField fld;
      if (run.field == "kernel") {
        fld = alpha_field_kernel(jac, run.setup.x0, gi0, ropts);
      } else {
        DistributionFamily fam = kernel_family(run.setup.ambient, jac);
        fld = alpha_field_generic(fam, family_subspace(fam, run.setup.x0, flags.tol),
                                  gi0.range_plus);
      }
      DistributionFamily fam = kernel_family(run.setup.ambient, jac);
      LeafProblem prob = make_leaf_problem(run.setup.x0, fld.m0, fld.e_star, fam);
      IntegrateOptions iopts;
      iopts.parallel = flags.parallel;
      run.sample = integrate_leaf(prob, fld, run.extents, run.step, iopts);
    }
  } catch (const AbortedLeaf& e) {
    run.sample = e.partial;
    run.diverged = true;
    run.error = e.what();
  } catch (const DivergenceError& e) {
    run.sample = e.partial;
    run.diverged = true;
    run.error = e.what();
  }
  return run;
}

/* Per-node deviation of f from its base value; the leaf lies in a level set. */
std::vector<double> level_residuals(const LeafRun& run, double& worst) {
  const Vector f0 = run.setup.map.value(run.setup.x0);
  std::vector<double> out(run.sample.size(),
                          std::numeric_limits<double>::quiet_NaN());
  worst = 0.0;
  for (std::size_t node = 0; node < run.sample.size(); ++node) {
    Vector x = run.sample.reconstruct(node);
    if (!x.allFinite()) continue;
    out[node] = (run.setup.map.value(x) - f0).norm();
    worst = std::max(worst, out[node]);
  }
  return out;
}

int cmd_leaf(const ProblemFile& pf, const Flags& flags) {
  require_kind(pf, {"leaf"});
  LeafRun run = run_leaf(pf, flags);

  double worst_level = 0.0;
  std::vector<double> residuals = level_residuals(run, worst_level);

  std::ostringstream os;
  os << "report leaf v1\n";
  kv(os, "family", run.setup.family);
  kv(os, "method", run.method);
  if (run.method == "rk4") kv(os, "field", run.field);
  kv(os, "ambient", run.setup.ambient);
  kv(os, "leaf_dim", static_cast<Index>(run.sample.shape.size()));
  kv(os, "step", run.step);
  os << "extent";
  for (Index i = 0; i < run.extents.size(); ++i)
    os << ' ' << format_full(run.extents(i));
  os << '\n';
  kv(os, "tol", flags.tol);
  kv(os, "seed", static_cast<std::size_t>(run.seed));
  kv(os, "parallel", flags.parallel);
  kv(os, "nodes", run.sample.size());
  kv(os, "complete", run.sample.complete);
  kv(os, "integrable", run.sample.integrable);
  kv(os, "mixed_path_residual", run.sample.mixed_path_residual);
  kv(os, "max_level_residual", worst_level);
  if (run.setup.family == "circle" || run.setup.family == "sphere")
    kv(os, "sup_error_closed_form", hemisphere_error(run.sample));
  if (run.diverged) kv(os, "status", std::string("diverged"));

  write_report(flags, os.str());
  if (!flags.out.empty()) {
    std::ofstream csv(csv_path(flags.out));
    if (!csv) throw InvalidInput("cannot write csv file: " + csv_path(flags.out));
    write_leaf_csv(csv, run.sample, residuals);
  }
  if (run.diverged) {
    std::cerr << "error: " << run.error << '\n';
    return 3;
  }
  return 0;
}

int cmd_rankchart(const ProblemFile& pf, const Flags& flags) {
  require_kind(pf, {"rankchart"});
  GenInverse gi = geninv_from_file(pf, flags.tol);
  ChartData chart = make_chart(gi, flags.tol);

  std::ostringstream os;
  os << "report rankchart v1\n";
  kv(os, "rows", chart.rows);
  kv(os, "cols", chart.cols);
  kv(os, "rank", numerical_rank(gi.a, flags.tol));
  kv(os, "tol", flags.tol);
  kv(os, "tangent_dim", chart.m0.dim());
  kv(os, "complement_dim", chart.e_star.dim());
  kv(os, "w_radius", chart.w_radius);

  for (const auto& [name, x] : pf.matrices) {
    if (name == "A" || name == "RANGE_PLUS" || name == "NULL_PLUS" || name == "Z")
      continue;
    if (x.rows() != chart.rows || x.cols() != chart.cols)
      throw InvalidInput("sample [" + name + "] does not match the anchor's shape");
    os << "sample " << name << '\n';
    double v1_gap = operator_norm((x - gi.a) * gi.a_plus);
    double w_gap = operator_norm(x - gi.a);
    bool in_v1 = v1_gap < 1.0 - kBallMargin;
    bool in_w = w_gap < chart.w_radius - kBallMargin;
    kv(os, "v1_gap", v1_gap);
    kv(os, "in_v1", in_v1);
    kv(os, "in_w", in_w);
    kv(os, "rank", numerical_rank(x, flags.tol));
    if (in_v1) {
      Matrix d = chart_forward(chart, x);
      emit_matrix(os, "D_" + name, d);
      Vector dv = vec(d);
      double rect = (dv - chart.p_m0 * dv).norm() / (1.0 + dv.norm());
      kv(os, "rectification_residual", rect);
      kv(os, "roundtrip_error", (chart_inverse(chart, d) - x).norm());
    }
    if (in_w) kv(os, "stratum", stratum_membership(chart, x, flags.tol));
  }

  if (const Matrix* z = pf.find_matrix("Z")) {
    Matrix psi = leaf_psi_rank(chart, *z);
    emit_matrix(os, "PSI", psi);
    emit_matrix(os, "LEAF_POINT", *z + psi);
    kv(os, "leaf_point_rank", numerical_rank(*z + psi, flags.tol));
  }
  write_report(flags, os.str());
  return 0;
}

int cmd_critcheck(const ProblemFile& pf, const Flags& flags) {
  require_kind(pf, {"critcheck"});
  std::ostringstream os;
  os << "report critcheck v1\n";

  if (pf.find_matrix("TANGENT")) {
    ConstraintSpec spec;
    const Matrix& t = pf.require_matrix("TANGENT");
    spec.tangent_basis = SubspaceBasis::from_columns(t, flags.tol);
    spec.x0 = column_vector(pf, "X0");
    spec.gradient = column_vector(pf, "GRADIENT");
    double residual = criticality_residual(spec);
    kv(os, "mode", std::string("point"));
    kv(os, "ambient", spec.x0.size());
    kv(os, "tangent_dim", spec.tangent_basis.dim());
    kv(os, "tol", flags.tol);
    kv(os, "residual", residual);
    kv(os, "critical", residual <= 1e-8);
    write_report(flags, os.str());
    return 0;
  }

  // Sweep mode: integrate the family's leaf and rank the grid nodes by the
  // residual of a linear objective.
  LeafRun run = run_leaf(pf, flags);
  if (run.diverged) {
    std::cerr << "error: " << run.error << '\n';
    return 3;
  }
  Vector c = column_vector(pf, "OBJECTIVE");
  if (c.size() != run.setup.ambient)
    throw InvalidInput("OBJECTIVE dimension does not match the ambient space");
  auto f = [c](const Vector& x) { return c.dot(x); };
  auto grad = [c](const Vector&) { return c; };
  std::vector<SweepEntry> entries = sweep_candidates(f, grad, run.sample);

  kv(os, "mode", std::string("sweep"));
  kv(os, "family", run.setup.family);
  kv(os, "ambient", run.setup.ambient);
  kv(os, "step", run.step);
  kv(os, "tol", flags.tol);
  kv(os, "nodes", run.sample.size());
  kv(os, "candidates", entries.size());
  std::size_t top = static_cast<std::size_t>(pf.param_double("top", 5.0));
  for (std::size_t i = 0; i < entries.size() && i < top; ++i) {
    const SweepEntry& e = entries[i];
    os << "candidate " << (i + 1) << '\n';
    kv(os, "node", e.node);
    os << "grid";
    for (Index j = 0; j < e.grid_point.size(); ++j)
      os << ' ' << format_full(e.grid_point(j));
    os << '\n';
    kv(os, "value", e.value);
    kv(os, "residual", e.residual);
  }
  write_report(flags, os.str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generalized-inverse perturbation and leaf-integration toolkit"};
  app.require_subcommand(1);

  Flags flags;
  auto add_common = [&flags](CLI::App* sub) {
    sub->add_option("--input", flags.input, "problem file")->required();
    sub->add_option("--out", flags.out, "report path (default stdout)");
    sub->add_option("--tol", flags.tol, "rank / residual tolerance");
    sub->add_option("--seed", flags.seed, "random seed override");
  };
  auto add_grid = [&flags](CLI::App* sub) {
    sub->add_option("--step", flags.step, "grid step override");
    sub->add_option("--extent", flags.extent, "half-width override, all axes");
    sub->add_flag("--parallel", flags.parallel, "thread the final-axis sweeps");
  };

  CLI::App* sub_geninv =
      app.add_subcommand("geninv", "construct a generalized inverse and verify it");
  add_common(sub_geninv);
  CLI::App* sub_perturb =
      app.add_subcommand("perturb", "analyze a perturbed operator against a base");
  add_common(sub_perturb);
  CLI::App* sub_leaf = app.add_subcommand("leaf", "integrate a leaf sample grid");
  add_common(sub_leaf);
  add_grid(sub_leaf);
  CLI::App* sub_rank =
      app.add_subcommand("rankchart", "chart computations on a fixed-rank stratum");
  add_common(sub_rank);
  CLI::App* sub_crit =
      app.add_subcommand("critcheck", "criticality residuals for constrained points");
  add_common(sub_crit);
  add_grid(sub_crit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ProblemFile pf = parse_problem_file(flags.input);
    if (sub_geninv->parsed()) return cmd_geninv(pf, flags);
    if (sub_perturb->parsed()) return cmd_perturb(pf, flags);
    if (sub_leaf->parsed()) return cmd_leaf(pf, flags);
    if (sub_rank->parsed()) return cmd_rankchart(pf, flags);
    if (sub_crit->parsed()) return cmd_critcheck(pf, flags);
    return 1;
  } catch (const AbortedLeaf& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const InverseFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
