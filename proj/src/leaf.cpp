#include "oblique/leaf.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace oblique {

namespace {

/* Internal control-flow signals; the fill loop converts them into AbortedLeaf
 * or DivergenceError carrying the partial sample. */
struct FieldFailureSignal {
  std::string msg;
};
struct DivergenceSignal {
  std::string msg;
};

struct GridSpec {
  std::vector<Index> half;
  std::vector<Index> shape;
  std::vector<std::size_t> stride;
  std::size_t total = 1;
};

GridSpec make_grid(const Vector& extents, double step, Index d) {
  if (extents.size() != d)
    throw InvalidInput("leaf grid: one extent per leaf axis required");
  if (!(step > 0.0)) throw InvalidInput("leaf grid: step must be > 0");
  GridSpec g;
  g.half.resize(d);
  g.shape.resize(d);
  g.stride.resize(d);
  for (Index i = 0; i < d; ++i) {
    if (!(extents(i) > 0.0)) throw InvalidInput("leaf grid: extents must be > 0");
    g.half[i] = static_cast<Index>(std::floor(extents(i) / step + 1e-9));
    g.shape[i] = 2 * g.half[i] + 1;
  }
  for (Index i = d - 1; i >= 0; --i) {
    g.stride[i] = (i == d - 1) ? 1 : g.stride[i + 1] * static_cast<std::size_t>(g.shape[i + 1]);
  }
  for (Index i = 0; i < d; ++i) g.total *= static_cast<std::size_t>(g.shape[i]);
  return g;
}

std::size_t flat_index(const GridSpec& g, const std::vector<Index>& offsets) {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < g.half.size(); ++i)
    idx += static_cast<std::size_t>(offsets[i] + g.half[i]) * g.stride[i];
  return idx;
}

}  // namespace

DistributionFamily kernel_family(Index ambient,
                                 std::function<Matrix(const Vector&)> jacobian) {
  DistributionFamily f;
  f.ambient = ambient;
  f.jacobian = std::move(jacobian);
  return f;
}

DistributionFamily subspace_family(Index ambient,
                                   std::function<SubspaceBasis(const Vector&)> subspace) {
  DistributionFamily f;
  f.ambient = ambient;
  f.subspace = std::move(subspace);
  return f;
}

SubspaceBasis family_subspace(const DistributionFamily& family, const Vector& x,
                              double tol) {
  if (x.size() != family.ambient)
    throw InvalidInput("family_subspace: point has the wrong dimension");
  if (family.subspace) {
    SubspaceBasis m = family.subspace(x);
    if (m.ambient != family.ambient)
      throw InvalidInput("family_subspace: evaluator returned a foreign subspace");
    return m;
  }
  if (!family.jacobian) throw InvalidInput("family_subspace: empty family");
  return null_space(family.jacobian(x), tol);
}

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x) {
  double h = 1e-6 * (1.0 + x.norm());
  Vector probe = x;
  probe(0) += h;
  Vector fp = f(probe);
  Matrix jac(fp.size(), x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

AlphaField alpha_field_kernel(const std::function<Matrix(const Vector&)>& jacobian,
                              const Vector& x0, const GenInverse& geninv0,
                              const RegularityOptions& opts) {
  Matrix t0 = jacobian(x0);
  require_operator(t0, "alpha_field_kernel");
  if ((t0 - geninv0.a).norm() > 1e-8 * std::max(1.0, geninv0.a.norm()))
    throw InvalidInput("alpha_field_kernel: jacobian(x0) differs from the base operator");

  if (opts.check) {
    LocallyFineReport rep = locally_fine_detect(jacobian, x0, geninv0, opts.radius,
                                                opts.samples, opts.seed);
    if (!rep.locally_fine)
      throw InvalidInput("alpha_field_kernel: x0 fails the generalized-regular "
                         "sampling check");
  }

  AlphaField field;
  field.m0 = null_space(t0);
  field.e_star = geninv0.range_plus;
  if (!is_complement(field.m0, field.e_star))
    throw NotComplementary("alpha_field_kernel: N(T0) and R(T0+) do not split E");

  Matrix p_n0 = oblique_projection(field.m0, field.e_star).projection;
  Matrix p_star = Matrix::Identity(p_n0.rows(), p_n0.cols()) - p_n0;
  Matrix n0_basis = field.m0.basis;
  Matrix star_t = field.e_star.basis.transpose();
  Matrix a_plus = geninv0.a_plus;
  Index n = t0.cols();

  field.eval = [=](const Vector& x) -> Matrix {
    Matrix tx = jacobian(x);
    if (tx.rows() != t0.rows() || tx.cols() != t0.cols())
      throw InvalidInput("alpha_field_kernel: jacobian changed shape");
    Matrix d = Matrix::Identity(n, n) + a_plus * (tx - t0);
    Eigen::JacobiSVD<Matrix> svd(d);
    double cutoff = kDefaultTol * svd.singularValues()(0) * static_cast<double>(n);
    if (svd.singularValues()(n - 1) <= cutoff)
      throw OutOfNeighborhood("alpha_field_kernel: D(T0+, T_x) is singular here");
    /* P(onto N0 along E*) fixes the N0 basis, so only the solve remains. */
    Matrix lifted = d.partialPivLu().solve(n0_basis);
    return star_t * (p_star * lifted);
  };
  return field;
}

AlphaField alpha_field_generic(const DistributionFamily& family,
                               const SubspaceBasis& m0, const SubspaceBasis& e_star) {
  if (m0.ambient != family.ambient || e_star.ambient != family.ambient)
    throw InvalidInput("alpha_field_generic: ambient dimension mismatch");
  if (!is_complement(m0, e_star))
    throw NotComplementary("alpha_field_generic: M0 and E* do not split E");

  AlphaField field;
  field.m0 = m0;
  field.e_star = e_star;
  field.eval = [family, m0, e_star](const Vector& x) -> Matrix {
    SubspaceBasis mx = family_subspace(family, x);
    if (!cofinal_member(mx, e_star)) {
      std::string coords = "(";
      for (Index k = 0; k < x.size(); ++k)
        coords += (k ? ", " : "") + std::to_string(x(k));
      throw NotCofinal("alpha_field_generic: M(x) leaves the co-final set at " +
                       coords + ")");
    }
    return coordinate_operator(m0, mx, e_star).alpha;
  };
  return field;
}

LeafProblem make_leaf_problem(const Vector& x0, const SubspaceBasis& m0,
                              const SubspaceBasis& e_star,
                              const DistributionFamily& family, double tol) {
  if (x0.size() != family.ambient || m0.ambient != family.ambient ||
      e_star.ambient != family.ambient)
    throw InvalidInput("make_leaf_problem: dimension mismatch");
  if (!is_complement(m0, e_star))
    throw NotComplementary("make_leaf_problem: M0 and E* do not split E");
  if (!family_subspace(family, x0).same_subspace(m0, tol))
    throw InvalidInput("make_leaf_problem: family(x0) differs from M0");
  LeafProblem p;
  p.x0 = x0;
  p.m0 = m0;
  p.e_star = e_star;
  p.family = family;
  return p;
}

std::size_t LeafSample::size() const {
  std::size_t n = 1;
  for (Index s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

std::size_t LeafSample::base_index() const {
  std::vector<Index> zero(shape.size(), 0);
  return index_of(zero);
}

std::size_t LeafSample::index_of(const std::vector<Index>& offsets) const {
  if (offsets.size() != shape.size())
    throw InvalidInput("LeafSample::index_of: offset rank mismatch");
  std::size_t idx = 0;
  std::size_t stride = 1;
  for (std::size_t i = shape.size(); i-- > 0;) {
    Index half = (shape[i] - 1) / 2;
    if (offsets[i] < -half || offsets[i] > half)
      throw InvalidInput("LeafSample::index_of: offset out of range");
    idx += static_cast<std::size_t>(offsets[i] + half) * stride;
    stride *= static_cast<std::size_t>(shape[i]);
  }
  return idx;
}

Vector LeafSample::reconstruct(std::size_t node) const {
  return m0.basis * grid.at(node) + e_star.basis * psi.at(node);
}

namespace {

class LeafFiller {
 public:
  LeafFiller(const LeafProblem& problem, const AlphaField& field, const GridSpec& g,
             double step)
      : problem_(problem), field_(field), g_(g), h_(step) {}

  Vector alpha_column(const Vector& zc, const Vector& psi, Index axis,
                      double sign) const {
    Vector x = problem_.m0.basis * zc + problem_.e_star.basis * psi;
    Matrix a;
    try {
      a = field_.eval(x);
    } catch (const std::exception& e) {
      throw FieldFailureSignal{std::string("field evaluation failed: ") + e.what()};
    }
    if (a.rows() != problem_.e_star.dim() || a.cols() != problem_.m0.dim())
      throw FieldFailureSignal{"field returned a matrix of the wrong shape"};
    return sign * a.col(axis);
  }

  Vector rk4_step(const Vector& zc, const Vector& psi, Index axis, double sign) const {
    Vector z_mid = zc, z_end = zc;
    z_mid(axis) += sign * h_ / 2.0;
    z_end(axis) += sign * h_;
    Vector k1 = alpha_column(zc, psi, axis, sign);
    Vector k2 = alpha_column(z_mid, psi + (h_ / 2.0) * k1, axis, sign);
    Vector k3 = alpha_column(z_mid, psi + (h_ / 2.0) * k2, axis, sign);
    Vector k4 = alpha_column(z_end, psi + h_ * k3, axis, sign);
    Vector next = psi + (h_ / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite())
      throw DivergenceSignal{"state became non-finite during RK4"};
    return next;
  }

  /* Integrate `steps` RK4 steps from (zc, psi) along +-axis; if store is set,
   * it receives (step_number, psi) after every step. */
  Vector ray(Vector zc, Vector psi, Index axis, double sign, Index steps,
             const std::function<void(Index, const Vector&)>& store = {}) const {
    for (Index k = 1; k <= steps; ++k) {
      psi = rk4_step(zc, psi, axis, sign);
      zc(axis) += sign * h_;
      if (store) store(k, psi);
    }
    return psi;
  }

 private:
  const LeafProblem& problem_;
  const AlphaField& field_;
  const GridSpec& g_;
  double h_;
};

}  // namespace

LeafSample integrate_leaf(const LeafProblem& problem, const AlphaField& field,
                          const Vector& extents, double step,
                          const IntegrateOptions& opts) {
  const Index d = problem.m0.dim();
  const Index s = problem.e_star.dim();
  if (!field.m0.same_subspace(problem.m0, 1e-8) ||
      (field.m0.basis - problem.m0.basis).norm() > 1e-10 ||
      (field.e_star.basis - problem.e_star.basis).norm() > 1e-10)
    throw InvalidInput("integrate_leaf: field bases differ from the problem bases");

  GridSpec g = make_grid(extents, step, d);

  SplitPair onto_m0 = oblique_projection(problem.m0, problem.e_star);
  Vector base_ambient = onto_m0.projection * problem.x0;
  Vector z0c = problem.m0.basis.transpose() * base_ambient;
  Vector psi0 = problem.e_star.basis.transpose() * (problem.x0 - base_ambient);

  LeafSample out;
  out.x0 = problem.x0;
  out.m0 = problem.m0;
  out.e_star = problem.e_star;
  out.shape = g.shape;
  out.step = step;
  out.jacobian_mode = problem.family.jacobian ? "analytic" : "subspace";
  out.grid.resize(g.total);
  out.psi.assign(g.total, Vector::Constant(s, std::numeric_limits<double>::quiet_NaN()));

  {
    std::vector<Index> offsets(d, 0);
    for (std::size_t idx = 0; idx < g.total; ++idx) {
      std::size_t rem = idx;
      Vector zc = z0c;
      for (Index i = 0; i < d; ++i) {
        Index node = static_cast<Index>(rem / g.stride[i]);
        rem %= g.stride[i];
        zc(i) += step * static_cast<double>(node - g.half[i]);
      }
      out.grid[idx] = zc;
    }
  }
  out.psi[flat_index(g, std::vector<Index>(d, 0))] = psi0;

  LeafFiller filler(problem, field, g, step);

  auto fill_ray = [&](std::vector<Index> start, Index axis, double sign) {
    std::size_t start_idx = flat_index(g, start);
    Vector zc = out.grid[start_idx];
    Vector psi = out.psi[start_idx];
    filler.ray(zc, psi, axis, sign, g.half[axis],
               [&](Index k, const Vector& p) {
                 std::vector<Index> node = start;
                 node[axis] = static_cast<Index>(sign) * k;
                 out.psi[flat_index(g, node)] = p;
               });
  };

  try {
    for (Index axis = 0; axis < d; ++axis) {
      /* Every node with zero offsets on axes >= `axis` is already filled;
       * branch rays off each of them along the current axis. */
      std::vector<std::vector<Index>> starts;
      std::vector<Index> combo(d, 0);
      std::function<void(Index)> enumerate = [&](Index level) {
        if (level == axis) {
          starts.push_back(combo);
          return;
        }
        for (Index k = -g.half[level]; k <= g.half[level]; ++k) {
          combo[level] = k;
          enumerate(level + 1);
        }
        combo[level] = 0;
      };
      enumerate(0);

      bool threaded = opts.parallel && axis == d - 1 && starts.size() > 1;
      if (!threaded) {
        for (const auto& st : starts) {
          if (g.half[axis] == 0) continue;
          fill_ray(st, axis, +1.0);
          fill_ray(st, axis, -1.0);
        }
      } else {
        std::mutex mtx;
        bool failed = false;
        FieldFailureSignal field_sig;
        DivergenceSignal div_sig;
        int which = 0;
        unsigned n_threads = std::max(1u, std::thread::hardware_concurrency());
        n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(starts.size()));
        std::vector<std::thread> pool;
        std::atomic<std::size_t> cursor{0};
        for (unsigned t = 0; t < n_threads; ++t) {
          pool.emplace_back([&]() {
            for (;;) {
              std::size_t i = cursor.fetch_add(1);
              if (i >= starts.size()) return;
              if (g.half[axis] == 0) continue;
              try {
                fill_ray(starts[i], axis, +1.0);
                fill_ray(starts[i], axis, -1.0);
              } catch (const FieldFailureSignal& sig) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!failed) failed = true, which = 1, field_sig = sig;
              } catch (const DivergenceSignal& sig) {
                std::lock_guard<std::mutex> lock(mtx);
                if (!failed) failed = true, which = 2, div_sig = sig;
              }
            }
          });
        }
        for (auto& th : pool) th.join();
        if (which == 1) throw field_sig;
        if (which == 2) throw div_sig;
      }
    }

    if (opts.mixed_path && d >= 2) {
      double worst = 0.0;
      for (Index i = 0; i < d; ++i) {
        for (Index j = i + 1; j < d; ++j) {
          if (g.half[i] == 0 || g.half[j] == 0) continue;
          for (double si : {-1.0, 1.0}) {
            for (double sj : {-1.0, 1.0}) {
              Vector zc = z0c;
              Vector pa = filler.ray(zc, psi0, i, si, g.half[i]);
              Vector zca = zc;
              zca(i) += si * step * static_cast<double>(g.half[i]);
              pa = filler.ray(zca, pa, j, sj, g.half[j]);

              Vector pb = filler.ray(zc, psi0, j, sj, g.half[j]);
              Vector zcb = zc;
              zcb(j) += sj * step * static_cast<double>(g.half[j]);
              pb = filler.ray(zcb, pb, i, si, g.half[i]);

              worst = std::max(worst, (pa - pb).norm());
            }
          }
        }
      }
      out.mixed_path_residual = worst;
      out.integrable = worst <= 100.0 * std::pow(step, 4);
    }
  } catch (const FieldFailureSignal& sig) {
    out.complete = false;
    throw AbortedLeaf("integrate_leaf: " + sig.msg, out);
  } catch (const DivergenceSignal& sig) {
    out.complete = false;
    throw DivergenceError("integrate_leaf: " + sig.msg, out);
  }

  return out;
}

Vector PhiMaps::forward(const Vector& x) const {
  return geninv0.a_plus * (f(x) - f0) + p_n0 * x;
}

Matrix PhiMaps::forward_jacobian(const Vector& x) const {
  return p_n0 + geninv0.a_plus * jac(x);
}

Vector PhiMaps::inverse(const Vector& y) const {
  return inverse_from(y, x0 + y - p_n0 * x0);
}

Vector PhiMaps::inverse_from(const Vector& y, const Vector& guess) const {
  Vector x = guess;
  double target = 1e-12 * (1.0 + y.norm());
  Vector r = forward(x) - y;
  double rn = r.norm();
  for (int iter = 0; iter < 50; ++iter) {
    if (rn <= target) return x;
    Matrix j = forward_jacobian(x);
    Vector dx = j.partialPivLu().solve(r);
    if (!dx.allFinite())
      throw InverseFailure("phi inverse: singular Jacobian at iterate " +
                           std::to_string(iter));
    double lambda = 1.0;
    bool improved = false;
    for (int halving = 0; halving < 20; ++halving) {
      Vector x_try = x - lambda * dx;
      Vector r_try = forward(x_try) - y;
      if (r_try.norm() < rn) {
        x = x_try;
        r = r_try;
        rn = r.norm();
        improved = true;
        break;
      }
      lambda /= 2.0;
    }
    if (!improved)
      throw InverseFailure("phi inverse: damping stalled, residual " +
                           std::to_string(rn));
  }
  if (rn <= target) return x;
  throw InverseFailure("phi inverse: no convergence in 50 iterations, residual " +
                       std::to_string(rn));
}

Vector PhiMaps::comp0(const Vector& y) const { return p_n0 * inverse(y); }

Vector PhiMaps::comp1(const Vector& y) const {
  Vector x = inverse(y);
  return x - p_n0 * x;
}

PhiMaps phi_map(std::function<Vector(const Vector&)> f,
                std::function<Matrix(const Vector&)> fprime, const Vector& x0,
                const GenInverse& geninv0, const RegularityOptions& opts) {
  PhiMaps maps;
  maps.f = std::move(f);
  maps.jacobian_mode = fprime ? "analytic" : "central-difference";
  if (fprime) {
    maps.jac = std::move(fprime);
  } else {
    auto fn = maps.f;
    maps.jac = [fn](const Vector& x) { return fd_jacobian(fn, x); };
  }
  maps.x0 = x0;
  maps.f0 = maps.f(x0);
  maps.geninv0 = geninv0;

  Matrix t0 = maps.jac(x0);
  require_operator(t0, "phi_map");
  if ((t0 - geninv0.a).norm() > 1e-6 * std::max(1.0, geninv0.a.norm()))
    throw InvalidInput("phi_map: f'(x0) differs from the base operator");

  if (opts.check) {
    LocallyFineReport rep = locally_fine_detect(maps.jac, x0, geninv0, opts.radius,
                                                opts.samples, opts.seed);
    if (!rep.locally_fine)
      throw InvalidInput("phi_map: x0 fails the generalized-regular sampling check");
  }

  maps.n0 = null_space(geninv0.a);
  maps.e_star = geninv0.range_plus;
  if (!is_complement(maps.n0, maps.e_star))
    throw NotComplementary("phi_map: N(T0) and R(T0+) do not split E");
  maps.p_n0 = oblique_projection(maps.n0, maps.e_star).projection;
  return maps;
}

LeafSample phi_leaf(const PhiMaps& maps, const Vector& extents, double step) {
  const Index d = maps.n0.dim();
  const Index s = maps.e_star.dim();
  GridSpec g = make_grid(extents, step, d);

  Vector base_ambient = maps.p_n0 * maps.x0;
  Vector z0c = maps.n0.basis.transpose() * base_ambient;
  Vector psi0 = maps.e_star.basis.transpose() * (maps.x0 - base_ambient);

  LeafSample out;
  out.x0 = maps.x0;
  out.m0 = maps.n0;
  out.e_star = maps.e_star;
  out.shape = g.shape;
  out.step = step;
  out.jacobian_mode = maps.jacobian_mode;
  out.grid.resize(g.total);
  out.psi.assign(g.total, Vector::Constant(s, std::numeric_limits<double>::quiet_NaN()));

  for (std::size_t idx = 0; idx < g.total; ++idx) {
    std::size_t rem = idx;
    Vector zc = z0c;
    for (Index i = 0; i < d; ++i) {
      Index node = static_cast<Index>(rem / g.stride[i]);
      rem %= g.stride[i];
      zc(i) += step * static_cast<double>(node - g.half[i]);
    }
    out.grid[idx] = zc;
  }

  std::vector<Vector> xsol(g.total);
  std::size_t base = flat_index(g, std::vector<Index>(d, 0));
  out.psi[base] = psi0;
  xsol[base] = maps.x0;

  /* Solve phi0(u) = z at a node, warm-started from the ray predecessor. */
  auto solve_node = [&](std::size_t node_idx, std::size_t prev_idx) {
    Vector z_amb = maps.n0.basis * out.grid[node_idx];
    double target = 1e-12 * (1.0 + z_amb.norm());
    Vector u = z_amb;
    Vector warm = xsol[prev_idx];
    Vector x;
    for (int iter = 0; iter < 50; ++iter) {
      x = maps.inverse_from(u, warm);
      Vector r = maps.p_n0 * x - z_amb;
      if (r.norm() <= target) {
        out.psi[node_idx] = maps.e_star.basis.transpose() * (x - maps.p_n0 * x);
        xsol[node_idx] = x;
        return;
      }
      u -= r;
      warm = x;
    }
    throw InverseFailure("phi_leaf: component solve stalled at a grid node");
  };

  try {
    for (Index axis = 0; axis < d; ++axis) {
      std::vector<std::vector<Index>> starts;
      std::vector<Index> combo(d, 0);
      std::function<void(Index)> enumerate = [&](Index level) {
        if (level == axis) {
          starts.push_back(combo);
          return;
        }
        for (Index k = -g.half[level]; k <= g.half[level]; ++k) {
          combo[level] = k;
          enumerate(level + 1);
        }
        combo[level] = 0;
      };
      enumerate(0);

      for (const auto& st : starts) {
        for (double sign : {+1.0, -1.0}) {
          std::vector<Index> node = st;
          std::size_t prev = flat_index(g, st);
          for (Index k = 1; k <= g.half[axis]; ++k) {
            node[axis] = static_cast<Index>(sign) * k;
            std::size_t idx = flat_index(g, node);
            solve_node(idx, prev);
            prev = idx;
          }
        }
      }
    }
  } catch (const InverseFailure& e) {
    out.complete = false;
    throw DivergenceError(std::string("phi_leaf: ") + e.what(), out);
  }

  return out;
}

Vector NormalFormU::u(const Vector& x) const {
  Vector dx = x - x0;
  return geninv0.a_plus * (f(x) - f0) + dx - geninv0.a_plus * (geninv0.a * dx);
}

double NormalFormU::exactness_residual(const Vector& x) const {
  return (geninv0.a * u(x) - aap * (f(x) - f0)).norm();
}

double NormalFormU::linearization_residual(const Vector& x) const {
  return (aap * (f(x) - f0) - geninv0.a * (x - x0)).norm();
}

NormalFormU normal_form_u(std::function<Vector(const Vector&)> f, const Vector& x0,
                          const GenInverse& geninv0, const RegularityOptions& opts) {
  NormalFormU nf;
  nf.f = std::move(f);
  nf.x0 = x0;
  nf.f0 = nf.f(x0);
  nf.geninv0 = geninv0;
  nf.aap = geninv0.a * geninv0.a_plus;

  if (opts.check) {
    auto fn = nf.f;
    OperatorFamily family = [fn](const Vector& x) { return fd_jacobian(fn, x); };
    LocallyFineReport rep = locally_fine_detect(family, x0, geninv0, opts.radius,
                                                opts.samples, opts.seed);
    if (!rep.locally_fine)
      throw InvalidInput("normal_form_u: x0 fails the generalized-regular "
                         "sampling check");
  }
  return nf;
}

}  // namespace oblique
