#pragma once

#include "oblique/coords.hpp"
#include "oblique/geninv.hpp"

#include <functional>
#include <string>
#include <vector>

namespace oblique {

/* A field of subspaces x -> M(x), given either directly or as the kernel
 * family x -> N(f'(x)) of a map's Jacobian. */
struct DistributionFamily {
  Index ambient = 0;
  std::function<SubspaceBasis(const Vector&)> subspace;
  std::function<Matrix(const Vector&)> jacobian;
};

DistributionFamily kernel_family(Index ambient,
                                 std::function<Matrix(const Vector&)> jacobian);
DistributionFamily subspace_family(Index ambient,
                                   std::function<SubspaceBasis(const Vector&)> subspace);

SubspaceBasis family_subspace(const DistributionFamily& family, const Vector& x,
                              double tol = kDefaultTol);

/* Central differences with h = 1e-6 * (1 + ||x||). */
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x);

/* x -> alpha(x) in B(M0, E*), expressed in fixed orthonormal bases of M0 and
 * E* chosen at construction. */
struct AlphaField {
  SubspaceBasis m0;
  SubspaceBasis e_star;
  std::function<Matrix(const Vector&)> eval;  // dim(E*) x dim(M0)
};

struct RegularityOptions {
  bool check = true;       // sample-test the base point before trusting it
  double radius = 1e-2;
  int samples = 64;
  std::uint64_t seed = kDefaultSeed;
};

/* Kernel-family field at a base point x0 with T0 = f'(x0):
 *   alpha(x) = P(onto E* along N0) ∘ D^-1(T0+, T_x) ∘ P(onto N0 along E*),
 * where E* = R(T0+) and N0 = N(T0).  Throws OutOfNeighborhood where D(x) is
 * numerically singular. */
AlphaField alpha_field_kernel(const std::function<Matrix(const Vector&)>& jacobian,
                              const Vector& x0, const GenInverse& geninv0,
                              const RegularityOptions& opts = {});

/* Generic field through the coordinate operator of M(x) against M0 and E*.
 * Throws NotCofinal at points where M(x) ⊕ E* fails. */
AlphaField alpha_field_generic(const DistributionFamily& family,
                               const SubspaceBasis& m0, const SubspaceBasis& e_star);

struct LeafProblem {
  Vector x0;
  SubspaceBasis m0;      // = family(x0)
  SubspaceBasis e_star;  // fixed complement
  DistributionFamily family;
};

LeafProblem make_leaf_problem(const Vector& x0, const SubspaceBasis& m0,
                              const SubspaceBasis& e_star,
                              const DistributionFamily& family,
                              double tol = 1e-8);

/* Sampled graph of the local solution psi : M0 -> E* on a tensor grid centered
 * at the base coordinate of x0.  Coordinates are with respect to the stored
 * orthonormal bases; node j of axis i ranges over offsets -n_i..n_i with
 * spacing `step`, shape[i] = 2 n_i + 1. */
struct LeafSample {
  Vector x0;
  SubspaceBasis m0;
  SubspaceBasis e_star;
  std::vector<Index> shape;
  double step = 0.0;
  std::vector<Vector> grid;  // M0 coordinates per node
  std::vector<Vector> psi;   // E* coordinates per node
  double mixed_path_residual = 0.0;
  bool integrable = true;   // mixed-path residual within 100 * step^4
  bool complete = true;     // false on an aborted fill (unfilled nodes are NaN)
  std::string jacobian_mode = "subspace";

  std::size_t size() const;
  std::size_t base_index() const;
  /* offsets[i] in [-n_i, n_i] */
  std::size_t index_of(const std::vector<Index>& offsets) const;
  Vector reconstruct(std::size_t node) const;
};

/* Integration aborted because the field threw; carries what was filled. */
struct AbortedLeaf : Error {
  LeafSample partial;
  AbortedLeaf(const std::string& msg, LeafSample p)
      : Error(msg), partial(std::move(p)) {}
};

/* State went non-finite or a Newton solve diverged; carries what was filled. */
struct DivergenceError : Error {
  LeafSample partial;
  DivergenceError(const std::string& msg, LeafSample p)
      : Error(msg), partial(std::move(p)) {}
};

struct IntegrateOptions {
  bool parallel = false;     // distribute final-axis rays over threads
  bool mixed_path = true;    // measure corner two-path inconsistency
};

/* Fixed-step RK4 on psi'(z) = alpha(z + psi(z)) along per-axis sweeps.  The
 * mixed-path residual integrates to shared corner nodes via both axis orders;
 * a residual above 100 * step^4 marks the family as non-integrable in the
 * returned sample (reported, never silently accepted). */
LeafSample integrate_leaf(const LeafProblem& problem, const AlphaField& field,
                          const Vector& extents, double step,
                          const IntegrateOptions& opts = {});

/* The rectifying map phi(x) = T0+ (f(x) - f(x0)) + P(onto N0 along E*) x and
 * its pieces.  phi'(x0) = I; the inverse is a damped Newton solve. */
struct PhiMaps {
  Vector x0;
  GenInverse geninv0;
  SubspaceBasis n0;      // N(T0)
  SubspaceBasis e_star;  // R(T0+)
  Matrix p_n0;           // projection onto N0 along E*
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> jac;
  Vector f0;
  std::string jacobian_mode;

  Vector forward(const Vector& x) const;
  Matrix forward_jacobian(const Vector& x) const;  // = D(T0+, f'(x))
  Vector inverse(const Vector& y) const;
  Vector inverse_from(const Vector& y, const Vector& guess) const;
  Vector comp0(const Vector& y) const;  // P_N0 phi^-1(y)
  Vector comp1(const Vector& y) const;  // P_E* phi^-1(y)
};

PhiMaps phi_map(std::function<Vector(const Vector&)> f,
                std::function<Matrix(const Vector&)> fprime,  // may be empty
                const Vector& x0, const GenInverse& geninv0,
                const RegularityOptions& opts = {});

/* Leaf through x0 computed pointwise from the rectification: at each grid
 * node z the leaf point is phi^-1 of the node, psi(z) its E* component. */
LeafSample phi_leaf(const PhiMaps& maps, const Vector& extents, double step);

/* u(x) = T0+ (f(x) - f(x0)) + (I - T0+ T0)(x - x0); u(x0) = 0, u'(x0) = I.
 * T0 u(x) = A A+ (f(x) - f(x0)) holds identically; the linearization residual
 * ||A A+ (f(x) - f(x0)) - T0 (x - x0)|| measures the second-order deviation
 * of f from the factorized linear model and decays like ||x - x0||^2. */
struct NormalFormU {
  Vector x0;
  GenInverse geninv0;
  std::function<Vector(const Vector&)> f;
  Vector f0;
  Matrix aap;  // A A+

  Vector u(const Vector& x) const;
  double exactness_residual(const Vector& x) const;
  double linearization_residual(const Vector& x) const;
};

NormalFormU normal_form_u(std::function<Vector(const Vector&)> f, const Vector& x0,
                          const GenInverse& geninv0,
                          const RegularityOptions& opts = {});

}  // namespace oblique
