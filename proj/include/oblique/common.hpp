#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace oblique {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/* Relative rank cutoff: singular values below tol * sigma_max * max(rows, cols)
 * count as zero.  Every operation that needs a rank decision defaults to this. */
inline constexpr double kDefaultTol = 1e-10;

/* Open-ball membership tests are strict inequalities; this margin keeps points
 * sitting numerically on the boundary out. */
inline constexpr double kBallMargin = 1e-12;

inline constexpr std::uint64_t kDefaultSeed = 20240801ull;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error { using Error::Error; };

/* Two subspaces that were required to split the ambient space fail to. */
struct NotComplementary : Error { using Error::Error; };

/* A splitting-dependent construction hit a numerically singular restriction. */
struct DegenerateSplit : Error { using Error::Error; };

/* Operator lies outside the perturbation ball an operation is valid on. */
struct OutOfBall : Error { using Error::Error; };

/* No generalized inverse with the requested complements exists here. */
struct NoInverseInBall : Error { using Error::Error; };

/* A subspace is not a co-final member for the given complement. */
struct NotCofinal : Error { using Error::Error; };

/* Operator is not a member of the double-splitting set of the anchor. */
struct NotInS : Error { using Error::Error; };

/* Direction handed to a tangent-space operation leaves the tangent space. */
struct InvalidDirection : Error { using Error::Error; };

/* An operator point is missing the generalized inverse the call needs. */
struct NeedsSplitting : Error { using Error::Error; };

/* Newton solve failed to converge; message carries the last residual. */
struct InverseFailure : Error { using Error::Error; };

/* Evaluation point left the neighborhood where the local map is invertible. */
struct OutOfNeighborhood : Error { using Error::Error; };

struct ParseError : Error {
  int line = 0;
  ParseError(const std::string& msg, int line_no)
      : Error("line " + std::to_string(line_no) + ": " + msg), line(line_no) {}
};

/* Column-major flattening between B(R^n, R^m) and R^(mn). */
inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvec(const Vector& v, Index rows, Index cols) {
  if (v.size() != rows * cols) throw InvalidInput("unvec: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/* Deterministic random source.  mt19937_64 has a pinned bit stream, and the
 * uniform/gaussian conversion below is hand-rolled so results do not depend on
 * the standard library's distribution implementations. */
class Rng {
 public:
  explicit Rng(std::uint64_t seed = kDefaultSeed) : eng_(seed) {}

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t bits() { return eng_(); }

  double gaussian() {  // Box-Muller with a cached spare
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  Vector vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = gaussian();
    return v;
  }

  Matrix matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace oblique
