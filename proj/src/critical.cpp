#include "oblique/critical.hpp"

#include <algorithm>

namespace oblique {

double criticality_residual(const ConstraintSpec& spec) {
  if (spec.tangent_basis.ambient != spec.x0.size() ||
      spec.gradient.size() != spec.x0.size())
    throw InvalidInput("criticality_residual: dimension mismatch");
  if (!spec.gradient.allFinite() || !spec.x0.allFinite())
    throw InvalidInput("criticality_residual: non-finite input");
  if (spec.tangent_basis.dim() == 0) return 0.0;
  /* sup over unit e in the tangent space of |<g, e>| is the norm of the
   * orthogonal projection of g onto it. */
  double along = (spec.tangent_basis.basis.transpose() * spec.gradient).norm();
  return along / (1.0 + spec.gradient.norm());
}

std::vector<SweepEntry> sweep_candidates(
    const std::function<double(const Vector&)>& f,
    const std::function<Vector(const Vector&)>& gradient, const LeafSample& leaf) {
  if (!leaf.complete)
    throw InvalidInput("sweep_candidates: leaf sample is incomplete");
  const std::size_t d = leaf.shape.size();
  if (d == 0 || leaf.size() == 0)
    throw InvalidInput("sweep_candidates: empty leaf sample");

  std::vector<Index> half(d);
  std::vector<std::size_t> stride(d);
  std::size_t acc = 1;
  for (std::size_t i = d; i-- > 0;) {
    half[i] = (leaf.shape[i] - 1) / 2;
    stride[i] = acc;
    acc *= static_cast<std::size_t>(leaf.shape[i]);
  }

  std::vector<SweepEntry> entries;
  std::vector<Index> offsets(d);
  for (std::size_t idx = 0; idx < leaf.size(); ++idx) {
    std::size_t rem = idx;
    bool interior = true;
    for (std::size_t i = 0; i < d; ++i) {
      offsets[i] = static_cast<Index>(rem / stride[i]) - half[i];
      rem %= stride[i];
      if (half[i] >= 1 && std::abs(offsets[i]) >= half[i]) interior = false;
    }
    if (!interior) continue;

    /* Tangent frame by central differences across the neighboring nodes. */
    Matrix frame(leaf.x0.size(), static_cast<Index>(d));
    Index cols = 0;
    for (std::size_t i = 0; i < d; ++i) {
      if (half[i] < 1) continue;
      std::size_t plus = idx + stride[i];
      std::size_t minus = idx - stride[i];
      frame.col(cols++) =
          (leaf.reconstruct(plus) - leaf.reconstruct(minus)) / (2.0 * leaf.step);
    }
    if (cols == 0) continue;

    Vector x = leaf.reconstruct(idx);
    ConstraintSpec spec;
    spec.tangent_basis = SubspaceBasis::span(frame.leftCols(cols));
    spec.x0 = x;
    spec.gradient = gradient(x);

    SweepEntry entry;
    entry.node = idx;
    entry.grid_point = leaf.grid[idx];
    entry.value = f(x);
    entry.residual = criticality_residual(spec);
    entries.push_back(std::move(entry));
  }

  std::sort(entries.begin(), entries.end(), [](const SweepEntry& a, const SweepEntry& b) {
    if (a.residual != b.residual) return a.residual < b.residual;
    return a.node < b.node;
  });
  return entries;
}

}  // namespace oblique
