#pragma once

#include "pfm/mesh.hpp"

namespace pfm {

/// Cotangent stiffness W and lumped mass S of a mesh.
///
/// Sign convention: off-diagonal w_ij = (cot a_ij + cot b_ij)/2 (one term on
/// boundary edges), w_ii = -sum_j w_ij. W is negative semi-definite and the
/// Laplacian is L = -S^{-1} W.
struct LaplacianPair {
  SparseMatrix stiffness;
  Vector mass;
};

namespace detail {

inline double cot_at(const Vec3& apex, const Vec3& p, const Vec3& q) {
  const Vec3 u = p - apex;
  const Vec3 v = q - apex;
  return u.dot(v) / u.cross(v).norm();
}

} // namespace detail

inline SparseMatrix cotan_stiffness(const TriangleMesh& mesh) {
  const Index n = mesh.num_vertices();
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(12 * mesh.num_triangles()));
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto tri = mesh.triangle(t);
    for (int c = 0; c < 3; ++c) {
      const Index k = tri[static_cast<std::size_t>(c)];
      const Index i = tri[static_cast<std::size_t>((c + 1) % 3)];
      const Index j = tri[static_cast<std::size_t>((c + 2) % 3)];
      const double w = 0.5 * detail::cot_at(mesh.position(k), mesh.position(i), mesh.position(j));
      if (!std::isfinite(w)) throw NumericalError("cotangent overflow in triangle " + std::to_string(t));
      triplets.emplace_back(i, j, w);
      triplets.emplace_back(j, i, w);
      triplets.emplace_back(i, i, -w);
      triplets.emplace_back(j, j, -w);
    }
  }
  SparseMatrix W(n, n);
  W.setFromTriplets(triplets.begin(), triplets.end());
  W.makeCompressed();
  return W;
}

inline Vector mass_matrix(const TriangleMesh& mesh) { return vertex_areas(mesh); }

inline LaplacianPair laplacian(const TriangleMesh& mesh) { return {cotan_stiffness(mesh), mass_matrix(mesh)}; }

} // namespace pfm
