#pragma once

// Fourier analysis in Laplacian bases and the slanted-diagonal prior of
// partial functional maps.

#include "pfm/eigensolver.hpp"

namespace pfm {

/// k x k functional map. Storage orientation: C * a = b, where a holds
/// coefficients in the partial-shape basis (Phi) and b in the full-shape
/// basis (Psi); rows index Psi, columns index Phi.
struct FunctionalMap {
  Matrix C;
  Index rank = 0; ///< estimated rank r
  [[nodiscard]] Index k() const { return C.rows(); }
  [[nodiscard]] double slope() const { return k() > 0 ? static_cast<double>(rank) / static_cast<double>(k()) : 0.0; }
};

/// a = Phi^T S f.
inline Vector fourier_coeffs(const SpectralBasis& basis, const Vector& f) {
  if (f.size() != basis.num_vertices())
    throw InputError("fourier_coeffs: field has " + std::to_string(f.size()) + " values, basis has " +
                     std::to_string(basis.num_vertices()) + " vertices");
  return basis.eigenvectors.transpose() * basis.mass.cwiseProduct(f);
}

/// Column-wise projection of a stack of fields (n x q) onto the basis (k x q).
inline Matrix fourier_coeffs(const SpectralBasis& basis, const Matrix& fields) {
  if (fields.rows() != basis.num_vertices()) throw InputError("fourier_coeffs: dimension mismatch");
  return basis.eigenvectors.transpose() * (basis.mass.asDiagonal() * fields);
}

/// r = max{ i <= k : lambda_part_i < max_{j<=k} lambda_full_j }.
/// Throws when r = 0 (no spectral overlap).
inline Index estimate_rank(const Vector& lambda_part, const Vector& lambda_full, Index k) {
  if (k < 1 || lambda_part.size() < k || lambda_full.size() < k)
    throw InputError("estimate_rank: spectra must hold at least k values");
  const double top = lambda_full.head(k).maxCoeff();
  Index r = 0;
  for (Index i = 0; i < k; ++i)
    if (lambda_part[i] < top) r = i + 1;
  if (r == 0) throw NumericalError("estimate_rank: degenerate spectra (no partial eigenvalue below the full-shape maximum)");
  return r;
}

/// Funnel-shaped slant weights: w_ij = exp(-sigma sqrt(i^2+j^2)) * dist((i,j), line),
/// 1-based (i,j), line through (1,1) with direction (1, r/k).
inline Matrix build_weight_matrix(Index k, Index r, double sigma) {
  if (r < 1 || r > k) throw InputError("build_weight_matrix: rank must satisfy 1 <= r <= k");
  if (!(sigma >= 0.0)) throw InputError("build_weight_matrix: sigma must be non-negative");
  const double slope = static_cast<double>(r) / static_cast<double>(k);
  const double len = std::sqrt(1.0 + slope * slope);
  const double nx = 1.0 / len;
  const double ny = slope / len;
  Matrix W(k, k);
  for (Index i = 1; i <= k; ++i) {
    for (Index j = 1; j <= k; ++j) {
      const double di = static_cast<double>(i - 1);
      const double dj = static_cast<double>(j - 1);
      const double dist = std::abs(nx * dj - ny * di);
      W(i - 1, j - 1) = std::exp(-sigma * std::sqrt(static_cast<double>(i * i + j * j))) * dist;
    }
  }
  return W;
}

/// d_i = 1 for i <= r, 0 otherwise.
inline Vector build_d_vector(Index k, Index r) {
  if (r < 0 || r > k) throw InputError("build_d_vector: rank must satisfy 0 <= r <= k");
  Vector d = Vector::Zero(k);
  d.head(r).setOnes();
  return d;
}

/// Ground-truth functional map from a vertex correspondence
/// part_to_full[x] = y: C_ji = psi_j^T S_M (T phi_i), T phi_i the zero-extended
/// transfer of phi_i onto the full shape.
inline Matrix ground_truth_map(const SpectralBasis& part, const SpectralBasis& full,
                               const std::vector<Index>& part_to_full) {
  if (static_cast<Index>(part_to_full.size()) != part.num_vertices())
    throw InputError("ground_truth_map: correspondence size mismatch");
  Matrix transferred = Matrix::Zero(full.num_vertices(), part.k());
  for (std::size_t x = 0; x < part_to_full.size(); ++x)
    transferred.row(part_to_full[x]) = part.eigenvectors.row(static_cast<Index>(x));
  return full.eigenvectors.transpose() * (full.mass.asDiagonal() * transferred);
}

} // namespace pfm
