#pragma once

// Truncated generalized eigendecomposition K phi = lambda S phi for a symmetric
// positive semi-definite K (here K = -W) and a positive diagonal mass S.
//
// Small problems go through a dense symmetric solver on S^{-1/2} K S^{-1/2};
// larger ones through thick-restart Lanczos on the shift-inverted operator
// S^{1/2} (K - sigma S)^{-1} S^{1/2} with full reorthogonalization.

#include "pfm/laplacian.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

namespace pfm {

/// First k eigenpairs of the Laplace-Beltrami operator of one shape.
struct SpectralBasis {
  Vector eigenvalues;  ///< ascending, >= 0
  Matrix eigenvectors; ///< n x k, columns S-orthonormal
  Vector mass;         ///< lumped mass diagonal S

  [[nodiscard]] Index k() const { return eigenvalues.size(); }
  [[nodiscard]] Index num_vertices() const { return eigenvectors.rows(); }
};

struct EigenOptions {
  double shift = -1e-8;
  Index dense_threshold = 1500; ///< use the dense solver when n <= this
  double tolerance = 1e-10;     ///< relative Ritz residual for Lanczos convergence
  int max_restarts = 500;
  bool force_lanczos = false;
};

namespace detail {

inline double unit_hash(std::uint64_t i) {
  // splitmix64 -> [-0.5, 0.5)
  std::uint64_t z = i + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * (1.0 / 9007199254740992.0) - 0.5;
}

/// Flip each column so that its largest-magnitude entry (first on ties) is
/// positive, then order near-equal eigenvalues deterministically.
inline void canonicalize(Vector& values, Matrix& vectors) {
  const Index k = values.size();
  for (Index c = 0; c < k; ++c) {
    Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values[a] < values[b]; });
  // within clusters of relative width 1e-9, order by the first significant entry
  auto first_significant = [&](Index c) {
    const double cutoff = 1e-6 * vectors.col(c).cwiseAbs().maxCoeff();
    for (Index i = 0; i < vectors.rows(); ++i)
      if (std::abs(vectors(i, c)) > cutoff) return std::make_pair(i, -vectors(i, c));
    return std::make_pair(vectors.rows(), 0.0);
  };
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    const double base = values[order[start]];
    while (end < order.size() &&
           values[order[end]] - base <= 1e-9 * std::max(std::abs(base), std::abs(values[order[end]])))
      ++end;
    if (end - start > 1)
      std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](Index a, Index b) { return first_significant(a) < first_significant(b); });
    start = end;
  }
  Vector sorted_values(k);
  Matrix sorted_vectors(vectors.rows(), k);
  for (Index c = 0; c < k; ++c) {
    sorted_values[c] = values[order[static_cast<std::size_t>(c)]];
    sorted_vectors.col(c) = vectors.col(order[static_cast<std::size_t>(c)]);
  }
  values = std::move(sorted_values);
  vectors = std::move(sorted_vectors);
}

inline void check_residuals(const SparseMatrix& K, const Vector& mass, const Vector& values, const Matrix& vectors) {
  Vector row_abs = Vector::Zero(K.rows());
  for (Index c = 0; c < K.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(K, c); it; ++it) row_abs[it.row()] += std::abs(it.value());
  const double scale = row_abs.maxCoeff();
  for (Index c = 0; c < values.size(); ++c) {
    const Vector Sx = mass.cwiseProduct(vectors.col(c));
    const double residual = (K * vectors.col(c) - values[c] * Sx).norm();
    const double denom = std::max(std::abs(values[c]) * Sx.norm(), 1e-8 * scale * vectors.col(c).norm());
    if (!(residual <= 1e-6 * denom))
      throw NumericalError("eigenpair " + std::to_string(c) + " residual " + std::to_string(residual / denom) +
                           " exceeds tolerance");
  }
}

/// Largest `nev` eigenpairs of a symmetric operator restricted to the
/// orthogonal complement of `locked`, by thick-restart Lanczos with full
/// reorthogonalization. theta is descending.
struct RitzPairs {
  Vector theta;
  Matrix vectors;
};

template <class Apply>
RitzPairs lanczos_largest(const Apply& apply_full, Index n, Index nev, const Matrix& locked, std::uint64_t seed,
                          const EigenOptions& opts) {
  auto deflate = [&](Vector& x) {
    if (locked.cols() == 0) return;
    for (int pass = 0; pass < 2; ++pass) x.noalias() -= locked * (locked.transpose() * x);
  };
  auto apply = [&](const Vector& y) {
    Vector x = y;
    deflate(x);
    Vector w = apply_full(x);
    deflate(w);
    return w;
  };
  const Index m = std::min<Index>(n - locked.cols() - 1, std::max<Index>(2 * nev + 1, nev + 20));
  if (m <= nev) throw NumericalError("eigensolve: problem too small for the Lanczos solver");
  Matrix V(n, m + 1);
  Matrix T = Matrix::Zero(m, m);
  Vector start(n);
  for (Index i = 0; i < n; ++i) start[i] = 1.0 + unit_hash(static_cast<std::uint64_t>(i) + seed * 1000003u);
  deflate(start);
  V.col(0) = start.normalized();

  Index kept = 0;
  Vector theta;
  bool converged = false;
  double worst = 0.0;
  for (int restart = 0; restart <= opts.max_restarts; ++restart) {
    double beta = 0.0;
    for (Index j = kept; j < m; ++j) {
      Vector w = apply(V.col(j));
      Vector h = V.leftCols(j + 1).transpose() * w;
      w.noalias() -= V.leftCols(j + 1) * h;
      const Vector h2 = V.leftCols(j + 1).transpose() * w; // second Gram-Schmidt pass
      w.noalias() -= V.leftCols(j + 1) * h2;
      h += h2;
      // couplings to kept Ritz vectors are the restart arrow, already in T
      for (Index i = kept; i <= j; ++i) T(i, j) = T(j, i) = h[i];
      beta = w.norm();
      if (beta <= 1e-14 * std::abs(T(j, j)) || beta == 0.0) {
        // invariant subspace: continue with a fresh direction
        Vector fresh(n);
        for (Index i = 0; i < n; ++i)
          fresh[i] = unit_hash(static_cast<std::uint64_t>(i) * 7919u + static_cast<std::uint64_t>(j) + 13u + seed);
        deflate(fresh);
        for (int pass = 0; pass < 2; ++pass) fresh -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * fresh);
        V.col(j + 1) = fresh.normalized();
        beta = 0.0;
      } else {
        V.col(j + 1) = w / beta;
      }
      if (j + 1 < m) T(j + 1, j) = T(j, j + 1) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> small(T);
    theta = small.eigenvalues().reverse();
    Matrix S = small.eigenvectors().rowwise().reverse();
    converged = true;
    worst = 0.0;
    for (Index i = 0; i < nev; ++i) {
      const double rel = std::abs(beta * S(m - 1, i)) / std::max(std::abs(theta[i]), 1e-300);
      worst = std::max(worst, rel);
      if (rel > opts.tolerance) converged = false;
    }
    if (converged) return {theta.head(nev), V.leftCols(m) * S.leftCols(nev)};
    // thick restart: keep the leading Ritz pairs plus the residual direction
    kept = std::min<Index>(m - 1, nev + (m - nev) / 2);
    Matrix kept_vectors = V.leftCols(m) * S.leftCols(kept);
    const Vector residual_dir = V.col(m);
    T.setZero();
    for (Index i = 0; i < kept; ++i) {
      T(i, i) = theta[i];
      T(kept, i) = T(i, kept) = beta * S(m - 1, i);
    }
    V.leftCols(kept) = kept_vectors;
    V.col(kept) = residual_dir;
  }
  throw NumericalError("eigensolve: Lanczos did not converge (worst relative Ritz residual " + std::to_string(worst) + ")");
}

} // namespace detail

/// All eigenpairs of K x = lambda diag(mass) x for a dense symmetric K.
/// Eigenvectors are mass-orthonormal; order is ascending.
inline std::pair<Vector, Matrix> dense_generalized_eigen(const Matrix& K, const Vector& mass) {
  const Vector inv_sqrt = mass.cwiseSqrt().cwiseInverse();
  Matrix A = inv_sqrt.asDiagonal() * K * inv_sqrt.asDiagonal();
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(A);
  if (solver.info() != Eigen::Success) throw NumericalError("dense symmetric eigensolver failed");
  Matrix vectors = inv_sqrt.asDiagonal() * solver.eigenvectors();
  return {solver.eigenvalues(), std::move(vectors)};
}

/// Smallest k eigenpairs of K x = lambda S x (K sparse symmetric PSD, S = diag(mass) > 0).
inline SpectralBasis generalized_eigensolve(const SparseMatrix& K, const Vector& mass, Index k,
                                            const EigenOptions& opts = {}) {
  const Index n = K.rows();
  if (k < 1 || k >= n) throw InputError("eigensolve: k must satisfy 1 <= k < n (k=" + std::to_string(k) +
                                        ", n=" + std::to_string(n) + ")");
  if (!(mass.minCoeff() > 0.0)) throw InputError("eigensolve: mass must be strictly positive");

  SpectralBasis basis;
  basis.mass = mass;
  if (n <= opts.dense_threshold && !opts.force_lanczos) {
    auto [values, vectors] = dense_generalized_eigen(Matrix(K), mass);
    basis.eigenvalues = values.head(k);
    basis.eigenvectors = vectors.leftCols(k);
  } else {
    const Vector sqrt_mass = mass.cwiseSqrt();
    SparseMatrix shifted = K;
    for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= opts.shift * mass[i];
    Eigen::SimplicialLDLT<SparseMatrix> factor(shifted);
    if (factor.info() != Eigen::Success) throw NumericalError("eigensolve: factorization of K - sigma S failed");
    auto apply = [&](const Vector& y) -> Vector {
      return sqrt_mass.cwiseProduct(factor.solve(sqrt_mass.cwiseProduct(y)));
    };

    // Krylov spaces from one start vector miss copies of exactly repeated
    // eigenvalues; deflated passes pick them up until none lies below the k-th.
    detail::RitzPairs found = detail::lanczos_largest(apply, n, k, Matrix(n, 0), 0, opts);
    for (std::uint64_t pass = 1; pass <= 32; ++pass) {
      const Index room = n - found.vectors.cols() - 2;
      if (room < 1) break;
      const detail::RitzPairs extra =
          detail::lanczos_largest(apply, n, std::min<Index>({k, 10, room}), found.vectors, pass, opts);
      const double kth = found.theta[k - 1];
      Index better = 0;
      while (better < extra.theta.size() && extra.theta[better] > kth * (1.0 + 1e-9)) ++better;
      if (better == 0) break;
      Vector theta(k + better);
      theta << found.theta, extra.theta.head(better);
      Matrix vectors(n, k + better);
      vectors << found.vectors, extra.vectors.leftCols(better);
      std::vector<Index> order(static_cast<std::size_t>(k + better));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return theta[a] > theta[b]; });
      for (Index i = 0; i < k; ++i) {
        found.theta[i] = theta[order[static_cast<std::size_t>(i)]];
        found.vectors.col(i) = vectors.col(order[static_cast<std::size_t>(i)]);
      }
    }
    const Vector& theta = found.theta;
    const Matrix& ritz = found.vectors;
    basis.eigenvalues.resize(k);
    for (Index i = 0; i < k; ++i) basis.eigenvalues[i] = opts.shift + 1.0 / theta[i];
    basis.eigenvectors = sqrt_mass.cwiseInverse().asDiagonal() * ritz;
    // re-normalize in the mass inner product
    for (Index c = 0; c < k; ++c)
      basis.eigenvectors.col(c) /= std::sqrt(basis.eigenvectors.col(c).dot(mass.cwiseProduct(basis.eigenvectors.col(c))));
  }
  detail::canonicalize(basis.eigenvalues, basis.eigenvectors);
  return basis;
}

/// Smallest k eigenpairs of L = -S^{-1} W, i.e. (-W) phi = lambda S phi.
inline SpectralBasis eigensolve(const LaplacianPair& pair, Index k, const EigenOptions& opts = {}) {
  return generalized_eigensolve(SparseMatrix(-pair.stiffness), pair.mass, k, opts);
}

/// Explicit residual check of a basis against its generating pair; throws on failure.
inline void verify_basis(const LaplacianPair& pair, const SpectralBasis& basis) {
  detail::check_residuals(SparseMatrix(-pair.stiffness), pair.mass, basis.eigenvalues, basis.eigenvectors);
}

} // namespace pfm
