#pragma once

// Perturbation analysis of the Laplacian under a cut. Vertices of the full
// shape are split into a part N and its complement Nbar, reordered part-first,
// and the full stiffness is written as a block-diagonal matrix plus a
// perturbation supported on the boundary band:
//
//   L(t) = blockdiag(L_N, L_Nbar) + t [P_N  P; P^T  P_Nbar],   L(1) = L_M.
//
// Matrices here follow the positive semi-definite convention L = -W, and the
// full-shape lumped mass is held fixed for every t.

#include "pfm/spectral.hpp"

#include <set>

namespace pfm {

struct PerturbationSetup {
  std::vector<Index> order;   ///< reordered index -> full-mesh vertex (part first)
  std::vector<Index> inverse; ///< full-mesh vertex -> reordered index
  Index num_part = 0;
  Index num_rest = 0;
  SparseMatrix L_part;  ///< n x n, submesh stiffness of N
  SparseMatrix L_rest;  ///< nbar x nbar, submesh stiffness of Nbar
  SparseMatrix P_part;  ///< n x n
  SparseMatrix P_rest;  ///< nbar x nbar
  SparseMatrix P_cross; ///< n x nbar
  Vector mass;          ///< full-shape lumped mass, reordered
  std::vector<Index> part_boundary; ///< dN: part vertices (reordered) on a straddling triangle
  std::vector<Index> rest_boundary; ///< dNbar, reordered indices

  [[nodiscard]] Vector part_mass() const { return mass.head(num_part); }
  [[nodiscard]] Vector rest_mass() const { return mass.tail(num_rest); }

  [[nodiscard]] SparseMatrix block_diagonal() const { return assemble(0.0); }
  [[nodiscard]] SparseMatrix perturbation() const { return assemble(1.0) - assemble(0.0); }

  /// L(t).
  [[nodiscard]] SparseMatrix assemble(double t) const {
    const Index n = num_part + num_rest;
    std::vector<Triplet> trip;
    auto add = [&](const SparseMatrix& M, Index r0, Index c0, double s, bool mirror) {
      for (Index c = 0; c < M.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(M, c); it; ++it) {
          trip.emplace_back(r0 + it.row(), c0 + it.col(), s * it.value());
          if (mirror) trip.emplace_back(c0 + it.col(), r0 + it.row(), s * it.value());
        }
    };
    add(L_part, 0, 0, 1.0, false);
    add(L_rest, num_part, num_part, 1.0, false);
    if (t != 0.0) {
      add(P_part, 0, 0, t, false);
      add(P_rest, num_part, num_part, t, false);
      add(P_cross, 0, num_part, t, true);
    }
    SparseMatrix L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    return L;
  }
};

namespace detail {

/// -W restricted to a subset of triangles, in a local vertex numbering.
inline SparseMatrix cotan_laplacian_subset(const TriangleMesh& mesh, const std::vector<Index>& triangle_ids,
                                           const std::vector<Index>& local_index, Index size) {
  std::vector<Triplet> trip;
  trip.reserve(triangle_ids.size() * 12);
  for (Index t : triangle_ids) {
    const auto tri = mesh.triangle(t);
    for (int c = 0; c < 3; ++c) {
      const Index k = tri[static_cast<std::size_t>(c)];
      const Index i = tri[static_cast<std::size_t>((c + 1) % 3)];
      const Index j = tri[static_cast<std::size_t>((c + 2) % 3)];
      const double w = 0.5 * cot_at(mesh.position(k), mesh.position(i), mesh.position(j));
      const Index li = local_index[static_cast<std::size_t>(i)];
      const Index lj = local_index[static_cast<std::size_t>(j)];
      trip.emplace_back(li, lj, -w);
      trip.emplace_back(lj, li, -w);
      trip.emplace_back(li, li, w);
      trip.emplace_back(lj, lj, w);
    }
  }
  SparseMatrix L(size, size);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

inline SparseMatrix prune(SparseMatrix M, double tol) {
  M.prune([tol](Index, Index, double v) { return std::abs(v) > tol; });
  M.makeCompressed();
  return M;
}

} // namespace detail

/// Splits `full` into the part given by `part_vertices` and its complement.
/// Triangles with vertices on both sides belong to neither submesh; their
/// contribution to L_M is exactly the perturbation.
inline PerturbationSetup parametric_laplacian(const TriangleMesh& full, const std::vector<Index>& part_vertices) {
  const Index n_full = full.num_vertices();
  std::vector<char> in_part(static_cast<std::size_t>(n_full), 0);
  for (Index v : part_vertices) {
    if (v < 0 || v >= n_full) throw InputError("parametric_laplacian: part vertex out of range");
    in_part[static_cast<std::size_t>(v)] = 1;
  }
  PerturbationSetup s;
  s.inverse.assign(static_cast<std::size_t>(n_full), -1);
  for (Index v = 0; v < n_full; ++v)
    if (in_part[static_cast<std::size_t>(v)]) s.order.push_back(v);
  s.num_part = static_cast<Index>(s.order.size());
  for (Index v = 0; v < n_full; ++v)
    if (!in_part[static_cast<std::size_t>(v)]) s.order.push_back(v);
  s.num_rest = n_full - s.num_part;
  for (Index i = 0; i < n_full; ++i) s.inverse[static_cast<std::size_t>(s.order[static_cast<std::size_t>(i)])] = i;
  if (s.num_part == 0 || s.num_rest == 0) throw InputError("parametric_laplacian: part and complement must both be nonempty");

  std::vector<Index> part_tris, rest_tris;
  std::set<Index> part_bd, rest_bd;
  for (Index t = 0; t < full.num_triangles(); ++t) {
    const auto tri = full.triangle(t);
    const int count = in_part[static_cast<std::size_t>(tri[0])] + in_part[static_cast<std::size_t>(tri[1])] +
                      in_part[static_cast<std::size_t>(tri[2])];
    if (count == 3) part_tris.push_back(t);
    else if (count == 0) rest_tris.push_back(t);
    else
      for (Index v : tri) {
        const Index r = s.inverse[static_cast<std::size_t>(v)];
        if (in_part[static_cast<std::size_t>(v)]) part_bd.insert(r);
        else rest_bd.insert(r - s.num_part);
      }
  }
  if (part_tris.empty() || rest_tris.empty())
    throw InputError("parametric_laplacian: the cut leaves a submesh without triangles");
  s.part_boundary.assign(part_bd.begin(), part_bd.end());
  s.rest_boundary.assign(rest_bd.begin(), rest_bd.end());

  std::vector<Index> local(static_cast<std::size_t>(n_full));
  for (Index v = 0; v < n_full; ++v) {
    const Index r = s.inverse[static_cast<std::size_t>(v)];
    local[static_cast<std::size_t>(v)] = r < s.num_part ? r : r - s.num_part;
  }
  s.L_part = detail::cotan_laplacian_subset(full, part_tris, local, s.num_part);
  s.L_rest = detail::cotan_laplacian_subset(full, rest_tris, local, s.num_rest);

  // numeric extraction: P = L_M (reordered) - blockdiag(L_N, L_Nbar)
  std::vector<Index> all_tris(static_cast<std::size_t>(full.num_triangles()));
  std::iota(all_tris.begin(), all_tris.end(), 0);
  const SparseMatrix L_full = detail::cotan_laplacian_subset(full, all_tris, s.inverse, n_full);
  double max_abs = 0.0;
  for (Index c = 0; c < L_full.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(L_full, c); it; ++it) max_abs = std::max(max_abs, std::abs(it.value()));
  const double tol = 1e-14 * max_abs;
  s.P_part = detail::prune(SparseMatrix(L_full.topLeftCorner(s.num_part, s.num_part)) - s.L_part, tol);
  s.P_rest = detail::prune(SparseMatrix(L_full.bottomRightCorner(s.num_rest, s.num_rest)) - s.L_rest, tol);
  s.P_cross = detail::prune(SparseMatrix(L_full.topRightCorner(s.num_part, s.num_rest)), tol);

  const Vector full_mass = vertex_areas(full);
  s.mass.resize(n_full);
  for (Index i = 0; i < n_full; ++i) s.mass[i] = full_mass[s.order[static_cast<std::size_t>(i)]];
  return s;
}

/// L(t) for the given split (part-first ordering).
inline SparseMatrix parametric_laplacian(const TriangleMesh& full, const std::vector<Index>& part_vertices, double t) {
  if (t < 0.0 || t > 1.0) throw InputError("parametric_laplacian: t must lie in [0, 1]");
  return parametric_laplacian(full, part_vertices).assemble(t);
}

/// d lambda_i / dt = phi_i^T P_N phi_i (mass-orthonormal phi_i, fixed mass).
inline double eigenvalue_derivative(const SpectralBasis& part, const SparseMatrix& P_part, Index i) {
  if (i < 0 || i >= part.k()) throw InputError("eigenvalue_derivative: index out of range");
  const Vector phi = part.eigenvectors.col(i);
  return phi.dot(P_part * phi);
}

struct EigenvectorDerivative {
  Vector total;           ///< length n + nbar, part-first ordering
  Vector part_term;       ///< first sum: supported on N
  Vector complement_term; ///< second sum: supported on Nbar
};

/// First-order eigenvector variation: mixing with the other eigenvectors of N
/// through P_N, plus completion on Nbar through the cross block P. Requires
/// complete eigendecompositions of both blocks and a simple lambda_i.
inline EigenvectorDerivative eigenvector_derivative(const SpectralBasis& part, const SpectralBasis& complement,
                                                    const SparseMatrix& P_part, const SparseMatrix& P_cross, Index i,
                                                    double relative_gap = 1e-6) {
  if (i < 0 || i >= part.k()) throw InputError("eigenvector_derivative: index out of range");
  const Index n = part.num_vertices();
  const Index nbar = complement.num_vertices();
  const double li = part.eigenvalues[i];
  // absolute floor so that two numerically zero eigenvalues count as equal
  const double floor = 1e-12 * part.eigenvalues.cwiseAbs().maxCoeff();
  auto check_gap = [&](double lj) {
    if (std::abs(li - lj) <= relative_gap * std::max(std::abs(li), std::abs(lj)) + floor)
      throw NumericalError("eigenvector_derivative: eigenvalue " + std::to_string(i) +
                           " is not simple (distinct-eigenvalue hypothesis fails)");
  };
  const Vector phi = part.eigenvectors.col(i);
  EigenvectorDerivative out;
  out.part_term = Vector::Zero(n);
  const Vector Pphi = P_part * phi;
  for (Index j = 0; j < part.k(); ++j) {
    if (j == i) continue;
    check_gap(part.eigenvalues[j]);
    out.part_term += (part.eigenvectors.col(j).dot(Pphi) / (li - part.eigenvalues[j])) * part.eigenvectors.col(j);
  }
  out.complement_term = Vector::Zero(nbar);
  const Vector crossed = P_cross.transpose() * phi;
  for (Index j = 0; j < complement.k(); ++j) {
    check_gap(complement.eigenvalues[j]);
    out.complement_term +=
        (complement.eigenvectors.col(j).dot(crossed) / (li - complement.eigenvalues[j])) * complement.eigenvectors.col(j);
  }
  out.total.resize(n + nbar);
  out.total << out.part_term, out.complement_term;
  return out;
}

struct BoundaryInteraction {
  Vector f;                 ///< per-vertex interaction strength
  Index skipped_pairs = 0;  ///< ordered pairs dropped for near-equal eigenvalues
};

/// f(v) = sum_{i != j} (phi_iv phi_jv / (lambda_i - lambda_j))^2 over the basis;
/// pairs with |lambda_i - lambda_j| < 1e-8 lambda_k are skipped and counted.
inline BoundaryInteraction boundary_interaction(const SpectralBasis& basis) {
  const Index k = basis.k();
  const Index n = basis.num_vertices();
  const double cutoff = 1e-8 * std::abs(basis.eigenvalues[k - 1]);
  BoundaryInteraction out;
  out.f = Vector::Zero(n);
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      const double gap = basis.eigenvalues[i] - basis.eigenvalues[j];
      if (std::abs(gap) < cutoff) {
        out.skipped_pairs += 2;
        continue;
      }
      // (i,j) and (j,i) contribute equally
      out.f += 2.0 * (basis.eigenvectors.col(i).cwiseProduct(basis.eigenvectors.col(j)) / gap).cwiseAbs2();
    }
  }
  return out;
}

/// Total first-order variation of the eigenbasis under a boundary coupling
/// D = kappa * I on the given vertices: sum_i || sum_{j != i} (phi_i^T D phi_j)/(lambda_i - lambda_j) phi_j ||_S^2.
inline double eigenbasis_variation(const SpectralBasis& basis, const std::vector<Index>& cut_vertices, double kappa) {
  const Index k = basis.k();
  const double cutoff = 1e-8 * std::abs(basis.eigenvalues[k - 1]);
  Matrix rows(static_cast<Index>(cut_vertices.size()), k);
  for (std::size_t c = 0; c < cut_vertices.size(); ++c) rows.row(static_cast<Index>(c)) = basis.eigenvectors.row(cut_vertices[c]);
  const Matrix coupling = kappa * rows.transpose() * rows; // phi_i^T D phi_j
  double total = 0.0;
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) {
      if (j == i) continue;
      const double gap = basis.eigenvalues[i] - basis.eigenvalues[j];
      if (std::abs(gap) < cutoff) continue;
      total += std::pow(coupling(i, j) / gap, 2);
    }
  return total;
}

/// Complete eigendecomposition of one diagonal block with the given mass.
inline SpectralBasis complete_basis(const SparseMatrix& L, const Vector& mass) {
  auto [values, vectors] = dense_generalized_eigen(Matrix(L), mass);
  return {std::move(values), std::move(vectors), mass};
}

struct DerivativeCheck {
  Index index = 0;         ///< eigenpair index within the part block
  double eigenvalue = 0.0;
  double formula = 0.0;    ///< eigenvalues: closed-form derivative; eigenvectors: |formula|_S
  double finite_difference = 0.0;
  double relative_error = 0.0;
};

struct PerturbationReport {
  std::vector<DerivativeCheck> eigenvalues;
  std::vector<DerivativeCheck> eigenvectors;
  Index skipped_multiple = 0; ///< part eigenpairs skipped as not simple
};

/// Central finite differences of the eigenpairs of L(t) at t = 0 against the
/// closed-form first-order derivatives, for the first simple eigenpairs of the
/// part block. Dense solves: meant for meshes of a few thousand vertices at most.
inline PerturbationReport perturbation_check(const TriangleMesh& full, const std::vector<Index>& part_vertices,
                                             Index value_count, Index vector_count, double step = 1e-4,
                                             double relative_gap = 1e-6) {
  if (!(step > 0.0)) throw InputError("perturbation_check: step must be positive");
  const PerturbationSetup s = parametric_laplacian(full, part_vertices);
  const SpectralBasis part = complete_basis(s.L_part, s.part_mass());
  const SpectralBasis rest = complete_basis(s.L_rest, s.rest_mass());
  auto plus = dense_generalized_eigen(Matrix(s.assemble(step)), s.mass);
  auto minus = dense_generalized_eigen(Matrix(s.assemble(-step)), s.mass);
  const Index n = s.num_part;

  const double floor = 1e-12 * part.eigenvalues.cwiseAbs().maxCoeff();
  auto is_simple = [&](Index i) {
    const double li = part.eigenvalues[i];
    auto close = [&](double lj) { return std::abs(li - lj) <= relative_gap * std::max(std::abs(li), std::abs(lj)) + floor; };
    for (Index j = 0; j < part.k(); ++j)
      if (j != i && close(part.eigenvalues[j])) return false;
    for (Index j = 0; j < rest.k(); ++j)
      if (close(rest.eigenvalues[j])) return false;
    return true;
  };
  // eigenpair of L(t) continuing the padded part eigenvector: largest S-overlap, sign aligned
  auto track = [&](const std::pair<Vector, Matrix>& eig, const Vector& padded) {
    const Vector overlaps = eig.second.transpose() * s.mass.cwiseProduct(padded);
    Index best = 0;
    overlaps.cwiseAbs().maxCoeff(&best);
    Vector u = eig.second.col(best);
    if (overlaps[best] < 0.0) u = -u;
    return std::pair<double, Vector>(eig.first[best], u);
  };
  auto s_norm = [&](const Vector& x) { return std::sqrt(x.dot(s.mass.cwiseProduct(x))); };

  PerturbationReport report;
  for (Index i = 0; i < part.k(); ++i) {
    if (static_cast<Index>(report.eigenvalues.size()) >= value_count &&
        static_cast<Index>(report.eigenvectors.size()) >= vector_count)
      break;
    if (!is_simple(i)) {
      ++report.skipped_multiple;
      continue;
    }
    Vector padded = Vector::Zero(n + s.num_rest);
    padded.head(n) = part.eigenvectors.col(i);
    const auto [lp, up] = track(plus, padded);
    const auto [lm, um] = track(minus, padded);
    if (static_cast<Index>(report.eigenvalues.size()) < value_count) {
      DerivativeCheck c{i, part.eigenvalues[i], eigenvalue_derivative(part, s.P_part, i), (lp - lm) / (2.0 * step), 0.0};
      c.relative_error = std::abs(c.formula - c.finite_difference) / std::max(std::abs(c.finite_difference), 1e-300);
      report.eigenvalues.push_back(c);
    }
    if (static_cast<Index>(report.eigenvectors.size()) < vector_count) {
      const Vector fd = (up - um) / (2.0 * step);
      const Vector formula = eigenvector_derivative(part, rest, s.P_part, s.P_cross, i, relative_gap).total;
      DerivativeCheck c{i, part.eigenvalues[i], s_norm(formula), s_norm(fd), 0.0};
      c.relative_error = s_norm(formula - fd) / std::max(s_norm(fd), 1e-300);
      report.eigenvectors.push_back(c);
    }
  }
  return report;
}

} // namespace pfm
