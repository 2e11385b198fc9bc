#pragma once

// End-to-end partial matching of one shape pair and its on-disk outputs.

#include "pfm/config.hpp"
#include "pfm/mesh_io.hpp"
#include "pfm/shot.hpp"

namespace pfm {

struct MatchSettings {
  EnergyParams energy;
  SolverOptions solver;
  EigenOptions eigen;
  double shot_radius = 0.0; ///< 0: default_shot_radius(full)
};

struct PreparedPair {
  SpectralBasis phi; ///< partial shape
  SpectralBasis psi; ///< full shape
  Matrix F;          ///< partial-shape descriptors
  Matrix G;          ///< full-shape descriptors
  double shot_radius = 0.0;
  Index flagged_part = 0;
  Index flagged_full = 0;
  Index rank = 0;
  Matrix W;
  Vector d;
  double area_part = 0.0;
};

struct MatchOutput {
  PreparedPair pair;
  MatchResult match;
};

/// Bases, descriptors (computed unless given), rank, W and d.
inline PreparedPair prepare_pair(const TriangleMesh& part, const TriangleMesh& full, const MatchSettings& s,
                                 const Matrix* F = nullptr, const Matrix* G = nullptr) {
  s.energy.validate();
  const Index k = s.energy.k;
  if (k >= part.num_vertices() || k >= full.num_vertices())
    throw InputError("k=" + std::to_string(k) + " must be smaller than both vertex counts (" +
                     std::to_string(part.num_vertices()) + ", " + std::to_string(full.num_vertices()) + ")");
  PreparedPair p;
  p.phi = eigensolve(laplacian(part), k, s.eigen);
  p.psi = eigensolve(laplacian(full), k, s.eigen);
  if ((F == nullptr) != (G == nullptr)) throw InputError("descriptors must be given for both shapes or neither");
  if (F) {
    if (F->rows() != part.num_vertices() || G->rows() != full.num_vertices() || F->cols() != G->cols())
      throw InputError("precomputed descriptor sizes do not match the meshes");
    p.F = *F;
    p.G = *G;
  } else {
    p.shot_radius = s.shot_radius > 0.0 ? s.shot_radius : default_shot_radius(full);
    DescriptorField df = shot_descriptors(part, p.shot_radius);
    DescriptorField dg = shot_descriptors(full, p.shot_radius);
    p.flagged_part = df.num_flagged();
    p.flagged_full = dg.num_flagged();
    if (p.flagged_part || p.flagged_full)
      log::warn(std::to_string(p.flagged_part + p.flagged_full) + " vertices have too few neighbors for SHOT");
    p.F = std::move(df.values);
    p.G = std::move(dg.values);
  }
  p.rank = estimate_rank(p.phi.eigenvalues, p.psi.eigenvalues, k);
  p.W = build_weight_matrix(k, p.rank, s.energy.sigma_w);
  p.d = build_d_vector(k, p.rank);
  p.area_part = part.total_area();
  return p;
}

inline MatchEnergy make_energy(const PreparedPair& p, const TriangleMesh& full, const EnergyParams& params) {
  const Matrix A = fourier_coeffs(p.phi, p.F);
  return {DataTerm(A, p.psi.eigenvectors, p.psi.mass, p.G), TriangleMetric(full, params.ms_smoothing), p.psi.mass, p.area_part, p.W, p.d,
          params};
}

inline MatchOutput match_shapes(const TriangleMesh& part, const TriangleMesh& full, const MatchSettings& s,
                                const Matrix* F = nullptr, const Matrix* G = nullptr) {
  MatchOutput out;
  out.pair = prepare_pair(part, full, s, F, G);
  log::info("rank estimate r=" + std::to_string(out.pair.rank) + " (slope " +
            std::to_string(static_cast<double>(out.pair.rank) / static_cast<double>(s.energy.k)) + ")");
  const MatchEnergy energy = make_energy(out.pair, full, s.energy);
  const RefinementData spectral{out.pair.phi.eigenvectors, out.pair.phi.mass, out.pair.psi.eigenvectors};
  out.match = alternate(energy, spectral, out.pair.rank, s.solver);
  return out;
}

/// Per-vertex RGB from normalized coordinates.
inline ColorMatrix coordinate_colors(const TriangleMesh& mesh) {
  const Eigen::RowVector3d lo = mesh.vertices().colwise().minCoeff();
  const Eigen::RowVector3d span = (mesh.vertices().colwise().maxCoeff() - lo).cwiseMax(1e-300);
  ColorMatrix c(mesh.num_vertices(), 3);
  for (Index i = 0; i < mesh.num_vertices(); ++i)
    for (int a = 0; a < 3; ++a)
      c(i, a) = static_cast<std::uint8_t>(std::lround(255.0 * (mesh.vertices()(i, a) - lo[a]) / span[a]));
  return c;
}

/// Writes C.bin, v.csv, pi.csv, corr.csv, energy.csv, refine.csv, report.txt
/// and a colour-transfer visualization (full.ply, part.ply). Vertex indices
/// are translated back to file numbering through the given maps.
inline void write_match_outputs(const std::filesystem::path& dir, const TriangleMesh& part, const TriangleMesh& full,
                                const MatchOutput& out, const std::vector<Index>& part_ids,
                                const std::vector<Index>& full_ids) {
  std::filesystem::create_directories(dir);
  const MatchResult& m = out.match;
  auto pid = [&](Index i) { return i < 0 ? i : part_ids[static_cast<std::size_t>(i)]; };
  auto fid = [&](Index i) { return i < 0 ? i : full_ids[static_cast<std::size_t>(i)]; };

  write_matrix(dir / "C.bin", m.C.C);
  {
    CsvWriter w(dir / "v.csv", {"vertex", "value", "eta"});
    for (Index i = 0; i < m.v.size(); ++i) w.row(fid(i), m.v[i], eta(m.v[i]));
    w.close();
  }
  {
    CsvWriter w(dir / "pi.csv", {"full_vertex", "part_vertex"});
    for (std::size_t i = 0; i < m.pi.size(); ++i) w.row(fid(static_cast<Index>(i)), pid(m.pi[i]));
    w.close();
  }
  {
    CsvWriter w(dir / "corr.csv", {"part_vertex", "full_vertex"});
    for (std::size_t x = 0; x < m.part_to_full.size(); ++x) w.row(pid(static_cast<Index>(x)), fid(m.part_to_full[x]));
    w.close();
  }
  {
    CsvWriter w(dir / "energy.csv", {"iteration", "data", "area", "mumford_shah", "slant", "orthogonality", "total"});
    for (std::size_t i = 0; i < m.energy_trace.size(); ++i) {
      const auto& e = m.energy_trace[i];
      w.row(i, e.data, e.area, e.mumford_shah, e.slant, e.orthogonality, e.total);
    }
    w.close();
  }
  {
    CsvWriter w(dir / "refine.csv", {"outer", "half_step", "residual"});
    for (std::size_t o = 0; o < m.refine_residuals.size(); ++o)
      for (std::size_t j = 0; j < m.refine_residuals[o].size(); ++j) w.row(o + 1, j, m.refine_residuals[o][j]);
    w.close();
  }
  {
    std::ofstream r(dir / "report.txt");
    r << std::setprecision(17);
    r << "k=" << out.pair.phi.k() << "\nrank=" << out.pair.rank << "\nslope="
      << static_cast<double>(out.pair.rank) / static_cast<double>(out.pair.phi.k())
      << "\nshot_radius=" << out.pair.shot_radius << "\nouter_iterations=" << m.outer_iterations
      << "\nconverged=" << (m.converged ? 1 : 0) << "\nfinal_energy=" << m.energy_trace.back().total
      << "\npart_area_estimate=" << m.v.unaryExpr([](double t) { return eta(t); }).dot(out.pair.psi.mass)
      << "\npart_area=" << out.pair.area_part << '\n';
    for (const auto& f : m.flags) r << "flag=" << f << '\n';
    if (!r) throw InputError("write failed: " + (dir / "report.txt").string());
  }
  const ColorMatrix full_colors = coordinate_colors(full);
  ColorMatrix part_colors(part.num_vertices(), 3);
  for (Index x = 0; x < part.num_vertices(); ++x)
    part_colors.row(x) = full_colors.row(m.part_to_full[static_cast<std::size_t>(x)]);
  write_ply(dir / "full.ply", full, PlyFormat::BinaryLittleEndian, &full_colors);
  write_ply(dir / "part.ply", part, PlyFormat::BinaryLittleEndian, &part_colors);
}

} // namespace pfm
