#pragma once

// Synthetic partial shapes and the Princeton evaluation protocol.

#include "pfm/geodesic.hpp"
#include "pfm/shapes.hpp"

namespace pfm {

/// correspondence[x] = full-shape vertex from which partial vertex x originates.
struct GroundTruth {
  std::vector<Index> correspondence;

  void validate(Index num_full) const {
    std::vector<char> seen(static_cast<std::size_t>(num_full), 0);
    for (Index y : correspondence) {
      if (y < 0 || y >= num_full) throw InputError("ground truth target " + std::to_string(y) + " out of range");
      if (seen[static_cast<std::size_t>(y)]) throw InputError("ground truth is not injective (target " + std::to_string(y) + ")");
      seen[static_cast<std::size_t>(y)] = 1;
    }
  }
};

struct PartialShape {
  TriangleMesh mesh;
  GroundTruth truth;
};

struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

/// Keeps the triangles whose three vertices satisfy (x - p) . n >= 0.
/// Straddling triangles are dropped, never split.
inline PartialShape plane_cut(const TriangleMesh& mesh, const Plane& plane) {
  const double len = plane.normal.norm();
  if (!(len > 0.0)) throw InputError("plane_cut: plane normal must be nonzero");
  const Vec3 n = plane.normal / len;
  std::vector<char> side(static_cast<std::size_t>(mesh.num_vertices()));
  for (Index i = 0; i < mesh.num_vertices(); ++i) side[static_cast<std::size_t>(i)] = (mesh.position(i) - plane.point).dot(n) >= 0.0;
  std::vector<Index> keep;
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto tri = mesh.triangle(t);
    if (side[static_cast<std::size_t>(tri[0])] && side[static_cast<std::size_t>(tri[1])] && side[static_cast<std::size_t>(tri[2])])
      keep.push_back(t);
  }
  if (keep.empty()) throw InputError("plane_cut: no triangle lies on the positive side of the plane");
  auto sub = extract_submesh(mesh, keep);
  return {std::move(sub.mesh), {std::move(sub.original_index)}};
}

/// Removes geodesic discs grown at the same rate around `seed_count` farthest
/// samples until the kept area is at most `area_budget` times the total.
/// The one-ring of every seed is always removed.
inline PartialShape erode_holes(const TriangleMesh& mesh, Index seed_count, double area_budget) {
  if (!(area_budget > 0.0 && area_budget < 1.0)) throw InputError("erode_holes: area budget must lie in (0, 1)");
  if (seed_count < 1 || seed_count > mesh.num_vertices()) throw InputError("erode_holes: invalid seed count");
  const auto seeds = farthest_point_sample(mesh, seed_count, 0);
  const Vector dist = GeodesicGraph(mesh).distances(std::span<const Index>(seeds));

  const Index m = mesh.num_triangles();
  Vector reach(m); // radius at which the triangle is swallowed
  for (Index t = 0; t < m; ++t) {
    const auto tri = mesh.triangle(t);
    reach[t] = std::max({dist[tri[0]], dist[tri[1]], dist[tri[2]]});
  }
  std::vector<char> removed(static_cast<std::size_t>(m), 0);
  double kept = mesh.total_area();
  for (Index s : seeds)
    for (Index t : mesh.vertex_triangles(s))
      if (!removed[static_cast<std::size_t>(t)]) {
        removed[static_cast<std::size_t>(t)] = 1;
        kept -= mesh.triangle_areas()[t];
      }
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return reach[a] < reach[b]; });
  const double target = area_budget * mesh.total_area();
  std::size_t pos = 0;
  while (kept > target && pos < order.size()) {
    // grow the shared radius to the next triangle and swallow every tie
    const double radius = reach[order[pos]];
    while (pos < order.size() && reach[order[pos]] <= radius) {
      const Index t = order[pos++];
      if (!removed[static_cast<std::size_t>(t)]) {
        removed[static_cast<std::size_t>(t)] = 1;
        kept -= mesh.triangle_areas()[t];
      }
    }
  }
  std::vector<Index> keep;
  for (Index t = 0; t < m; ++t)
    if (!removed[static_cast<std::size_t>(t)]) keep.push_back(t);
  if (keep.empty()) throw InputError("erode_holes: area budget cannot be met without removing every triangle");
  auto sub = extract_submesh(mesh, keep);
  return {std::move(sub.mesh), {std::move(sub.original_index)}};
}

/// Plane cut with the given normal whose offset is bisected so that the kept
/// area is as close as possible to (and not above) `keep_fraction` of the total.
inline PartialShape plane_cut_fraction(const TriangleMesh& mesh, const Vec3& normal, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction < 1.0)) throw InputError("plane_cut: keep fraction must lie in (0, 1)");
  if (!(normal.norm() > 0.0)) throw InputError("plane_cut: plane normal must be nonzero");
  const Vec3 n = normal.normalized();
  const Vector heights = mesh.vertices() * n;
  double lo = heights.minCoeff(), hi = heights.maxCoeff();
  // same side test as plane_cut, so the bisected offset reproduces exactly
  auto kept = [&](double offset) {
    const Vec3 point = offset * n;
    std::vector<char> side(static_cast<std::size_t>(mesh.num_vertices()));
    for (Index i = 0; i < mesh.num_vertices(); ++i) side[static_cast<std::size_t>(i)] = (mesh.position(i) - point).dot(n) >= 0.0;
    double area = 0.0;
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
      const auto tri = mesh.triangle(t);
      if (side[static_cast<std::size_t>(tri[0])] && side[static_cast<std::size_t>(tri[1])] && side[static_cast<std::size_t>(tri[2])])
        area += mesh.triangle_areas()[t];
    }
    return area / mesh.total_area();
  };
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (kept(mid) > keep_fraction ? lo : hi) = mid;
  }
  return plane_cut(mesh, {hi * n, n});
}

/// Bumpy icosphere model and a plane cut of an isometrically bent copy.
struct SyntheticPair {
  TriangleMesh full;
  PartialShape part;
};

struct SyntheticPairOptions {
  int level = 4;                 ///< icosphere subdivision level (level 4: 2562 vertices)
  double scale = 25.0;           ///< model radius
  double bend_radius = 15.0;     ///< in units of the model radius
  double keep_fraction = 0.6;
  Vec3 normal = Vec3(0.3, 0.2, 1.0);
};

inline SyntheticPair synthetic_pair(const SyntheticPairOptions& o = {}) {
  if (o.level < 0 || !(o.scale > 0.0) || !(o.bend_radius > 0.0)) throw InputError("synthetic_pair: invalid options");
  SyntheticPair p;
  p.full = shapes::scaled(shapes::bumpy_sphere(o.level), o.scale);
  const TriangleMesh bent = shapes::bend(p.full, o.bend_radius * o.scale);
  p.part = plane_cut_fraction(bent, o.normal, o.keep_fraction);
  return p;
}

struct PrincetonErrors {
  Vector errors;                ///< one entry per assigned partial vertex
  std::vector<Index> vertices;  ///< partial vertex of each entry
  Index unassigned = 0;

  [[nodiscard]] double mean() const { return errors.size() ? errors.mean() : 0.0; }
  [[nodiscard]] double fraction_below(double threshold) const {
    if (errors.size() == 0) return 0.0;
    return static_cast<double>((errors.array() <= threshold).count()) / static_cast<double>(errors.size());
  }
};

/// eps(x) = d_M(y, y*) / sqrt(area(M)); prediction[x] < 0 marks x unassigned.
inline PrincetonErrors princeton_error(const std::vector<Index>& prediction, const GroundTruth& truth,
                                       const TriangleMesh& full) {
  if (prediction.size() != truth.correspondence.size())
    throw InputError("princeton_error: prediction and ground truth sizes differ");
  const Index n = full.num_vertices();
  PrincetonErrors out;
  for (std::size_t x = 0; x < prediction.size(); ++x) {
    const Index y = prediction[x];
    if (y < 0) {
      ++out.unassigned;
      continue;
    }
    if (y >= n) throw InputError("princeton_error: predicted vertex out of range");
    out.vertices.push_back(static_cast<Index>(x));
  }
  out.errors.resize(static_cast<Index>(out.vertices.size()));
  const GeodesicGraph graph(full);
  const double scale = 1.0 / std::sqrt(full.total_area());
  parallel_for(static_cast<Index>(out.vertices.size()), [&](Index i) {
    const Index x = out.vertices[static_cast<std::size_t>(i)];
    const Index y = prediction[static_cast<std::size_t>(x)];
    const Index y_star = truth.correspondence[static_cast<std::size_t>(x)];
    out.errors[i] = y == y_star ? 0.0 : graph.distances(y_star)[y] * scale;
  });
  return out;
}

/// Fraction of errors <= each threshold.
inline Vector cumulative_curve(const Vector& errors, const Vector& thresholds) {
  Vector sorted = errors;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  Vector out(thresholds.size());
  for (Index i = 0; i < thresholds.size(); ++i) {
    const auto it = std::upper_bound(sorted.data(), sorted.data() + sorted.size(), thresholds[i]);
    out[i] = sorted.size() ? static_cast<double>(it - sorted.data()) / static_cast<double>(sorted.size()) : 0.0;
  }
  return out;
}

} // namespace pfm
