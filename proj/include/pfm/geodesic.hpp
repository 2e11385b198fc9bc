#pragma once

// Approximate geodesic distances: Dijkstra on the vertex graph augmented with
// one Steiner node per edge midpoint; every pair of nodes on a common triangle
// is linked by its straight-line (in-triangle) distance.

#include "pfm/mesh.hpp"

#include <limits>
#include <queue>

namespace pfm {

class GeodesicGraph {
public:
  explicit GeodesicGraph(const TriangleMesh& mesh) : num_vertices_(mesh.num_vertices()) {
    const Index n = mesh.num_vertices();
    const Index num_nodes = n + static_cast<Index>(mesh.edges().size());
    std::vector<Vec3> pos(static_cast<std::size_t>(num_nodes));
    for (Index i = 0; i < n; ++i) pos[static_cast<std::size_t>(i)] = mesh.position(i);
    for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
      const auto& edge = mesh.edges()[e];
      pos[static_cast<std::size_t>(n) + e] = 0.5 * (mesh.position(edge.a) + mesh.position(edge.b));
    }

    std::vector<std::vector<std::pair<Index, double>>> adj(static_cast<std::size_t>(num_nodes));
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
      const auto tri = mesh.triangle(t);
      std::array<Index, 6> nodes{tri[0], tri[1], tri[2],
                                 n + mesh.find_edge(tri[0], tri[1]),
                                 n + mesh.find_edge(tri[1], tri[2]),
                                 n + mesh.find_edge(tri[2], tri[0])};
      for (int a = 0; a < 6; ++a) {
        for (int b = a + 1; b < 6; ++b) {
          const Index u = nodes[static_cast<std::size_t>(a)];
          const Index v = nodes[static_cast<std::size_t>(b)];
          const double len = (pos[static_cast<std::size_t>(u)] - pos[static_cast<std::size_t>(v)]).norm();
          adj[static_cast<std::size_t>(u)].emplace_back(v, len);
          adj[static_cast<std::size_t>(v)].emplace_back(u, len);
        }
      }
    }
    offsets_.reserve(static_cast<std::size_t>(num_nodes) + 1);
    offsets_.push_back(0);
    for (auto& list : adj) {
      std::sort(list.begin(), list.end());
      // parallel links from the two triangles sharing an edge are identical
      list.erase(std::unique(list.begin(), list.end(),
                             [](const auto& x, const auto& y) { return x.first == y.first; }),
                 list.end());
      for (const auto& [v, w] : list) {
        targets_.push_back(v);
        weights_.push_back(w);
      }
      offsets_.push_back(static_cast<Index>(targets_.size()));
    }
  }

  [[nodiscard]] Index num_vertices() const { return num_vertices_; }

  /// Distances from the nearest of `sources` to every mesh vertex (+inf if unreachable).
  [[nodiscard]] Vector distances(std::span<const Index> sources) const {
    const Index num_nodes = static_cast<Index>(offsets_.size()) - 1;
    std::vector<double> dist(static_cast<std::size_t>(num_nodes), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, Index>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (Index s : sources) {
      if (s < 0 || s >= num_vertices_) throw InputError("geodesic source " + std::to_string(s) + " out of range");
      dist[static_cast<std::size_t>(s)] = 0.0;
      heap.emplace(0.0, s);
    }
    while (!heap.empty()) {
      const auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[static_cast<std::size_t>(u)]) continue;
      for (Index k = offsets_[static_cast<std::size_t>(u)]; k < offsets_[static_cast<std::size_t>(u) + 1]; ++k) {
        const Index v = targets_[static_cast<std::size_t>(k)];
        const double nd = d + weights_[static_cast<std::size_t>(k)];
        if (nd < dist[static_cast<std::size_t>(v)]) {
          dist[static_cast<std::size_t>(v)] = nd;
          heap.emplace(nd, v);
        }
      }
    }
    return Eigen::Map<const Vector>(dist.data(), num_vertices_);
  }

  [[nodiscard]] Vector distances(Index source) const { return distances(std::span<const Index>(&source, 1)); }

private:
  Index num_vertices_ = 0;
  std::vector<Index> offsets_;
  std::vector<Index> targets_;
  std::vector<double> weights_;
};

inline Vector geodesic_distances(const TriangleMesh& mesh, Index source) {
  if (source < 0 || source >= mesh.num_vertices())
    throw InputError("geodesic source " + std::to_string(source) + " out of range");
  return GeodesicGraph(mesh).distances(source);
}

/// Greedy max-min (farthest point) sampling; the first sample is `seed`.
/// Ties are broken by the smallest vertex index.
inline std::vector<Index> farthest_point_sample(const TriangleMesh& mesh, Index count, Index seed) {
  if (count > mesh.num_vertices()) throw InputError("sample count exceeds vertex count");
  if (seed < 0 || seed >= mesh.num_vertices()) throw InputError("sample seed out of range");
  std::vector<Index> samples;
  if (count <= 0) return samples;
  const GeodesicGraph graph(mesh);
  samples.push_back(seed);
  Vector nearest = graph.distances(seed);
  while (static_cast<Index>(samples.size()) < count) {
    Index best = 0;
    for (Index i = 1; i < nearest.size(); ++i)
      if (nearest[i] > nearest[best]) best = i;
    samples.push_back(best);
    nearest = nearest.cwiseMin(graph.distances(best));
  }
  return samples;
}

} // namespace pfm
