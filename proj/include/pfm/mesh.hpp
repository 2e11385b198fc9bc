#pragma once

#include "pfm/common.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <queue>
#include <span>
#include <sstream>
#include <unordered_map>

namespace pfm {

using VertexMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using TriangleMatrix = Eigen::Matrix<Index, Eigen::Dynamic, 3>;

/// Undirected mesh edge with its (at most two) incident triangles.
struct Edge {
  Index a = 0; ///< smaller vertex index
  Index b = 0; ///< larger vertex index
  std::array<Index, 2> faces{-1, -1};
  int face_count = 0;

  [[nodiscard]] bool is_boundary() const { return face_count == 1; }
};

namespace detail {

inline std::uint64_t edge_key(Index a, Index b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

inline double triangle_area(const Vec3& p0, const Vec3& p1, const Vec3& p2) {
  return 0.5 * (p1 - p0).cross(p2 - p0).norm();
}

} // namespace detail

/// Immutable manifold triangle mesh. All derived structure (edges, boundary,
/// areas, one-rings, components) is computed and validated at construction.
class TriangleMesh {
public:
  TriangleMesh() = default;

  TriangleMesh(VertexMatrix vertices, TriangleMatrix triangles)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    build();
  }

  [[nodiscard]] Index num_vertices() const { return vertices_.rows(); }
  [[nodiscard]] Index num_triangles() const { return triangles_.rows(); }
  [[nodiscard]] const VertexMatrix& vertices() const { return vertices_; }
  [[nodiscard]] const TriangleMatrix& triangles() const { return triangles_; }
  [[nodiscard]] Vec3 position(Index i) const { return vertices_.row(i).transpose(); }
  [[nodiscard]] std::array<Index, 3> triangle(Index t) const {
    return {triangles_(t, 0), triangles_(t, 1), triangles_(t, 2)};
  }

  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] Index num_boundary_edges() const { return num_boundary_edges_; }
  [[nodiscard]] Index num_interior_edges() const {
    return static_cast<Index>(edges_.size()) - num_boundary_edges_;
  }
  /// Index into edges() of the edge (a, b), or -1.
  [[nodiscard]] Index find_edge(Index a, Index b) const {
    auto it = edge_lookup_.find(detail::edge_key(a, b));
    return it == edge_lookup_.end() ? -1 : it->second;
  }

  [[nodiscard]] const Vector& triangle_areas() const { return triangle_areas_; }
  [[nodiscard]] double total_area() const { return total_area_; }
  [[nodiscard]] double bbox_diagonal() const { return bbox_diagonal_; }

  /// Sorted one-ring neighbours of vertex i.
  [[nodiscard]] std::span<const Index> neighbors(Index i) const {
    return {neighbor_data_.data() + neighbor_offsets_[i],
            static_cast<std::size_t>(neighbor_offsets_[i + 1] - neighbor_offsets_[i])};
  }
  /// Triangles incident to vertex i, in increasing order.
  [[nodiscard]] std::span<const Index> vertex_triangles(Index i) const {
    return {vt_data_.data() + vt_offsets_[i],
            static_cast<std::size_t>(vt_offsets_[i + 1] - vt_offsets_[i])};
  }

  [[nodiscard]] const std::vector<bool>& boundary_vertices() const { return boundary_vertex_; }
  [[nodiscard]] bool has_isolated_vertices() const { return has_isolated_; }

  [[nodiscard]] Index num_components() const { return num_components_; }
  [[nodiscard]] const std::vector<Index>& vertex_component() const { return component_; }

private:
  void build();

  VertexMatrix vertices_;
  TriangleMatrix triangles_;
  std::vector<Edge> edges_;
  std::unordered_map<std::uint64_t, Index> edge_lookup_;
  Index num_boundary_edges_ = 0;
  Vector triangle_areas_;
  double total_area_ = 0.0;
  double bbox_diagonal_ = 0.0;
  std::vector<Index> neighbor_offsets_{0};
  std::vector<Index> neighbor_data_;
  std::vector<Index> vt_offsets_{0};
  std::vector<Index> vt_data_;
  std::vector<bool> boundary_vertex_;
  bool has_isolated_ = false;
  Index num_components_ = 0;
  std::vector<Index> component_;
};

inline void TriangleMesh::build() {
  const Index n = num_vertices();
  const Index m = num_triangles();
  if (n == 0 || m == 0) throw InputError("empty mesh");
  if (!vertices_.allFinite()) throw InputError("non-finite vertex coordinates");

  bbox_diagonal_ = (vertices_.colwise().maxCoeff() - vertices_.colwise().minCoeff()).norm();
  const double min_area = 1e-12 * bbox_diagonal_ * bbox_diagonal_;

  triangle_areas_.resize(m);
  edge_lookup_.reserve(static_cast<std::size_t>(3 * m));
  for (Index t = 0; t < m; ++t) {
    const auto tri = triangle(t);
    for (int c = 0; c < 3; ++c) {
      if (tri[c] < 0 || tri[c] >= n) {
        std::ostringstream os;
        os << "triangle " << t << " references vertex " << tri[c] << " outside [0, " << n << ")";
        throw InputError(os.str());
      }
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      std::ostringstream os;
      os << "degenerate triangle " << t << " repeats a vertex index";
      throw InputError(os.str());
    }
    triangle_areas_[t] = detail::triangle_area(position(tri[0]), position(tri[1]), position(tri[2]));
    if (!(triangle_areas_[t] >= min_area)) {
      std::ostringstream os;
      os << "degenerate triangle " << t << " (area " << triangle_areas_[t] << ")";
      throw InputError(os.str());
    }
    for (int c = 0; c < 3; ++c) {
      const Index a = tri[c];
      const Index b = tri[(c + 1) % 3];
      auto [it, inserted] = edge_lookup_.try_emplace(detail::edge_key(a, b), static_cast<Index>(edges_.size()));
      if (inserted) edges_.push_back(Edge{std::min(a, b), std::max(a, b)});
      Edge& e = edges_[static_cast<std::size_t>(it->second)];
      if (e.face_count == 2) {
        std::ostringstream os;
        os << "non-manifold edge (" << e.a << ", " << e.b << ") has more than 2 incident triangles";
        throw InputError(os.str());
      }
      e.faces[static_cast<std::size_t>(e.face_count++)] = t;
    }
  }
  total_area_ = triangle_areas_.sum();

  boundary_vertex_.assign(static_cast<std::size_t>(n), false);
  for (const Edge& e : edges_) {
    if (e.is_boundary()) {
      ++num_boundary_edges_;
      boundary_vertex_[static_cast<std::size_t>(e.a)] = true;
      boundary_vertex_[static_cast<std::size_t>(e.b)] = true;
    }
  }

  // CSR adjacency
  std::vector<std::vector<Index>> nb(static_cast<std::size_t>(n));
  for (const Edge& e : edges_) {
    nb[static_cast<std::size_t>(e.a)].push_back(e.b);
    nb[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  std::vector<Index> vt_count(static_cast<std::size_t>(n), 0);
  for (Index t = 0; t < m; ++t)
    for (Index v : triangle(t)) ++vt_count[static_cast<std::size_t>(v)];
  neighbor_offsets_.assign(1, 0);
  vt_offsets_.assign(1, 0);
  for (Index i = 0; i < n; ++i) {
    auto& list = nb[static_cast<std::size_t>(i)];
    std::sort(list.begin(), list.end());
    neighbor_data_.insert(neighbor_data_.end(), list.begin(), list.end());
    neighbor_offsets_.push_back(static_cast<Index>(neighbor_data_.size()));
    vt_offsets_.push_back(vt_offsets_.back() + vt_count[static_cast<std::size_t>(i)]);
    if (list.empty()) has_isolated_ = true;
  }
  vt_data_.assign(static_cast<std::size_t>(vt_offsets_.back()), 0);
  std::vector<Index> fill(vt_offsets_.begin(), vt_offsets_.end() - 1);
  for (Index t = 0; t < m; ++t)
    for (Index v : triangle(t)) vt_data_[static_cast<std::size_t>(fill[static_cast<std::size_t>(v)]++)] = t;

  // connected components over the edge graph
  component_.assign(static_cast<std::size_t>(n), -1);
  num_components_ = 0;
  std::vector<Index> stack;
  for (Index s = 0; s < n; ++s) {
    if (component_[static_cast<std::size_t>(s)] >= 0) continue;
    component_[static_cast<std::size_t>(s)] = num_components_;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (Index w : neighbors(v)) {
        if (component_[static_cast<std::size_t>(w)] < 0) {
          component_[static_cast<std::size_t>(w)] = num_components_;
          stack.push_back(w);
        }
      }
    }
    ++num_components_;
  }
}

/// Lumped vertex areas s_i = (1/3) * sum of incident triangle areas.
inline Vector vertex_areas(const TriangleMesh& mesh) {
  Vector s = Vector::Zero(mesh.num_vertices());
  for (Index t = 0; t < mesh.num_triangles(); ++t)
    for (Index v : mesh.triangle(t)) s[v] += mesh.triangle_areas()[t] / 3.0;
  for (Index i = 0; i < s.size(); ++i) {
    if (!(s[i] > 0.0)) throw InputError("vertex " + std::to_string(i) + " is incident to no triangle");
  }
  return s;
}

/// Area-weighted vertex normals (unit length).
inline VertexMatrix vertex_normals(const TriangleMesh& mesh) {
  VertexMatrix normals = VertexMatrix::Zero(mesh.num_vertices(), 3);
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto tri = mesh.triangle(t);
    const Vec3 p0 = mesh.position(tri[0]);
    // cross product norm is twice the area: area weighting comes for free
    const Vec3 nt = (mesh.position(tri[1]) - p0).cross(mesh.position(tri[2]) - p0);
    for (Index v : tri) normals.row(v) += nt.transpose();
  }
  for (Index i = 0; i < normals.rows(); ++i) {
    const double len = normals.row(i).norm();
    if (len > 0.0) normals.row(i) /= len;
  }
  return normals;
}

/// Result of dropping vertices not referenced by any triangle.
struct CompactedMesh {
  VertexMatrix vertices;
  TriangleMatrix triangles;
  std::vector<Index> original_index; ///< new vertex -> old vertex
};

inline CompactedMesh drop_unreferenced(const VertexMatrix& vertices, const TriangleMatrix& triangles) {
  std::vector<Index> remap(static_cast<std::size_t>(vertices.rows()), -1);
  CompactedMesh out;
  for (Index t = 0; t < triangles.rows(); ++t) {
    for (int c = 0; c < 3; ++c) {
      const Index v = triangles(t, c);
      if (v < 0 || v >= vertices.rows())
        throw InputError("triangle " + std::to_string(t) + " references an out-of-range vertex");
      remap[static_cast<std::size_t>(v)] = 0;
    }
  }
  for (Index v = 0; v < vertices.rows(); ++v) {
    if (remap[static_cast<std::size_t>(v)] >= 0) {
      remap[static_cast<std::size_t>(v)] = static_cast<Index>(out.original_index.size());
      out.original_index.push_back(v);
    }
  }
  out.vertices.resize(static_cast<Index>(out.original_index.size()), 3);
  for (Index i = 0; i < out.vertices.rows(); ++i)
    out.vertices.row(i) = vertices.row(out.original_index[static_cast<std::size_t>(i)]);
  out.triangles.resize(triangles.rows(), 3);
  for (Index t = 0; t < triangles.rows(); ++t)
    for (int c = 0; c < 3; ++c) out.triangles(t, c) = remap[static_cast<std::size_t>(triangles(t, c))];
  return out;
}

/// Outcome of orientation repair.
struct OrientationReport {
  Index flipped_triangles = 0;
  bool orientable = true;
};

/// Makes triangle orientation consistent within each edge-connected component
/// of triangles. Closed components are oriented outward (positive signed volume);
/// open components keep the orientation of their lowest-index triangle.
/// Non-orientable components are left untouched.
inline OrientationReport orient_consistently(const VertexMatrix& vertices, TriangleMatrix& triangles) {
  const Index m = triangles.rows();
  OrientationReport report;
  // directed-edge incidence: edge key -> triangles
  std::unordered_map<std::uint64_t, std::vector<Index>> edge_faces;
  edge_faces.reserve(static_cast<std::size_t>(3 * m));
  for (Index t = 0; t < m; ++t)
    for (int c = 0; c < 3; ++c)
      edge_faces[detail::edge_key(triangles(t, c), triangles(t, (c + 1) % 3))].push_back(t);

  auto has_directed = [&](const TriangleMatrix& tris, Index t, Index a, Index b) {
    for (int c = 0; c < 3; ++c)
      if (tris(t, c) == a && tris(t, (c + 1) % 3) == b) return true;
    return false;
  };

  std::vector<int> flip(static_cast<std::size_t>(m), -1); // -1 unvisited, 0 keep, 1 flip
  TriangleMatrix out = triangles;
  for (Index seed = 0; seed < m; ++seed) {
    if (flip[static_cast<std::size_t>(seed)] >= 0) continue;
    std::vector<Index> component{seed};
    flip[static_cast<std::size_t>(seed)] = 0;
    bool consistent = true;
    bool closed = true;
    std::queue<Index> queue;
    queue.push(seed);
    while (!queue.empty()) {
      const Index t = queue.front();
      queue.pop();
      const bool t_flipped = flip[static_cast<std::size_t>(t)] == 1;
      for (int c = 0; c < 3; ++c) {
        Index a = triangles(t, c);
        Index b = triangles(t, (c + 1) % 3);
        if (t_flipped) std::swap(a, b);
        const auto& faces = edge_faces[detail::edge_key(a, b)];
        if (faces.size() < 2) closed = false;
        for (Index u : faces) {
          if (u == t) continue;
          // neighbour must traverse (a, b) as (b, a)
          const bool same_dir = has_directed(triangles, u, a, b);
          const int want = same_dir ? 1 : 0;
          int& fu = flip[static_cast<std::size_t>(u)];
          if (fu < 0) {
            fu = want;
            component.push_back(u);
            queue.push(u);
          } else if (fu != want) {
            consistent = false;
          }
        }
      }
    }
    if (!consistent) {
      report.orientable = false;
      for (Index t : component) flip[static_cast<std::size_t>(t)] = 0;
      continue;
    }
    for (Index t : component)
      if (flip[static_cast<std::size_t>(t)] == 1) std::swap(out(t, 1), out(t, 2));
    if (closed) {
      double volume = 0.0;
      for (Index t : component) {
        const Vec3 p0 = vertices.row(out(t, 0)).transpose();
        const Vec3 p1 = vertices.row(out(t, 1)).transpose();
        const Vec3 p2 = vertices.row(out(t, 2)).transpose();
        volume += p0.dot(p1.cross(p2)) / 6.0;
      }
      if (volume < 0.0) {
        for (Index t : component) {
          std::swap(out(t, 1), out(t, 2));
          flip[static_cast<std::size_t>(t)] ^= 1;
        }
      }
    }
  }
  for (Index t = 0; t < m; ++t)
    if (flip[static_cast<std::size_t>(t)] == 1) ++report.flipped_triangles;
  triangles = std::move(out);
  return report;
}

/// Submesh made of the given triangles; unreferenced vertices are dropped and
/// `original_index` maps each new vertex back to its index in `mesh`.
struct Submesh {
  TriangleMesh mesh;
  std::vector<Index> original_index;
};

inline Submesh extract_submesh(const TriangleMesh& mesh, const std::vector<Index>& triangle_ids) {
  TriangleMatrix tris(static_cast<Index>(triangle_ids.size()), 3);
  for (std::size_t i = 0; i < triangle_ids.size(); ++i)
    tris.row(static_cast<Index>(i)) = mesh.triangles().row(triangle_ids[i]);
  auto compact = drop_unreferenced(mesh.vertices(), tris);
  return {TriangleMesh(std::move(compact.vertices), std::move(compact.triangles)),
          std::move(compact.original_index)};
}

} // namespace pfm
