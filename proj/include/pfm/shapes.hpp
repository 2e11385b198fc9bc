#pragma once

// Procedural test shapes: grids, strips, icospheres, bumpy spheres, and
// simple deformations.

#include "pfm/mesh.hpp"


namespace pfm::shapes {

/// Regular grid of `nx` x `ny` cells over [0,w]x[0,h] in the z=0 plane,
/// two counterclockwise triangles per cell.
inline TriangleMesh grid(Index nx, Index ny, double width = 1.0, double height = 1.0) {
  VertexMatrix v((nx + 1) * (ny + 1), 3);
  for (Index j = 0; j <= ny; ++j)
    for (Index i = 0; i <= nx; ++i)
      v.row(j * (nx + 1) + i) << width * static_cast<double>(i) / static_cast<double>(nx),
          height * static_cast<double>(j) / static_cast<double>(ny), 0.0;
  TriangleMatrix f(2 * nx * ny, 3);
  Index t = 0;
  for (Index j = 0; j < ny; ++j) {
    for (Index i = 0; i < nx; ++i) {
      const Index a = j * (nx + 1) + i;
      const Index b = a + 1;
      const Index c = a + (nx + 1) + 1;
      const Index d = a + (nx + 1);
      f.row(t++) << a, b, c;
      f.row(t++) << a, c, d;
    }
  }
  return {std::move(v), std::move(f)};
}

/// 1-to-4 midpoint subdivision. When `project_radius` > 0 new vertices are
/// pushed onto the sphere of that radius centred at the origin.
inline TriangleMesh subdivide(const TriangleMesh& mesh, double project_radius = 0.0) {
  const Index n = mesh.num_vertices();
  VertexMatrix v(n + static_cast<Index>(mesh.edges().size()), 3);
  v.topRows(n) = mesh.vertices();
  for (std::size_t e = 0; e < mesh.edges().size(); ++e) {
    const auto& edge = mesh.edges()[e];
    Vec3 mid = 0.5 * (mesh.position(edge.a) + mesh.position(edge.b));
    if (project_radius > 0.0) mid = project_radius * mid.normalized();
    v.row(n + static_cast<Index>(e)) = mid.transpose();
  }
  TriangleMatrix f(4 * mesh.num_triangles(), 3);
  for (Index t = 0; t < mesh.num_triangles(); ++t) {
    const auto [a, b, c] = mesh.triangle(t);
    const Index ab = n + mesh.find_edge(a, b);
    const Index bc = n + mesh.find_edge(b, c);
    const Index ca = n + mesh.find_edge(c, a);
    f.row(4 * t + 0) << a, ab, ca;
    f.row(4 * t + 1) << ab, b, bc;
    f.row(4 * t + 2) << ca, bc, c;
    f.row(4 * t + 3) << ab, bc, ca;
  }
  return {std::move(v), std::move(f)};
}

/// Icosphere: icosahedron refined `level` times (10*4^level + 2 vertices).
inline TriangleMesh icosphere(int level, double radius = 1.0) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  VertexMatrix v(12, 3);
  v << -1, p, 0, 1, p, 0, -1, -p, 0, 1, -p, 0, 0, -1, p, 0, 1, p, 0, -1, -p, 0, 1, -p, p, 0, -1, p, 0, 1, -p, 0, -1,
      -p, 0, 1;
  for (Index i = 0; i < 12; ++i) v.row(i) = radius * v.row(i).normalized();
  TriangleMatrix f(20, 3);
  f << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11, 1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7, 1, 8, 3, 9, 4, 3, 4,
      2, 3, 2, 6, 3, 6, 8, 3, 8, 9, 4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9, 8, 1;
  TriangleMesh mesh(std::move(v), std::move(f));
  for (int l = 0; l < level; ++l) mesh = subdivide(mesh, radius);
  return mesh;
}

/// A radial bump on the unit sphere: height * exp(-angle^2 / (2 width^2)).
struct Bump {
  Vec3 direction;
  double height;
  double width;
};

/// Fixed asymmetric bump set used by the synthetic benchmarks.
inline std::vector<Bump> default_bumps() {
  return {
      {Vec3(0.0, 0.0, 1.0), 0.45, 0.30},    {Vec3(1.0, 0.2, 0.1), 0.30, 0.25},
      {Vec3(-0.6, 0.8, -0.2), 0.25, 0.35},  {Vec3(0.1, -0.9, 0.4), 0.35, 0.20},
      {Vec3(-0.5, -0.4, -0.8), 0.40, 0.28}, {Vec3(0.7, 0.6, -0.5), 0.20, 0.22},
      {Vec3(-0.9, -0.1, 0.5), -0.15, 0.30}, {Vec3(0.3, -0.3, -0.9), 0.22, 0.18},
  };
}

/// Unit icosphere displaced radially by a sum of bumps.
inline TriangleMesh bumpy_sphere(int level, const std::vector<Bump>& bumps = default_bumps()) {
  const TriangleMesh base = icosphere(level, 1.0);
  VertexMatrix v = base.vertices();
  for (Index i = 0; i < v.rows(); ++i) {
    const Vec3 x = v.row(i).transpose().normalized();
    double r = 1.0;
    for (const Bump& b : bumps) {
      const double angle = std::acos(std::clamp(x.dot(b.direction.normalized()), -1.0, 1.0));
      r += b.height * std::exp(-angle * angle / (2.0 * b.width * b.width));
    }
    v.row(i) = r * x.transpose();
  }
  return {std::move(v), base.triangles()};
}

/// Bends the mesh around an axis parallel to y: the plane z = 0 is wrapped
/// onto a cylinder of radius `bend_radius` (length-preserving along x on z = 0;
/// the relative strain at height z is z / bend_radius).
inline TriangleMesh bend(const TriangleMesh& mesh, double bend_radius) {
  VertexMatrix v = mesh.vertices();
  for (Index i = 0; i < v.rows(); ++i) {
    const double x = v(i, 0);
    const double z = v(i, 2);
    const double angle = x / bend_radius;
    v(i, 0) = (bend_radius + z) * std::sin(angle);
    v(i, 2) = (bend_radius + z) * std::cos(angle) - bend_radius;
  }
  return {std::move(v), mesh.triangles()};
}

/// Applies x -> R x + t to every vertex.
inline TriangleMesh rigid_transform(const TriangleMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation) {
  VertexMatrix v = (mesh.vertices() * rotation.transpose()).rowwise() + translation.transpose();
  return {std::move(v), mesh.triangles()};
}

inline TriangleMesh scaled(const TriangleMesh& mesh, double factor) {
  VertexMatrix v = mesh.vertices() * factor;
  return {std::move(v), mesh.triangles()};
}

/// Two disjoint copies of meshes laid side by side (vertex indices of `b` follow `a`).
inline TriangleMesh disjoint_union(const TriangleMesh& a, const TriangleMesh& b, const Vec3& offset) {
  VertexMatrix v(a.num_vertices() + b.num_vertices(), 3);
  v.topRows(a.num_vertices()) = a.vertices();
  v.bottomRows(b.num_vertices()) = b.vertices().rowwise() + offset.transpose();
  TriangleMatrix f(a.num_triangles() + b.num_triangles(), 3);
  f.topRows(a.num_triangles()) = a.triangles();
  f.bottomRows(b.num_triangles()) = b.triangles().array() + a.num_vertices();
  return {std::move(v), std::move(f)};
}

} // namespace pfm::shapes
