#pragma once

// SHOT (signature of histograms of orientations) point descriptors.
//
// Per vertex: a repeatable local reference frame from the distance-weighted
// covariance of the support, 32 spatial sectors (8 azimuth x 2 elevation x
// 2 radial) and an 11-bin histogram of cos(normal_i, normal_center) in each,
// accumulated with quadrilinear interpolation and normalized to unit length.

#include "pfm/mesh.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <unordered_map>

namespace pfm {

struct DescriptorField {
  Matrix values;              ///< n x q, q = 352
  double radius = 0.0;        ///< support radius in world units
  std::vector<char> flagged;  ///< 1 where the support had too few points (zero row)

  [[nodiscard]] Index num_flagged() const { return std::count(flagged.begin(), flagged.end(), 1); }
};

struct ShotLayout {
  static constexpr int azimuth = 8;
  static constexpr int elevation = 2;
  static constexpr int radial = 2;
  static constexpr int sectors = azimuth * elevation * radial;
  static constexpr int bins = 11;
  static constexpr int size = sectors * bins; // 352
  static constexpr int min_neighbors = 5;
};

/// 7% of sqrt(total area).
inline double default_shot_radius(const TriangleMesh& mesh) { return 0.07 * std::sqrt(mesh.total_area()); }

namespace detail {

/// Uniform hash grid for fixed-radius queries. Results are sorted by index so
/// that downstream sums do not depend on the grid layout.
class RadiusGrid {
public:
  RadiusGrid(const VertexMatrix& points, double cell) : points_(points), cell_(cell) {
    for (Index i = 0; i < points_.rows(); ++i) cells_[key(cell_of(points_.row(i).transpose()))].push_back(i);
  }

  void query(const Vec3& p, double radius, std::vector<Index>& out) const {
    out.clear();
    const auto c = cell_of(p);
    const auto reach = static_cast<std::int64_t>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (std::int64_t dx = -reach; dx <= reach; ++dx)
      for (std::int64_t dy = -reach; dy <= reach; ++dy)
        for (std::int64_t dz = -reach; dz <= reach; ++dz) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (Index i : it->second)
            if ((points_.row(i).transpose() - p).squaredNorm() <= r2) out.push_back(i);
        }
    std::sort(out.begin(), out.end());
  }

private:
  [[nodiscard]] std::array<std::int64_t, 3> cell_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p[0] / cell_)), static_cast<std::int64_t>(std::floor(p[1] / cell_)),
            static_cast<std::int64_t>(std::floor(p[2] / cell_))};
  }
  static std::uint64_t key(const std::array<std::int64_t, 3>& c) {
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & 0x1FFFFFu; };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }

  const VertexMatrix& points_;
  double cell_;
  std::unordered_map<std::uint64_t, std::vector<Index>> cells_;
};

/// Linear split of a continuous bin coordinate u (bin centres at integers)
/// into (bin, weight) pairs, clamped at the ends.
inline std::array<std::pair<int, double>, 2> split_clamped(double u, int count) {
  const double f = std::floor(u);
  const int b0 = static_cast<int>(f);
  const double w1 = u - f;
  if (b0 < 0) return {{{0, 1.0}, {0, 0.0}}};
  if (b0 >= count - 1) return {{{count - 1, 1.0}, {count - 1, 0.0}}};
  return {{{b0, 1.0 - w1}, {b0 + 1, w1}}};
}

inline std::array<std::pair<int, double>, 2> split_circular(double u, int count) {
  const double f = std::floor(u);
  const double w1 = u - f;
  int b0 = static_cast<int>(f) % count;
  if (b0 < 0) b0 += count;
  return {{{b0, 1.0 - w1}, {(b0 + 1) % count, w1}}};
}

} // namespace detail

/// Local reference frame (columns x, y, z) at `center` from its support.
/// Axes are disambiguated so that most support points lie on their positive side.
inline Eigen::Matrix3d shot_reference_frame(const TriangleMesh& mesh, Index center, const std::vector<Index>& support,
                                            double radius) {
  const Vec3 p = mesh.position(center);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  double wsum = 0.0;
  for (Index i : support) {
    const Vec3 d = mesh.position(i) - p;
    const double w = radius - d.norm();
    cov += w * d * d.transpose();
    wsum += w;
  }
  if (wsum > 0.0) cov /= wsum;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Vec3 x = es.eigenvectors().col(2);
  Vec3 z = es.eigenvectors().col(0);
  // small supports often tie on the counts; the weighted projection sum breaks the tie
  auto disambiguate = [&](Vec3& axis) {
    Index pos = 0, neg = 0;
    double sum = 0.0;
    for (Index i : support) {
      const Vec3 d = mesh.position(i) - p;
      const double s = d.dot(axis);
      sum += (radius - d.norm()) * s;
      if (s > 0.0) ++pos;
      else if (s < 0.0) ++neg;
    }
    if (neg > pos || (neg == pos && sum < 0.0)) axis = -axis;
  };
  disambiguate(x);
  disambiguate(z);
  Eigen::Matrix3d frame;
  frame.col(0) = x;
  frame.col(1) = z.cross(x);
  frame.col(2) = z;
  return frame;
}

inline DescriptorField shot_descriptors(const TriangleMesh& mesh, double radius) {
  if (!(radius > 0.0)) throw InputError("shot_descriptors: radius must be positive");
  using L = ShotLayout;
  const Index n = mesh.num_vertices();
  const VertexMatrix normals = vertex_normals(mesh);
  const detail::RadiusGrid grid(mesh.vertices(), radius);

  DescriptorField out;
  out.radius = radius;
  out.values = Matrix::Zero(n, L::size);
  out.flagged.assign(static_cast<std::size_t>(n), 0);
  constexpr double pi = std::numbers::pi;

  parallel_for(n, [&](Index v) {
    std::vector<Index> support;
    grid.query(mesh.position(v), radius, support);
    if (static_cast<int>(support.size()) - 1 < L::min_neighbors) {
      out.flagged[static_cast<std::size_t>(v)] = 1;
      return;
    }
    const Eigen::Matrix3d frame = shot_reference_frame(mesh, v, support, radius);
    const Vec3 p = mesh.position(v);
    const Vec3 nc = normals.row(v).transpose();
    Eigen::Matrix<double, 1, L::size> hist = Eigen::Matrix<double, 1, L::size>::Zero();
    for (Index i : support) {
      if (i == v) continue;
      const Vec3 d = mesh.position(i) - p;
      const double dist = d.norm();
      if (dist <= 0.0) continue;
      const Vec3 local = frame.transpose() * d;
      const double cosine = std::clamp(nc.dot(normals.row(i).transpose()), -1.0, 1.0);
      const double elev = std::asin(std::clamp(local[2] / dist, -1.0, 1.0));
      double azim = std::atan2(local[1], local[0]);
      if (azim < 0.0) azim += 2.0 * pi;

      const auto cb = detail::split_clamped(0.5 * (1.0 + cosine) * L::bins - 0.5, L::bins);
      const auto rb = detail::split_clamped(2.0 * dist / radius - 0.5, L::radial);
      const auto eb = detail::split_clamped((elev + 0.5 * pi) / pi * L::elevation - 0.5, L::elevation);
      const auto ab = detail::split_circular(azim / (2.0 * pi) * L::azimuth - 0.5, L::azimuth);
      for (const auto& [a, wa] : ab)
        for (const auto& [e, we] : eb)
          for (const auto& [r, wr] : rb) {
            const double ws = wa * we * wr;
            if (ws == 0.0) continue;
            const int sector = (a * L::elevation + e) * L::radial + r;
            for (const auto& [c, wc] : cb) hist[sector * L::bins + c] += ws * wc;
          }
    }
    const double norm = hist.norm();
    if (norm > 0.0) out.values.row(v) = hist / norm;
    else out.flagged[static_cast<std::size_t>(v)] = 1;
  });
  return out;
}

} // namespace pfm
