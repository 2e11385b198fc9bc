#include "test_util.hpp"

#include <numbers>

using namespace pfm;
using namespace pfm::test;

TEST(PlaneCut, PlaneBelowKeepsEverything) {
  const TriangleMesh m = shapes::icosphere(2);
  const PartialShape p = plane_cut(m, {Vec3(0, 0, -2), Vec3::UnitZ()});
  EXPECT_EQ(p.mesh.num_triangles(), m.num_triangles());
  EXPECT_EQ(p.truth.correspondence, identity_truth(m.num_vertices()));
  EXPECT_EQ(p.mesh.vertices(), m.vertices());
  EXPECT_THROW(plane_cut(m, {Vec3(0, 0, 2), Vec3::UnitZ()}), InputError);
  EXPECT_THROW(plane_cut(m, {Vec3::Zero(), Vec3::Zero()}), InputError);
}

TEST(PlaneCut, HemisphereArea) {
  const TriangleMesh m = shapes::icosphere(4);
  const PartialShape p = plane_cut(m, {Vec3::Zero(), Vec3::UnitZ()});
  EXPECT_NEAR(p.mesh.total_area(), 2.0 * std::numbers::pi, 0.05 * 2.0 * std::numbers::pi);
  EXPECT_LE(p.mesh.total_area(), 0.5 * m.total_area());
  p.truth.validate(m.num_vertices());
  for (Index x = 0; x < p.mesh.num_vertices(); ++x)
    EXPECT_EQ(p.mesh.position(x), m.position(p.truth.correspondence[static_cast<std::size_t>(x)]));
}

TEST(PlaneCut, FractionIsBisected) {
  const TriangleMesh m = shapes::bumpy_sphere(3);
  for (double f : {0.3, 0.6, 0.8}) {
    const PartialShape p = plane_cut_fraction(m, Vec3(0.3, 0.2, 1.0), f);
    const double kept = p.mesh.total_area() / m.total_area();
    EXPECT_LE(kept, f + 1e-12);
    EXPECT_GE(kept, f - 0.03);
  }
}

TEST(ErodeHoles, BudgetAndSeeds) {
  const TriangleMesh m = shapes::bumpy_sphere(3);
  for (double budget : {0.5, 0.75}) {
    const PartialShape p = erode_holes(m, 4, budget);
    const double kept = p.mesh.total_area() / m.total_area();
    EXPECT_LE(kept, budget + 1e-12);
    EXPECT_GE(kept, budget - 0.03);
    p.truth.validate(m.num_vertices());
    for (Index s : farthest_point_sample(m, 4, 0))
      EXPECT_EQ(std::count(p.truth.correspondence.begin(), p.truth.correspondence.end(), s), 0);
  }
  EXPECT_THROW(erode_holes(m, 4, 1.0), InputError);
  EXPECT_THROW(erode_holes(m, 0, 0.5), InputError);
}

TEST(SyntheticPair, ShapesAndTruth) {
  SyntheticPairOptions o;
  o.level = 2;
  const SyntheticPair s = synthetic_pair(o);
  EXPECT_EQ(s.full.num_vertices(), 162);
  s.part.truth.validate(s.full.num_vertices());
  EXPECT_NEAR(s.part.mesh.total_area() / s.full.total_area(), 0.6, 0.08);
  // the bend strains by at most |z| / bend radius (the model radius over 15, plus bumps)
  double mean_strain = 0.0;
  for (const Edge& edge : s.part.mesh.edges()) {
    const Index a = s.part.truth.correspondence[static_cast<std::size_t>(edge.a)];
    const Index b = s.part.truth.correspondence[static_cast<std::size_t>(edge.b)];
    const double lp = (s.part.mesh.position(edge.a) - s.part.mesh.position(edge.b)).norm();
    const double lf = (s.full.position(a) - s.full.position(b)).norm();
    EXPECT_NEAR(lp / lf, 1.0, 0.08);
    mean_strain += std::abs(lp / lf - 1.0) / static_cast<double>(s.part.mesh.edges().size());
  }
  EXPECT_LT(mean_strain, 0.03);
}

TEST(PrincetonError, Examples) {
  const TriangleMesh m = shapes::grid(10, 10);
  const GroundTruth truth{identity_truth(m.num_vertices())};
  const PrincetonErrors perfect = princeton_error(truth.correspondence, truth, m);
  EXPECT_EQ(perfect.mean(), 0.0);
  EXPECT_EQ(perfect.fraction_below(0.0), 1.0);

  std::vector<Index> off = truth.correspondence;
  off[0] = 1; // edge neighbour, length 0.1 on a unit square
  off[5] = unassigned;
  const PrincetonErrors one = princeton_error(off, truth, m);
  EXPECT_EQ(one.unassigned, 1);
  EXPECT_EQ(one.errors.size(), m.num_vertices() - 1);
  EXPECT_NEAR(one.errors[0], 0.1, 1e-12);
  EXPECT_NEAR(one.errors.sum(), 0.1, 1e-12);

  const PrincetonErrors scaled = princeton_error(off, truth, shapes::scaled(m, 7.0));
  EXPECT_NEAR(scaled.errors[0], one.errors[0], 1e-12);
  EXPECT_THROW(princeton_error({0}, truth, m), InputError);
}

TEST(CumulativeCurve, Examples) {
  Vector e(4), t(4);
  e << 0.3, 0.1, 0.4, 0.2;
  t << 0.0, 0.2, 0.35, 0.5;
  const Vector c = cumulative_curve(e, t);
  EXPECT_EQ(c, (Vector(4) << 0.0, 0.5, 0.75, 1.0).finished());
  EXPECT_EQ(cumulative_curve(Vector(), t), Vector::Zero(4));
}
