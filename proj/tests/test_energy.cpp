#include "test_util.hpp"

using namespace pfm;
using namespace pfm::test;

namespace {

/// Small random matching instance: full shape M, its basis, descriptors and W, d.
struct Instance {
  TriangleMesh full;
  SpectralBasis psi;
  Matrix A, G, W;
  Vector d;
  double area_part = 0.0;
  EnergyParams params;

  [[nodiscard]] DataTerm data() const { return {A, psi.eigenvectors, psi.mass, G}; }
  [[nodiscard]] MatchEnergy energy() const {
    return {data(), TriangleMetric(full, params.ms_smoothing), psi.mass, area_part, W, d, params};
  }
};

Instance make_instance(std::mt19937& rng, Index k, Index q) {
  Instance in;
  in.full = shapes::bumpy_sphere(1); // 42 vertices
  in.psi = eigensolve(laplacian(in.full), k);
  in.G = random_matrix(in.full.num_vertices(), q, rng);
  in.A = random_matrix(k, q, rng);
  const Index r = std::max<Index>(1, k / 2);
  in.W = build_weight_matrix(k, r, 0.03);
  in.d = build_d_vector(k, r);
  in.area_part = 0.6 * in.full.total_area();
  in.params.k = k;
  return in;
}

} // namespace

TEST(Saturation, Examples) {
  EXPECT_DOUBLE_EQ(eta(0.5), 0.5);
  EXPECT_NEAR(eta(0.0), 0.11920292202211755, 1e-15);
  EXPECT_NEAR(eta(40.0), 1.0, 1e-15);
  EXPECT_NEAR(eta(-40.0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(xi(0.5, 0.5), 1.0);
  EXPECT_NEAR(xi(1.0, 0.5), 0.5599, 1e-4);
  for (double a : {0.1, 0.7, 2.0}) EXPECT_NEAR(xi(0.5 + a, 0.5), xi(0.5 - a, 0.5), 1e-15);
  for (double t : {-1.0, 0.2, 0.5, 0.9, 1.7}) {
    EXPECT_NEAR(eta_prime(t), (eta(t + 1e-6) - eta(t - 1e-6)) / 2e-6, 1e-8);
    EXPECT_NEAR(xi_prime(t, 0.5), (xi(t + 1e-6, 0.5) - xi(t - 1e-6, 0.5)) / 2e-6, 1e-8);
  }
}

TEST(DataTerm, ZeroResidual) {
  std::mt19937 rng(1);
  const Instance in = make_instance(rng, 8, 8);
  // choose C with C A = B exactly (A square and invertible)
  const Vector v = Vector::Constant(in.full.num_vertices(), 0.9);
  const DataTerm data = in.data();
  const Matrix C = data.B(eta(v)) * in.A.inverse();
  EXPECT_NEAR(data(C, v, nullptr, nullptr), 0.0, 1e-8);
  EXPECT_GT(data(C + 1e-3 * Matrix::Identity(8, 8), v, nullptr, nullptr), 1e-4);
}

TEST(DataTerm, ColumnNorm) {
  // q = 1, residual (3, 4)
  Matrix A(2, 1);
  A << 3, 4;
  const Matrix Psi = Matrix::Zero(3, 2);
  const DataTerm data(A, Psi, Vector::Ones(3), Matrix::Zero(3, 1));
  EXPECT_NEAR(data.value_fixed_B(Matrix::Identity(2, 2), Matrix::Zero(2, 1), nullptr), 5.0, 1e-9);
}

TEST(DataTerm, ColumnPermutationInvariance) {
  std::mt19937 rng(2);
  const Instance in = make_instance(rng, 10, 6);
  const Matrix C = random_matrix(10, 10, rng);
  const Vector v = random_vector(in.full.num_vertices(), rng, -1, 2);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(6);
  p.indices() << 3, 0, 5, 1, 4, 2;
  const DataTerm permuted(in.A * p, in.psi.eigenvectors, in.psi.mass, in.G * p);
  EXPECT_NEAR(in.data()(C, v, nullptr, nullptr), permuted(C, v, nullptr, nullptr), 1e-10);
}

TEST(DataTerm, Gradients) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Instance in = make_instance(rng, 12, 7);
    const DataTerm data = in.data();
    const Matrix C = random_matrix(12, 12, rng);
    const Vector v = random_vector(in.full.num_vertices(), rng, -1, 2);
    Matrix gC;
    Vector gv;
    data(C, v, &gC, &gv);
    const Vector fdC = fd_gradient([&](const Vector& x) { return data(unflat(x, 12, 12), v, nullptr, nullptr); }, flat(C));
    const Vector fdv = fd_gradient([&](const Vector& x) { return data(C, x, nullptr, nullptr); }, v);
    EXPECT_LT(relative_difference(flat(gC), fdC), 1e-5);
    EXPECT_LT(relative_difference(gv, fdv), 1e-5);
  }
}

TEST(AreaTerm, ExamplesAndGradient) {
  const Vector mass = Vector::Constant(5, 0.2);
  EXPECT_NEAR(area_term(Vector::Constant(5, 60.0), 1.0, mass, nullptr), 0.0, 1e-20);
  EXPECT_NEAR(area_term(Vector::Constant(5, -60.0), 0.7, mass, nullptr), 0.49, 1e-15);
  EXPECT_THROW(area_term(Vector::Zero(5), 0.0, mass, nullptr), InputError);
  std::mt19937 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector v = random_vector(30, rng, -1, 2);
    const Vector m = random_vector(30, rng, 0.1, 1.0);
    Vector g;
    area_term(v, 4.0, m, &g);
    const Vector fd = fd_gradient([&](const Vector& x) { return area_term(x, 4.0, m, nullptr); }, v);
    EXPECT_LT(relative_difference(g, fd), 1e-6);
  }
}

TEST(MumfordShah, ConstantFieldIsZero) {
  const TriangleMetric metric(shapes::bumpy_sphere(1), 1e-2);
  Vector g;
  EXPECT_EQ(mumford_shah(Vector::Constant(42, 0.3), metric, 0.5, &g), 0.0);
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(MumfordShah, ApproximatesCutLength) {
  // v steps from 0 to 1 across one cell at x = 1/2; a wide xi makes xi ~ 1
  for (Index n : {20, 40, 80}) {
    const TriangleMesh g = shapes::grid(n, n);
    Vector v(g.num_vertices());
    const double h = 1.0 / static_cast<double>(n);
    for (Index i = 0; i < v.size(); ++i) v[i] = std::clamp((g.position(i).x() - 0.5) / h + 0.5, 0.0, 1.0);
    const double value = mumford_shah(v, TriangleMetric(g), 10.0, nullptr);
    EXPECT_NEAR(value, 1.0, 0.25) << n;
  }
}

TEST(MumfordShah, Gradient) {
  std::mt19937 rng(5);
  const TriangleMesh m = shapes::bumpy_sphere(1);
  for (double smoothing : {0.0, 1e-2}) {
    const TriangleMetric metric(m, smoothing);
    for (int trial = 0; trial < 5; ++trial) {
      const Vector v = random_vector(m.num_vertices(), rng, -1, 2);
      Vector g;
      mumford_shah(v, metric, 0.5, &g);
      const Vector fd = fd_gradient([&](const Vector& x) { return mumford_shah(x, metric, 0.5, nullptr); }, v);
      EXPECT_LT(relative_difference(g, fd), 1e-5);
    }
  }
}

TEST(SlantTerm, ExamplesAndGradient) {
  const Matrix W = build_weight_matrix(10, 4, 0.03);
  const Matrix supported = (W.array() == 0.0).cast<double>().matrix() * 3.0;
  EXPECT_EQ(slant_term(supported, W, nullptr), 0.0);
  EXPECT_NEAR(slant_term(W, W, nullptr), W.array().pow(4).sum(), 1e-10);
  std::mt19937 rng(6);
  const Matrix C = random_matrix(10, 10, rng);
  Matrix g;
  slant_term(C, W, &g);
  const Vector fd = fd_gradient([&](const Vector& x) { return slant_term(unflat(x, 10, 10), W, nullptr); }, flat(C));
  EXPECT_LT(relative_difference(flat(g), fd), 1e-8);
}

TEST(OrthogonalityTerm, ExamplesAndGradient) {
  const Vector d = build_d_vector(8, 3);
  Matrix block = Matrix::Zero(8, 8);
  block.topLeftCorner(3, 3).setIdentity();
  EXPECT_NEAR(orthogonality_term(block, d, nullptr), 0.0, 1e-15);
  EXPECT_NEAR(orthogonality_term(Matrix::Zero(8, 8), d, nullptr), 3.0, 1e-15);
  std::mt19937 rng(7);
  const Matrix C = random_matrix(8, 8, rng);
  Matrix g;
  orthogonality_term(C, d, &g);
  const Vector fd = fd_gradient([&](const Vector& x) { return orthogonality_term(unflat(x, 8, 8), d, nullptr); }, flat(C), 1e-7);
  EXPECT_LT(relative_difference(flat(g), fd), 1e-7);
  // depends on C only through C^T C
  const Matrix Q = Eigen::HouseholderQR<Matrix>(random_matrix(8, 8, rng)).householderQ();
  EXPECT_NEAR(orthogonality_term(Q * C, d, nullptr), orthogonality_term(C, d, nullptr), 1e-9);
}

TEST(TotalEnergy, WeightsAndCombinedGradient) {
  std::mt19937 rng(8);
  Instance in = make_instance(rng, 10, 6);
  const Matrix C = random_matrix(10, 10, rng, 0.5);
  const Vector v = random_vector(in.full.num_vertices(), rng, -1, 2);

  in.params.mu1 = in.params.mu2 = in.params.mu3 = in.params.mu4_5 = 0.0;
  const EnergyBreakdown only_data = in.energy().evaluate(C, v);
  EXPECT_DOUBLE_EQ(only_data.total, only_data.data);

  in.params = EnergyParams{};
  in.params.k = 10;
  const EnergyBreakdown base = in.energy().evaluate(C, v);
  in.params.mu2 *= 2.0;
  const EnergyBreakdown doubled = in.energy().evaluate(C, v);
  EXPECT_NEAR(doubled.total - base.total, in.params.mu2 / 2.0 * base.mumford_shah, 1e-9 * std::abs(base.total));

  in.params = EnergyParams{};
  in.params.k = 10;
  const MatchEnergy e = in.energy();
  Matrix gC;
  Vector gv;
  e.evaluate(C, v, &gC, &gv);
  const Vector fdC = fd_gradient([&](const Vector& x) { return e.evaluate(unflat(x, 10, 10), v).total; }, flat(C));
  const Vector fdv = fd_gradient([&](const Vector& x) { return e.evaluate(C, x).total; }, v);
  EXPECT_LT(relative_difference(flat(gC), fdC), 1e-4);
  EXPECT_LT(relative_difference(gv, fdv), 1e-4);
  // block objectives agree with the total up to terms constant in the block
  const Matrix B = e.data().B(eta(v));
  Matrix gc2;
  e.c_objective(C, B, &gc2);
  EXPECT_LT(relative_difference(flat(gc2), flat(gC)), 1e-12);
  Vector gv2;
  e.v_objective(C, v, &gv2);
  EXPECT_LT(relative_difference(gv2, gv), 1e-12);
}

TEST(EnergyParams, Validation) {
  EnergyParams p;
  EXPECT_NO_THROW(p.validate());
  p.mu2 = -1;
  EXPECT_THROW(p.validate(), InputError);
  p = {};
  p.k = 1;
  EXPECT_THROW(p.validate(), InputError);
  p = {};
  p.sigma_xi = 0;
  EXPECT_THROW(p.validate(), InputError);
}

TEST(CG, QuadraticConvergesInDimSteps) {
  std::mt19937 rng(9);
  const Index n = 12;
  const Matrix R = random_matrix(n, n, rng);
  const Matrix Q = R * R.transpose() + Matrix::Identity(n, n);
  const Vector b = random_vector(n, rng, -1, 1);
  const Objective f = [&](const Vector& x, Vector& g) {
    g = Q * x - b;
    return 0.5 * x.dot(Q * x) - b.dot(x);
  };
  CGOptions o;
  o.grad_tol = 1e-12;
  o.curvature = 1e-4; // near-exact line search
  o.max_line_evals = 200;
  const CGResult r = nonlinear_cg(f, Vector::Zero(n), o);
  EXPECT_LE(r.iterations, n + 2);
  EXPECT_LT((r.x - Q.ldlt().solve(b)).norm(), 1e-8);
}

TEST(CG, StationaryStartReturnsImmediately) {
  int calls = 0;
  const Objective f = [&](const Vector& x, Vector& g) {
    ++calls;
    g = 2.0 * x;
    return x.squaredNorm();
  };
  const CGResult r = nonlinear_cg(f, Vector::Zero(4));
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.x, Vector::Zero(4));
  EXPECT_EQ(r.status, CGStatus::converged);
}

TEST(CG, Rosenbrock) {
  const Objective f = [](const Vector& x, Vector& g) {
    const double a = 1 - x[0], b = x[1] - x[0] * x[0];
    g.resize(2);
    g << -2 * a - 400 * x[0] * b, 200 * b;
    return a * a + 100 * b * b;
  };
  Vector x0(2);
  x0 << -1.2, 1.0;
  CGOptions o;
  o.max_iter = 500;
  o.grad_tol = 1e-10;
  const CGResult r = nonlinear_cg(f, x0, o);
  EXPECT_LT(r.f, 1e-8);
  EXPECT_LE(r.iterations, 500);
}

TEST(CG, MonotoneAndFlagsLineSearchFailure) {
  // objective with an inconsistent gradient: no step can satisfy Armijo
  const Objective liar = [](const Vector& x, Vector& g) {
    g = -2.0 * x - Vector::Ones(x.size());
    return x.squaredNorm();
  };
  const CGResult r = nonlinear_cg(liar, Vector::Zero(3));
  EXPECT_EQ(r.status, CGStatus::line_search_failed);
  EXPECT_EQ(r.x, Vector::Zero(3));

  std::vector<double> values;
  const Objective tracked = [&](const Vector& x, Vector& g) {
    g = 4.0 * x.array().pow(3).matrix() + x;
    return x.array().pow(4).sum() + 0.5 * x.squaredNorm();
  };
  Vector x = Vector::Constant(5, 2.0);
  for (int i = 0; i < 10; ++i) {
    CGOptions o;
    o.max_iter = 1;
    const CGResult step = nonlinear_cg(tracked, x, o);
    Vector g;
    values.push_back(tracked(step.x, g));
    x = step.x;
  }
  for (std::size_t i = 1; i < values.size(); ++i) EXPECT_LE(values[i], values[i - 1]);
  EXPECT_THROW(nonlinear_cg([](const Vector&, Vector& g) { g.setZero(1); return std::nan(""); }, Vector::Zero(1)),
               NumericalError);
}
