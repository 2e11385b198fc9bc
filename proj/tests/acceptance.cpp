// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include "pfm/pfm.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <random>

using namespace pfm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <class F>
Vector fd_gradient(F&& f, const Vector& x) {
  Vector g(x.size());
  Vector y = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    y[i] = x[i] + h;
    const double fp = f(y);
    y[i] = x[i] - h;
    const double fm = f(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-300}); }
Vector flat(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }
Matrix unflat(const Vector& v, Index k) { return Eigen::Map<const Matrix>(v.data(), k, k); }

Matrix gaussian(Index r, Index c, std::mt19937& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

void criterion_gradients() {
  const auto start = Clock::now();
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  double worst = 0.0;
  std::string worst_term;
  const int instances = 24;
  for (int inst = 0; inst < instances; ++inst) {
    VertexMatrix P = shapes::icosphere(1).vertices(); // 42 vertices
    for (Index i = 0; i < P.rows(); ++i) P.row(i) *= 1.0 + 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);
    const TriangleMesh mesh(P, shapes::icosphere(1).triangles());
    const Index k = std::uniform_int_distribution<Index>(3, 15)(rng);
    const Index q = std::uniform_int_distribution<Index>(2, 8)(rng);
    const Index r = std::uniform_int_distribution<Index>(1, k)(rng);
    const SpectralBasis psi = eigensolve(laplacian(mesh), k);
    EnergyParams params;
    params.k = k;
    params.mu1 = 1.0 + inst % 3;
    params.mu2 = 0.5 * (1 + inst % 4);
    params.mu3 = 1.0;
    params.mu4_5 = 2.0;
    const double smoothing = inst % 2 ? 1e-2 : 0.0;
    params.ms_smoothing = smoothing;
    const Matrix W = build_weight_matrix(k, r, 0.03);
    const Vector d = build_d_vector(k, r);
    const DataTerm data(gaussian(k, q, rng), psi.eigenvectors, psi.mass, gaussian(mesh.num_vertices(), q, rng));
    const TriangleMetric metric(mesh, smoothing);
    const double area_part = 0.6 * mesh.total_area();
    const MatchEnergy energy(data, metric, psi.mass, area_part, W, d, params);
    const Matrix C = gaussian(k, k, rng, 0.5);
    Vector v(mesh.num_vertices());
    for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);

    auto check = [&](const std::string& term, const Vector& analytic, const Vector& numeric) {
      const double e = rel(analytic, numeric);
      if (e > worst) {
        worst = e;
        worst_term = term;
      }
    };
    Matrix gC;
    Vector gv;
    data(C, v, &gC, &gv);
    check("data/C", flat(gC), fd_gradient([&](const Vector& x) { return data(unflat(x, k), v, nullptr, nullptr); }, flat(C)));
    check("data/v", gv, fd_gradient([&](const Vector& x) { return data(C, x, nullptr, nullptr); }, v));
    area_term(v, area_part, psi.mass, &gv);
    check("area", gv, fd_gradient([&](const Vector& x) { return area_term(x, area_part, psi.mass, nullptr); }, v));
    mumford_shah(v, metric, params.sigma_xi, &gv);
    check("mumford_shah", gv, fd_gradient([&](const Vector& x) { return mumford_shah(x, metric, params.sigma_xi, nullptr); }, v));
    slant_term(C, W, &gC);
    check("slant", flat(gC), fd_gradient([&](const Vector& x) { return slant_term(unflat(x, k), W, nullptr); }, flat(C)));
    orthogonality_term(C, d, &gC);
    check("orthogonality", flat(gC), fd_gradient([&](const Vector& x) { return orthogonality_term(unflat(x, k), d, nullptr); }, flat(C)));
    energy.evaluate(C, v, &gC, &gv);
    check("total/C", flat(gC), fd_gradient([&](const Vector& x) { return energy.evaluate(unflat(x, k), v).total; }, flat(C)));
    check("total/v", gv, fd_gradient([&](const Vector& x) { return energy.evaluate(C, x).total; }, v));
  }
  const double t = seconds_since(start);
  report(1, worst < 1e-4 && t < 30.0,
         fmt("%d instances, worst relative gradient error %.2e (%s), %.1f s", instances, worst, worst_term.c_str(), t));
}

PartialShape cut_icosphere() {
  return plane_cut(shapes::icosphere(3), {Vec3(0, 0, 0.1), Vec3(0.2, 0.1, 1.0)});
}

void criteria_perturbation() {
  const auto start = Clock::now();
  const TriangleMesh full = shapes::icosphere(3); // 642 vertices
  const PartialShape cut = cut_icosphere();
  const PerturbationReport r = perturbation_check(full, cut.truth.correspondence, 10, 5);
  const double t = seconds_since(start);
  double worst_value = 0.0, worst_vector = 0.0;
  for (const auto& c : r.eigenvalues) worst_value = std::max(worst_value, c.relative_error);
  for (const auto& c : r.eigenvectors) worst_vector = std::max(worst_vector, c.relative_error);
  report(2, r.eigenvalues.size() == 10 && worst_value < 1e-2 && t < 60.0,
         fmt("%zu simple eigenvalues, worst relative error %.2e, %zu degenerate skipped, %.1f s", r.eigenvalues.size(),
             worst_value, static_cast<std::size_t>(r.skipped_multiple), t));
  report(3, r.eigenvectors.size() == 5 && worst_vector < 5e-2,
         fmt("%zu simple eigenvectors, worst relative S-norm error %.2e", r.eigenvectors.size(), worst_vector));
}

void criterion_interleaving() {
  const PartialShape cut = cut_icosphere();
  // the two sides of the cut as disjoint submeshes of one block-diagonal operator
  const TriangleMesh a = cut.mesh;
  const TriangleMesh b = shapes::bumpy_sphere(2);
  const TriangleMesh u = shapes::disjoint_union(a, b, Vec3(10, 0, 0));
  auto all_values = [](const TriangleMesh& m) {
    const LaplacianPair L = laplacian(m);
    return dense_generalized_eigen(Matrix(-L.stiffness), L.mass).first;
  };
  const Vector va = all_values(a), vb = all_values(b), vu = all_values(u);
  std::vector<double> merged(va.data(), va.data() + va.size());
  merged.insert(merged.end(), vb.data(), vb.data() + vb.size());
  std::sort(merged.begin(), merged.end());
  const double scale = vu.cwiseAbs().maxCoeff();
  double worst = 0.0;
  for (Index i = 0; i < vu.size(); ++i)
    worst = std::max(worst, std::abs(vu[i] - merged[static_cast<std::size_t>(i)]) / scale);
  report(4, static_cast<Index>(merged.size()) == vu.size() && worst < 1e-8,
         fmt("%lld eigenvalues, worst deviation from merged sub-spectra %.2e (relative to the largest)",
             static_cast<long long>(vu.size()), worst));
}

void criterion_slope() {
  const TriangleMesh sphere = shapes::icosphere(4);
  const Index k = 50;
  const SpectralBasis full = eigensolve(laplacian(sphere), k);
  std::string detail, corrected;
  bool pass = true;
  for (double alpha : {0.3, 0.5, 0.7}) {
    const PartialShape part = plane_cut_fraction(sphere, Vec3(0.2, 0.1, 1.0), alpha);
    const double kept = part.mesh.total_area() / sphere.total_area();
    const SpectralBasis pb = eigensolve(laplacian(part.mesh), k);
    const Index r = estimate_rank(pb.eigenvalues, full.eigenvalues, k);
    const double slope = static_cast<double>(r) / static_cast<double>(k);
    pass = pass && std::abs(slope - kept) <= 0.12;
    detail += fmt("alpha=%.3f r/k=%lld/50 (%.2f); ", kept, static_cast<long long>(r), slope);
    // Weyl count with the Neumann boundary correction at the threshold eigenvalue
    double boundary = 0.0;
    for (const Edge& e : part.mesh.edges())
      if (e.is_boundary()) boundary += (part.mesh.position(e.a) - part.mesh.position(e.b)).norm();
    const double top = full.eigenvalues.maxCoeff();
    const double weyl = (part.mesh.total_area() * top + boundary * std::sqrt(top)) / (4.0 * std::numbers::pi);
    corrected += fmt(" %.2f", std::min(weyl, static_cast<double>(k)) / static_cast<double>(k));
  }
  std::printf("  info: max lambda_full=%.2f; boundary-corrected Weyl slopes%s\n", full.eigenvalues.maxCoeff(), corrected.c_str());
  report(5, pass, detail + "tolerance 0.12");
}

SyntheticPair acceptance_pair() { return synthetic_pair(); }

void criterion_ground_truth(const SyntheticPair& pair) {
  const Index k = 100;
  const SpectralBasis phi = eigensolve(laplacian(pair.part.mesh), k);
  const SpectralBasis psi = eigensolve(laplacian(pair.full), k);
  const Index r = estimate_rank(phi.eigenvalues, psi.eigenvalues, k);
  const Matrix C = ground_truth_map(phi, psi, pair.part.truth.correspondence);
  const Matrix W = build_weight_matrix(k, r, 0.03);
  std::vector<double> w(W.data(), W.data() + W.size());
  std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(w.size() / 2), w.end());
  const double median = w[w.size() / 2];
  const double total = C.squaredNorm();
  const double band = (W.array() < median).select(C.array().square(), 0.0).sum() / total;
  const double tail = C.rightCols(k - r).squaredNorm() / total;
  report(6, band >= 0.7 && tail < 0.1,
         fmt("r=%lld, band share %.3f (>= 0.70), last k-r columns %.3f (< 0.10)", static_cast<long long>(r), band, tail));
}

struct EndToEnd {
  MatchOutput out;
  PrincetonErrors errors;
  double seconds = 0.0;
};

EndToEnd run_match(const SyntheticPair& pair, const fs::path& dir) {
  const auto start = Clock::now();
  MatchSettings s;
  s.energy.k = 100;
  s.solver.cg_max_iter = 3000;
  EndToEnd e;
  e.out = match_shapes(pair.part.mesh, pair.full, s);
  e.seconds = seconds_since(start);
  std::vector<Index> part_ids(static_cast<std::size_t>(pair.part.mesh.num_vertices()));
  std::vector<Index> full_ids(static_cast<std::size_t>(pair.full.num_vertices()));
  std::iota(part_ids.begin(), part_ids.end(), 0);
  std::iota(full_ids.begin(), full_ids.end(), 0);
  write_match_outputs(dir, pair.part.mesh, pair.full, e.out, part_ids, full_ids);
  e.errors = princeton_error(e.out.match.part_to_full, pair.part.truth, pair.full);
  return e;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool monotone(const MatchResult& m, std::string& why) {
  for (std::size_t i = 1; i < m.energy_trace.size(); ++i) {
    const double prev = m.energy_trace[i - 1].total, now = m.energy_trace[i].total;
    if (now > prev + 1e-6 * std::abs(prev)) {
      why = fmt("energy rose at outer iteration %zu (%.9g -> %.9g)", i, prev, now);
      return false;
    }
  }
  for (std::size_t o = 0; o < m.refine_residuals.size(); ++o) {
    const auto& res = m.refine_residuals[o];
    for (std::size_t j = 1; j < res.size(); ++j)
      if (res[j] > res[j - 1] * (1 + 1e-12)) {
        why = fmt("refinement residual rose in outer %zu, half-step %zu", o + 1, j);
        return false;
      }
  }
  return true;
}

void criteria_end_to_end(const SyntheticPair& pair) {
  const fs::path root = fs::temp_directory_path() / "pfm_acceptance";
  fs::remove_all(root);
  const EndToEnd a = run_match(pair, root / "run1");
  const MatchResult& m = a.out.match;
  const double mean = a.errors.mean();
  const double below = a.errors.fraction_below(0.05);
  const double area = (a.out.pair.psi.mass.array() * eta(m.v).array()).sum();
  std::printf("  info: n_M=%lld n_N=%lld r=%lld, outer=%d converged=%d, area(eta)/area(N)=%.3f, flags=%zu\n",
              static_cast<long long>(pair.full.num_vertices()), static_cast<long long>(pair.part.mesh.num_vertices()),
              static_cast<long long>(a.out.pair.rank), m.outer_iterations, m.converged ? 1 : 0,
              area / a.out.pair.area_part, m.flags.size());
  report(7, mean < 0.08 && below >= 0.6 && m.converged && m.outer_iterations <= 5 && a.seconds < 600.0,
         fmt("mean error %.4f (< 0.08), %.1f%% below 0.05 (>= 60%%), %d outer iterations, %.0f s", mean, 100.0 * below,
             m.outer_iterations, a.seconds));

  const EndToEnd b = run_match(pair, root / "run2");
  std::string why1, why2;
  const bool mono = monotone(m, why1) && monotone(b.out.match, why2);
  report(8, mono, mono ? fmt("%zu + %zu outer energies and all refinement residuals non-increasing",
                             m.energy_trace.size(), b.out.match.energy_trace.size())
                       : why1 + why2);

  const bool same_c = file_bytes(root / "run1" / "C.bin") == file_bytes(root / "run2" / "C.bin");
  const bool same_pi = file_bytes(root / "run1" / "pi.csv") == file_bytes(root / "run2" / "pi.csv");
  report(10, same_c && same_pi, fmt("C.bin %s, pi.csv %s", same_c ? "identical" : "differs", same_pi ? "identical" : "differs"));
}

void criterion_spectra() {
  const SpectralBasis square = eigensolve(laplacian(shapes::grid(40, 40)), 11);
  std::vector<double> exact;
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q)
      if (p + q > 0) exact.push_back(std::numbers::pi * std::numbers::pi * (p * p + q * q));
  std::sort(exact.begin(), exact.end());
  double worst_square = 0.0;
  for (Index i = 1; i <= 10; ++i)
    worst_square = std::max(worst_square, std::abs(square.eigenvalues[i] - exact[static_cast<std::size_t>(i - 1)]) /
                                              exact[static_cast<std::size_t>(i - 1)]);
  const SpectralBasis sphere = eigensolve(laplacian(shapes::icosphere(4)), 25);
  double worst_sphere = 0.0;
  Index i = 1;
  for (int l = 1; l <= 4; ++l)
    for (int m = 0; m < 2 * l + 1; ++m, ++i)
      worst_sphere = std::max(worst_sphere, std::abs(sphere.eigenvalues[i] - l * (l + 1)) / (l * (l + 1)));
  report(9, worst_square < 0.03 && worst_sphere < 0.03,
         fmt("unit square worst %.2f%%, unit sphere worst %.2f%% (< 3%%)", 100 * worst_square, 100 * worst_sphere));
}

} // namespace

int main() {
  auto guarded = [](int id, auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      report(id, false, std::string("exception: ") + e.what());
    }
  };
  guarded(1, criterion_gradients);
  guarded(2, criteria_perturbation);
  guarded(4, criterion_interleaving);
  guarded(5, criterion_slope);
  guarded(9, criterion_spectra);
  const SyntheticPair pair = acceptance_pair();
  guarded(6, [&] { criterion_ground_truth(pair); });
  try {
    criteria_end_to_end(pair);
  } catch (const std::exception& e) {
    for (int id : {7, 8, 10}) report(id, false, std::string("exception: ") + e.what());
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
