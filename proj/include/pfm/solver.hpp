#pragma once

// Alternating minimization of the partial matching energy: C-step, spectral
// refinement, V-step, repeated until the total energy settles.

#include "pfm/cg.hpp"
#include "pfm/energy.hpp"
#include "pfm/spectral.hpp"

namespace pfm {

struct SolverOptions {
  int max_outer = 5;
  int cg_max_iter = 300;
  double cg_grad_tol = 1e-6;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 50;
  int refine_max = 20;
  double refine_tol = 1e-5;
  double outer_tol = 1e-4;
  bool refine = true;
  /// keep the refined C for the next V-step only if it does not raise the total energy
  bool refine_energy_guard = true;

  void validate() const {
    if (max_outer < 1 || cg_max_iter < 1 || max_backtracks < 1 || refine_max < 1)
      throw InputError("solver iteration limits must be positive");
    if (!(cg_grad_tol > 0 && armijo > 0 && armijo < 1 && backtrack > 0 && backtrack < 1 && refine_tol > 0 && outer_tol > 0))
      throw InputError("solver tolerances out of range");
  }

  [[nodiscard]] CGOptions cg() const {
    CGOptions o;
    o.max_iter = cg_max_iter;
    o.grad_tol = cg_grad_tol;
    o.armijo = armijo;
    o.backtrack = backtrack;
    o.max_line_evals = max_backtracks;
    return o;
  }
};

constexpr Index unassigned = -1;

struct RefineResult {
  Matrix C;
  std::vector<Index> part_to_full; ///< nearest full-shape embedding of each partial point
  std::vector<double> residuals;   ///< objective after every half-step, non-increasing
  int alternations = 0;
};

struct MatchResult {
  FunctionalMap C;                   ///< map on the energy path
  Matrix C_refined;                  ///< output of the last refinement
  Vector v;                          ///< part indicator on the full shape
  std::vector<Index> pi;             ///< full vertex -> partial vertex, unassigned where eta(v) <= 1/2
  std::vector<Index> part_to_full;   ///< partial vertex -> full vertex (from the refinement)
  std::vector<EnergyBreakdown> energy_trace; ///< entry 0: initial state, then one per outer iteration
  std::vector<double> step_totals;   ///< total energy after every block update
  std::vector<std::vector<double>> refine_residuals;
  int outer_iterations = 0;
  bool converged = false;
  std::vector<std::string> flags;
};

/// For each row of `queries`, index of the nearest row of `data` (Euclidean;
/// ties to the smallest index). Exact brute force in blocks.
inline std::vector<Index> nearest_rows(const Matrix& queries, const Matrix& data) {
  if (queries.cols() != data.cols()) throw InputError("nearest_rows: dimension mismatch");
  if (data.rows() == 0) throw InputError("nearest_rows: empty data set");
  const Index nq = queries.rows();
  std::vector<Index> out(static_cast<std::size_t>(nq));
  const Vector data_sq = data.rowwise().squaredNorm();
  constexpr Index block = 256;
  const Index blocks = (nq + block - 1) / block;
  parallel_for(blocks, [&](Index b) {
    const Index r0 = b * block;
    const Index rows = std::min(block, nq - r0);
    // |q - x|^2 - |q|^2 = |x|^2 - 2 q.x
    const Matrix D = (-2.0 * queries.middleRows(r0, rows) * data.transpose()).rowwise() + data_sq.transpose();
    for (Index i = 0; i < rows; ++i) {
      const auto row = D.row(i);
      double lo = row.minCoeff();
      // resolve near-ties with exact distances
      const double slack = 1e-9 * (std::abs(lo) + queries.row(r0 + i).squaredNorm() + 1e-300);
      Index best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < row.size(); ++j) {
        if (row[j] > lo + slack) continue;
        const double dj = (queries.row(r0 + i) - data.row(j)).squaredNorm();
        if (dj < best_d) {
          best_d = dj;
          best = j;
        }
      }
      out[static_cast<std::size_t>(r0 + i)] = best;
    }
  });
  return out;
}

/// ICP-like refinement: alternate the assignment of every partial point to its
/// nearest full-shape spectral embedding and the re-fit
///   min_C |(C Phi^T - Psi^T Pi) S_N^{1/2}|_F^2 + mu45 |C^T C - diag(d)|_F^2.
inline RefineResult refine(const Matrix& C0, const Matrix& Phi, const Vector& mass_part, const Matrix& Psi,
                           const Vector& d, double mu45, const SolverOptions& opts) {
  const Index k = C0.rows();
  if (Phi.cols() != k || Psi.cols() != k || C0.cols() != k || d.size() != k)
    throw InputError("refine: basis and map sizes differ");
  if (mass_part.size() != Phi.rows()) throw InputError("refine: partial mass size mismatch");
  const Matrix SPhi = mass_part.asDiagonal() * Phi;
  const Matrix Mphi = Phi.transpose() * SPhi; // Phi^T S Phi

  RefineResult res;
  res.C = C0;
  Matrix N;
  double constant = 0.0;
  auto objective = [&](const Matrix& C, Matrix* grad) {
    const Matrix CM = C * Mphi;
    double value = (CM.cwiseProduct(C)).sum() - 2.0 * N.cwiseProduct(C).sum() + constant;
    Matrix go;
    value += mu45 * orthogonality_term(C, d, grad ? &go : nullptr);
    if (grad) *grad = 2.0 * (CM - N) + mu45 * go;
    return value;
  };

  std::vector<Index> previous;
  for (res.alternations = 0; res.alternations < opts.refine_max;) {
    // assignment step
    const Matrix embedded = Phi * res.C.transpose(); // rows: C phi_x
    res.part_to_full = nearest_rows(embedded, Psi);
    Matrix Y(Phi.rows(), k);
    for (Index x = 0; x < Phi.rows(); ++x) Y.row(x) = Psi.row(res.part_to_full[static_cast<std::size_t>(x)]);
    N = Y.transpose() * SPhi;
    constant = (Y.rowwise().squaredNorm().transpose() * mass_part)(0);
    const double after_assign = objective(res.C, nullptr);
    const bool same = res.part_to_full == previous;
    if (!res.residuals.empty() && (same || std::abs(res.residuals.back() - after_assign) <=
                                               opts.refine_tol * std::max(std::abs(res.residuals.back()), 1e-300))) {
      res.residuals.push_back(std::min(after_assign, res.residuals.back()));
      break;
    }
    res.residuals.push_back(after_assign);
    previous = res.part_to_full;

    // map step
    const Objective f = [&](const Vector& x, Vector& g) {
      const Eigen::Map<const Matrix> C(x.data(), k, k);
      Matrix grad;
      const double value = objective(C, &grad);
      g = Eigen::Map<const Vector>(grad.data(), grad.size());
      return value;
    };
    const Vector x0 = Eigen::Map<const Vector>(res.C.data(), res.C.size());
    const CGResult cg = nonlinear_cg(f, x0, opts.cg());
    res.C = Eigen::Map<const Matrix>(cg.x.data(), k, k);
    res.residuals.push_back(cg.f);
    ++res.alternations;
  }
  return res;
}

/// Full-shape vertices with eta(v) <= 1/2 become unassigned.
inline std::vector<Index> pointwise_map(const std::vector<Index>& pi, const Vector& v) {
  if (static_cast<Index>(pi.size()) != v.size()) throw InputError("pointwise_map: size mismatch");
  std::vector<Index> out(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) out[i] = eta(v[static_cast<Index>(i)]) > 0.5 ? pi[i] : unassigned;
  return out;
}

/// Minimizes the C-dependent part of the energy with v fixed.
inline CGResult c_step(const MatchEnergy& energy, const Matrix& C0, const Vector& v, const SolverOptions& opts) {
  const Index k = C0.rows();
  const Matrix B = energy.data().B(eta(v));
  const Objective f = [&](const Vector& x, Vector& g) {
    const Eigen::Map<const Matrix> C(x.data(), k, k);
    Matrix grad;
    const double value = energy.c_objective(C, B, &grad);
    g = Eigen::Map<const Vector>(grad.data(), grad.size());
    return value;
  };
  return nonlinear_cg(f, Eigen::Map<const Vector>(C0.data(), C0.size()), opts.cg());
}

/// Minimizes the v-dependent part of the energy with C fixed.
inline CGResult v_step(const MatchEnergy& energy, const Matrix& C, const Vector& v0, const SolverOptions& opts) {
  const Objective f = [&](const Vector& v, Vector& g) { return energy.v_objective(C, v, &g); };
  return nonlinear_cg(f, v0, opts.cg());
}

/// Part-specific data of the alternating scheme beyond the energy itself.
struct RefinementData {
  Matrix Phi;       ///< partial-shape basis, n_N x k
  Vector mass_part; ///< partial-shape lumped mass
  Matrix Psi;       ///< full-shape basis, n_M x k
};

inline MatchResult alternate(const MatchEnergy& energy, const RefinementData& spectral, Index rank,
                             const SolverOptions& opts) {
  opts.validate();
  const Index k = energy.data().k();
  const Index n = energy.data().num_vertices();
  MatchResult res;
  res.C.rank = rank;
  Matrix C = energy.W(); // initialization C = W, v = 1
  Vector v = Vector::Ones(n);
  res.energy_trace.push_back(energy.evaluate(C, v));
  res.step_totals.push_back(res.energy_trace.back().total);
  auto flag = [&](const std::string& what, const CGResult& r) {
    if (r.status == CGStatus::line_search_failed) res.flags.push_back(what + ": line search failed");
  };

  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    const CGResult cr = c_step(energy, C, v, opts);
    flag("c_step " + std::to_string(outer), cr);
    C = Eigen::Map<const Matrix>(cr.x.data(), k, k);
    double current = energy.evaluate(C, v).total;
    res.step_totals.push_back(current);
    log::info("outer " + std::to_string(outer) + ": c-step " + std::to_string(cr.iterations) + " iterations, E=" +
              std::to_string(current));

    if (opts.refine) {
      RefineResult rr = refine(C, spectral.Phi, spectral.mass_part, spectral.Psi, energy.d(),
                               energy.params().mu4_5, opts);
      res.refine_residuals.push_back(rr.residuals);
      res.part_to_full = rr.part_to_full;
      res.C_refined = rr.C;
      const double refined_total = energy.evaluate(rr.C, v).total;
      if (!opts.refine_energy_guard || refined_total <= current) {
        C = rr.C;
        current = refined_total;
      }
      res.step_totals.push_back(current);
      log::info("outer " + std::to_string(outer) + ": refinement " + std::to_string(rr.alternations) +
                " alternations, E(refined)=" + std::to_string(refined_total));
    }

    const CGResult vr = v_step(energy, C, v, opts);
    flag("v_step " + std::to_string(outer), vr);
    v = vr.x;
    res.energy_trace.push_back(energy.evaluate(C, v));
    res.step_totals.push_back(res.energy_trace.back().total);
    res.outer_iterations = outer;
    const double prev = res.energy_trace[res.energy_trace.size() - 2].total;
    const double now = res.energy_trace.back().total;
    log::info("outer " + std::to_string(outer) + ": v-step " + std::to_string(vr.iterations) + " iterations, E=" +
              std::to_string(now));
    if (std::abs(prev - now) <= opts.outer_tol * std::max(std::abs(prev), 1e-300)) {
      res.converged = true;
      break;
    }
  }
  if (!opts.refine) {
    res.C_refined = C;
    res.part_to_full = nearest_rows(spectral.Phi * C.transpose(), spectral.Psi);
  }
  res.C.C = C;
  res.v = v;
  // full -> part: nearest partial embedding of every full-shape point
  const std::vector<Index> full_to_part = nearest_rows(spectral.Psi, spectral.Phi * res.C_refined.transpose());
  res.pi = pointwise_map(full_to_part, v);
  return res;
}

} // namespace pfm
