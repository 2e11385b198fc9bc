#pragma once

// Nonlinear conjugate gradients (Polak-Ribiere+, restart on loss of descent)
// with a strong-Wolfe line search. Every accepted step satisfies the Armijo
// condition, so the objective decreases monotonically.

#include "pfm/common.hpp"

#include <functional>

namespace pfm {

/// f(x), writing the gradient into g.
using Objective = std::function<double(const Vector& x, Vector& g)>;

struct CGOptions {
  int max_iter = 300;
  double grad_tol = 1e-6;      ///< stop when |g| <= grad_tol * max(1, |f|)
  double armijo = 1e-4;        ///< sufficient-decrease constant c1
  double curvature = 0.1;      ///< strong-Wolfe constant c2
  double backtrack = 0.5;      ///< contraction when interpolation is unusable
  int max_line_evals = 50;
};

enum class CGStatus { converged, max_iterations, line_search_failed };

inline const char* to_string(CGStatus s) {
  switch (s) {
  case CGStatus::converged: return "converged";
  case CGStatus::max_iterations: return "max_iterations";
  case CGStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

struct CGResult {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  CGStatus status = CGStatus::converged;
};

namespace detail {

struct LinePoint {
  double a, f, df;
};

/// Minimizer of the cubic interpolating (lo, hi); nan if degenerate.
inline double cubic_step(const LinePoint& lo, const LinePoint& hi) {
  const double d1 = lo.df + hi.df - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
  const double disc = d1 * d1 - lo.df * hi.df;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), hi.a - lo.a);
  return hi.a - (hi.a - lo.a) * (hi.df + d2 - d1) / (hi.df - lo.df + 2.0 * d2);
}

} // namespace detail

inline CGResult nonlinear_cg(const Objective& objective, Vector x0, const CGOptions& opts = {}) {
  CGResult res;
  res.x = std::move(x0);
  Vector g(res.x.size());
  res.f = objective(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(res.f)) throw NumericalError("nonlinear_cg: objective is not finite at the starting point");
  res.grad_norm = g.norm();
  auto small_gradient = [&] { return res.grad_norm <= opts.grad_tol * std::max(1.0, std::abs(res.f)); };
  if (res.grad_norm == 0.0) return res;

  Vector d = -g;
  double prev_slope = 0.0;
  double prev_step = 0.0;
  Vector x_trial(res.x.size()), g_trial(res.x.size());

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    if (small_gradient()) {
      res.status = CGStatus::converged;
      return res;
    }
    const double slope0 = g.dot(d);
    const double first = 1.0 / std::max(1.0, d.norm());
    double a = res.iterations == 0 || prev_step <= 0.0 ? first : std::min(1e10, prev_step * prev_slope / slope0);
    if (!(a > 0.0) || !std::isfinite(a)) a = first;

    auto eval = [&](double step) -> detail::LinePoint {
      x_trial = res.x + step * d;
      double f = objective(x_trial, g_trial);
      ++res.evaluations;
      if (!std::isfinite(f)) return {step, std::numeric_limits<double>::infinity(), 0.0};
      return {step, f, g_trial.dot(d)};
    };
    const detail::LinePoint origin{0.0, res.f, slope0};
    auto armijo_ok = [&](const detail::LinePoint& p) {
      return p.f <= res.f + opts.armijo * p.a * slope0 && p.f < res.f;
    };
    auto wolfe_ok = [&](const detail::LinePoint& p) { return std::abs(p.df) <= -opts.curvature * slope0; };

    // best Armijo point seen, with its gradient, as a fallback
    bool have_best = false;
    detail::LinePoint best{0.0, res.f, slope0};
    Vector best_x, best_g;
    auto remember = [&](const detail::LinePoint& p) {
      if (armijo_ok(p) && (!have_best || p.f < best.f)) {
        have_best = true;
        best = p;
        best_x = x_trial;
        best_g = g_trial;
      }
    };

    auto take = [&](const detail::LinePoint& p) {
      have_best = true;
      best = p;
      best_x = x_trial;
      best_g = g_trial;
    };
    bool accepted = false;
    int evals = 0;
    detail::LinePoint prev = origin;
    detail::LinePoint lo{}, hi{};
    bool zoom = false;
    // bracketing phase
    while (evals < opts.max_line_evals) {
      const detail::LinePoint p = eval(a);
      ++evals;
      remember(p);
      if (!armijo_ok(p) || (evals > 1 && p.f >= prev.f)) {
        lo = prev;
        hi = p;
        zoom = true;
        break;
      }
      if (wolfe_ok(p)) {
        accepted = true;
        take(p);
        break;
      }
      if (p.df >= 0.0) {
        lo = p;
        hi = prev;
        zoom = true;
        break;
      }
      prev = p;
      a *= 2.0;
    }
    // zoom phase
    while (zoom && !accepted && evals < opts.max_line_evals) {
      double trial = std::isfinite(hi.f) ? detail::cubic_step(lo, hi) : std::numeric_limits<double>::quiet_NaN();
      const double left = std::min(lo.a, hi.a), right = std::max(lo.a, hi.a);
      const double margin = 0.1 * (right - left);
      if (!std::isfinite(trial) || trial < left + margin || trial > right - margin)
        trial = lo.a + opts.backtrack * (hi.a - lo.a);
      const detail::LinePoint p = eval(trial);
      ++evals;
      remember(p);
      if (!armijo_ok(p) || p.f >= lo.f) {
        hi = p;
      } else {
        if (wolfe_ok(p)) {
          accepted = true;
          take(p);
          break;
        }
        if (p.df * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = p;
      }
      if (std::abs(hi.a - lo.a) <= 1e-16 * std::max(1.0, std::abs(lo.a))) break;
    }

    if (!have_best) {
      res.status = CGStatus::line_search_failed;
      return res;
    }
    const Vector g_old = g;
    res.x = std::move(best_x);
    res.f = best.f;
    g = std::move(best_g);
    res.grad_norm = g.norm();
    prev_step = best.a;
    prev_slope = slope0;

    // Polak-Ribiere+ update
    const double beta = std::max(0.0, g.dot(g - g_old) / g_old.squaredNorm());
    d = -g + beta * d;
    if (g.dot(d) >= 0.0) d = -g;
  }
  res.status = small_gradient() ? CGStatus::converged : CGStatus::max_iterations;
  return res;
}

} // namespace pfm
