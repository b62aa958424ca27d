#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <utility>

#include "odflow/types.hpp"

namespace odflow {

/// Componentwise bounds; an empty vector means unbounded on that side.
template <class Scalar = double>
struct BoxSpec {
  Vec<Scalar> lower;
  Vec<Scalar> upper;
};

enum class OptimStatus { Converged, MaxIterations, LineSearchFailure };

struct OptimReport {
  double final_value = 0.0;
  int iterations = 0;
  OptimStatus status = OptimStatus::Converged;
};

struct MinimizeOptions {
  int history = 10;        // limited-memory pairs kept
  double rel_f_tol = 0.0;  // also stop when the relative objective decrease falls below this; 0 disables
  double armijo_c1 = 1e-4;
  int max_backtracks = 50;
};

namespace detail {

template <class Scalar>
void clamp_to_box(Vec<Scalar>& x, const BoxSpec<Scalar>& box) {
  if (box.lower.size() > 0) x = x.cwiseMax(box.lower);
  if (box.upper.size() > 0) x = x.cwiseMin(box.upper);
}

}  // namespace detail

/// Projected limited-memory quasi-Newton descent over a box.
///
/// fg(x, grad) must return the objective value and fill grad. Iterates stay
/// feasible, accepted objective values never increase, and the run is
/// deterministic for a fixed objective and start. Convergence is declared when
/// the projected-gradient infinity norm drops to tol scaled by
/// max(1, |objective|), checked after each accepted step.
template <class Scalar, class F>
std::pair<Vec<Scalar>, OptimReport> minimize_box(F&& fg, Vec<Scalar> x0, const BoxSpec<Scalar>& box,
                                                 Scalar tol, int max_iter,
                                                 const MinimizeOptions& opt = {}) {
  const Index n = x0.size();
  if (box.lower.size() > 0 && box.lower.size() != n)
    throw InputError("minimize_box: lower bound size mismatch");
  if (box.upper.size() > 0 && box.upper.size() != n)
    throw InputError("minimize_box: upper bound size mismatch");
  if (box.lower.size() > 0 && box.upper.size() > 0 && (box.lower.array() > box.upper.array()).any())
    throw InputError("minimize_box: empty box");

  Vec<Scalar> x = std::move(x0);
  detail::clamp_to_box(x, box);

  Vec<Scalar> g(n), masked(n), dir(n), x_trial(n), g_trial(n);
  Scalar f = fg(x, g);
  if (!std::isfinite(static_cast<double>(f)))
    throw InputError("minimize_box: objective not finite at the start point");

  std::deque<Vec<Scalar>> s_hist, y_hist;
  std::deque<Scalar> rho_hist;
  Scalar gamma = Scalar(1);

  OptimReport report;
  report.status = OptimStatus::MaxIterations;

  auto projected_gradient_norm = [&]() {
    Vec<Scalar> stepped = x - g;
    detail::clamp_to_box(stepped, box);
    return (x - stepped).template lpNorm<Eigen::Infinity>();
  };

  auto mask_bound_directions = [&]() {
    masked = g;
    const Scalar act = Scalar(1e-10);
    for (Index i = 0; i < n; ++i) {
      const Scalar pad = act * std::max(Scalar(1), std::abs(x[i]));
      if (box.lower.size() > 0 && x[i] <= box.lower[i] + pad && g[i] > Scalar(0)) masked[i] = 0;
      if (box.upper.size() > 0 && x[i] >= box.upper[i] - pad && g[i] < Scalar(0)) masked[i] = 0;
    }
  };

  auto two_loop_direction = [&]() {
    dir = -masked;
    const int m = static_cast<int>(s_hist.size());
    if (m == 0) {
      return;
    }
    std::vector<Scalar> alpha(static_cast<std::size_t>(m));
    for (int k = m - 1; k >= 0; --k) {
      alpha[static_cast<std::size_t>(k)] =
          rho_hist[static_cast<std::size_t>(k)] * s_hist[static_cast<std::size_t>(k)].dot(dir);
      dir -= alpha[static_cast<std::size_t>(k)] * y_hist[static_cast<std::size_t>(k)];
    }
    dir *= gamma;
    for (int k = 0; k < m; ++k) {
      const Scalar beta =
          rho_hist[static_cast<std::size_t>(k)] * y_hist[static_cast<std::size_t>(k)].dot(dir);
      dir += (alpha[static_cast<std::size_t>(k)] - beta) * s_hist[static_cast<std::size_t>(k)];
    }
    for (Index i = 0; i < n; ++i) {
      if (masked[i] == Scalar(0)) dir[i] = 0;
    }
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    report.iterations = iter;
    // The gradient test is scaled by the objective magnitude and is only
    // consulted once at least one step has been taken: a start point buried
    // under a large penalty value must not be declared optimal outright.
    if (iter > 0 && projected_gradient_norm() <= tol * std::max(Scalar(1), std::abs(f))) {
      report.status = OptimStatus::Converged;
      break;
    }

    mask_bound_directions();
    two_loop_direction();
    if (dir.dot(g) >= Scalar(0)) {
      // Not a descent direction; drop curvature history and fall back to steepest descent.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      gamma = Scalar(1);
      dir = -masked;
    }
    if (dir.template lpNorm<Eigen::Infinity>() == Scalar(0)) {
      report.status = OptimStatus::Converged;
      break;
    }

    bool accepted = false;
    bool retried_plain = false;
    Scalar f_trial = f;
    while (true) {
      Scalar alpha = Scalar(1);
      for (int bt = 0; bt < opt.max_backtracks; ++bt) {
        x_trial = x + alpha * dir;
        detail::clamp_to_box(x_trial, box);
        const Vec<Scalar> delta = x_trial - x;
        const Scalar slope = g.dot(delta);
        if (slope >= Scalar(0)) {
          // Projection bent the step uphill; a shorter step moves only the free
          // components and restores descent.
          alpha *= Scalar(0.5);
          continue;
        }
        f_trial = fg(x_trial, g_trial);
        if (std::isfinite(static_cast<double>(f_trial)) &&
            f_trial <= f + Scalar(opt.armijo_c1) * slope) {
          accepted = true;
          break;
        }
        alpha *= Scalar(0.5);
      }
      if (accepted || retried_plain || s_hist.empty()) break;
      // Quasi-Newton step failed; retry once along the plain gradient.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      gamma = Scalar(1);
      dir = -masked;
      retried_plain = true;
    }
    if (!accepted) {
      report.status = OptimStatus::LineSearchFailure;
      break;
    }

    const Vec<Scalar> step = x_trial - x;
    const Vec<Scalar> grad_change = g_trial - g;
    const Scalar f_prev = f;
    x.swap(x_trial);
    g.swap(g_trial);
    f = f_trial;
    report.iterations = iter + 1;

    const Scalar sy = step.dot(grad_change);
    if (sy > Scalar(1e-10) * step.norm() * grad_change.norm()) {
      s_hist.push_back(step);
      y_hist.push_back(grad_change);
      rho_hist.push_back(Scalar(1) / sy);
      gamma = sy / grad_change.squaredNorm();
      while (static_cast<int>(s_hist.size()) > opt.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    if (opt.rel_f_tol > 0.0 &&
        f_prev - f <= Scalar(opt.rel_f_tol) *
                          std::max({std::abs(f_prev), std::abs(f), Scalar(1)})) {
      report.status = OptimStatus::Converged;
      break;
    }
  }

  report.final_value = static_cast<double>(f);
  return {std::move(x), report};
}

/// Bounded scalar minimization: golden-section search with parabolic
/// interpolation steps. xtol is an absolute tolerance on the argument. The
/// endpoints are evaluated explicitly at the end, so boundary minima are
/// returned exactly.
template <class Scalar, class F>
Scalar minimize_scalar_bounded(F&& g, Scalar lo, Scalar hi, Scalar xtol = Scalar(1e-8),
                               int max_iter = 200) {
  if (!(lo < hi)) throw InputError("minimize_scalar_bounded: requires lo < hi");
  if (!(xtol > Scalar(0))) throw InputError("minimize_scalar_bounded: xtol must be positive");

  const Scalar golden = Scalar(0.5) * (Scalar(3) - std::sqrt(Scalar(5)));
  const Scalar sqrt_eps = std::sqrt(std::numeric_limits<Scalar>::epsilon());
  Scalar a = lo, b = hi;
  Scalar x = a + golden * (b - a);
  Scalar w = x, v = x;
  Scalar fx = g(x), fw = fx, fv = fx;
  Scalar delta = 0, delta_prev = 0;

  for (int iter = 0; iter < max_iter; ++iter) {
    const Scalar mid = Scalar(0.5) * (a + b);
    const Scalar tol1 = sqrt_eps * std::abs(x) + xtol / Scalar(3);
    const Scalar tol2 = Scalar(2) * tol1;
    if (std::abs(x - mid) <= tol2 - Scalar(0.5) * (b - a)) break;

    bool parabolic_ok = false;
    if (std::abs(delta_prev) > tol1) {
      // Try a parabola through x, w, v.
      const Scalar r = (x - w) * (fx - fv);
      Scalar q = (x - v) * (fx - fw);
      Scalar p = (x - v) * q - (x - w) * r;
      q = Scalar(2) * (q - r);
      if (q > Scalar(0)) p = -p;
      q = std::abs(q);
      const Scalar delta_older = delta_prev;
      delta_prev = delta;
      if (std::abs(p) < std::abs(Scalar(0.5) * q * delta_older) && p > q * (a - x) &&
          p < q * (b - x)) {
        delta = p / q;
        const Scalar u = x + delta;
        if (u - a < tol2 || b - u < tol2) delta = mid > x ? tol1 : -tol1;
        parabolic_ok = true;
      }
    }
    if (!parabolic_ok) {
      delta_prev = (x >= mid) ? a - x : b - x;
      delta = golden * delta_prev;
    }

    const Scalar u = x + ((std::abs(delta) >= tol1) ? delta : (delta > Scalar(0) ? tol1 : -tol1));
    const Scalar fu = g(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }

  const Scalar f_lo = g(lo);
  const Scalar f_hi = g(hi);
  if (f_lo <= fx && f_lo <= f_hi) return lo;
  if (f_hi <= fx) return hi;
  return x;
}

}  // namespace odflow
