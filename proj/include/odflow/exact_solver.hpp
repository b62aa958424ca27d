#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "odflow/geo.hpp"
#include "odflow/likelihood.hpp"
#include "odflow/numeric.hpp"
#include "odflow/optim.hpp"
#include "odflow/types.hpp"

namespace odflow {

/// Flat slot layout of the active (structurally nonzero) flow entries of one
/// time step, origin-major in neighbor order. Slot k of step t lives at
/// t * nnz + k in a packed variable vector.
struct ActiveLayout {
  std::vector<Index> origin;
  std::vector<Index> dest;
  std::vector<std::size_t> row_offset;  // n + 1 prefix offsets into the slot arrays
  Index n = 0;
  Index nnz = 0;

  static ActiveLayout build(const NeighborSets& gamma) {
    ActiveLayout layout;
    layout.n = gamma.size();
    layout.row_offset.resize(static_cast<std::size_t>(layout.n) + 1, 0);
    for (Index i = 0; i < layout.n; ++i) {
      const auto& row = gamma.members[static_cast<std::size_t>(i)];
      layout.row_offset[static_cast<std::size_t>(i) + 1] =
          layout.row_offset[static_cast<std::size_t>(i)] + row.size();
      for (Index j : row) {
        layout.origin.push_back(i);
        layout.dest.push_back(j);
      }
    }
    layout.nnz = static_cast<Index>(layout.origin.size());
    return layout;
  }
};

namespace detail {

template <class Scalar>
Vec<Scalar> pack_flows(const FlowTensor<Scalar>& M, const ActiveLayout& layout, Scalar floor) {
  const Index steps = static_cast<Index>(M.size());
  Vec<Scalar> x(steps * layout.nnz);
  for (Index t = 0; t < steps; ++t) {
    const Mat<Scalar>& Mt = M[static_cast<std::size_t>(t)];
    const Index base = t * layout.nnz;
    for (Index k = 0; k < layout.nnz; ++k) {
      x[base + k] = std::max(Mt(layout.origin[static_cast<std::size_t>(k)],
                                layout.dest[static_cast<std::size_t>(k)]),
                             floor);
    }
  }
  return x;
}

template <class Scalar>
void unpack_flows(const Vec<Scalar>& x, const ActiveLayout& layout, FlowTensor<Scalar>& M) {
  const Index steps = static_cast<Index>(M.size());
  for (Index t = 0; t < steps; ++t) {
    Mat<Scalar>& Mt = M[static_cast<std::size_t>(t)];
    Mt.setZero();
    const Index base = t * layout.nnz;
    for (Index k = 0; k < layout.nnz; ++k) {
      Mt(layout.origin[static_cast<std::size_t>(k)], layout.dest[static_cast<std::size_t>(k)]) =
          x[base + k];
    }
  }
}

template <class Scalar>
std::uint64_t state_hash(const Vec<Scalar>& s, Scalar beta) {
  auto grid = [](double v, double g) { return std::nearbyint(v / g) * g; };
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Index i = 0; i < s.size(); ++i) {
    h = mix64(h ^ std::bit_cast<std::uint64_t>(grid(static_cast<double>(s[i]), 1e-10)));
  }
  return mix64(h ^ std::bit_cast<std::uint64_t>(grid(static_cast<double>(beta), 1e-12)));
}

}  // namespace detail

/// Diagonal start: all mass stays put, departure probabilities and gathering
/// scores flat at 0.02, decay at 50 / max distance.
template <class Scalar = double>
std::pair<FlowTensor<Scalar>, ModelParams<Scalar>> init_static(const CountPanel<Scalar>& N,
                                                               const Mat<Scalar>& d) {
  detail::validate_panel(N);
  const Index n = N.cols();
  const Index steps = N.rows() - 1;
  FlowTensor<Scalar> M(static_cast<std::size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    M[static_cast<std::size_t>(t)] = Mat<Scalar>::Zero(n, n);
    M[static_cast<std::size_t>(t)].diagonal() = N.row(t).transpose();
  }
  ModelParams<Scalar> params;
  params.pi = Vec<Scalar>::Constant(n, Scalar(0.02));
  params.s = Vec<Scalar>::Constant(n, Scalar(0.02));
  const Scalar dmax = max_distance(d);
  params.beta = dmax > Scalar(0) ? Scalar(50) / dmax : Scalar(0);
  return {std::move(M), std::move(params)};
}

/// Count-difference start: the absolute change of each region's count is
/// spread evenly over its outgoing neighbors; diagonal carries the count.
/// A region whose count changes but has nowhere to send flow is reported.
template <class Scalar = double>
FlowTensor<Scalar> init_moving(const CountPanel<Scalar>& N, const NeighborSets& gamma,
                               std::vector<std::string>* warnings = nullptr) {
  detail::validate_panel(N);
  const Index n = N.cols();
  const Index steps = N.rows() - 1;
  if (gamma.size() != n) throw InputError("init_moving: neighbor sets must match the panel");
  FlowTensor<Scalar> M(static_cast<std::size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    Mat<Scalar>& Mt = M[static_cast<std::size_t>(t)];
    Mt = Mat<Scalar>::Zero(n, n);
    Mt.diagonal() = N.row(t).transpose();
    for (Index i = 0; i < n; ++i) {
      const Scalar change = std::abs(N(t, i) - N(t + 1, i));
      const Index k = gamma.degree(i) - 1;
      if (k == 0) {
        if (change != Scalar(0) && warnings != nullptr)
          warnings->push_back("init_moving: region " + std::to_string(i) +
                              " changes count but has no neighbors; left diagonal");
        continue;
      }
      const Scalar share = change / Scalar(k);
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        if (j != i) Mt(i, j) = share;
      }
    }
  }
  return M;
}

/// Apply an initialization strategy; jitter adds per-entry noise drawn from
/// [0, N_ti) with the strategy's seed.
template <class Scalar = double>
std::pair<FlowTensor<Scalar>, ModelParams<Scalar>> initialize(const CountPanel<Scalar>& N,
                                                              const Mat<Scalar>& d,
                                                              const NeighborSets& gamma,
                                                              const InitStrategy& strategy,
                                                              std::vector<std::string>* warnings =
                                                                  nullptr) {
  auto [M, params] = init_static(N, d);
  if (strategy.kind == InitKind::Moving) {
    M = init_moving(N, gamma, warnings);
  } else if (strategy.kind == InitKind::StaticJittered) {
    if (!strategy.seed.has_value())
      throw InputError("initialize: jittered strategy requires a seed");
    std::mt19937_64 rng(*strategy.seed);
    const Index steps = N.rows() - 1;
    for (Index t = 0; t < steps; ++t) {
      Mat<Scalar>& Mt = M[static_cast<std::size_t>(t)];
      for (Index i = 0; i < N.cols(); ++i) {
        const double hi = static_cast<double>(N(t, i));
        for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
          double delta = 0.0;
          if (hi > 0.0) {
            std::uniform_real_distribution<double> u(0.0, hi);
            delta = u(rng);
          }
          Mt(i, j) += Scalar(delta);
        }
      }
    }
  }
  // A region with no reachable neighbor cannot depart; a positive start
  // probability there would make the transition kernel undefined.
  for (Index i = 0; i < gamma.size(); ++i) {
    if (gamma.degree(i) <= 1) params.pi[i] = Scalar(0);
  }
  return {std::move(M), std::move(params)};
}

/// Closed-form departure probabilities: the off-diagonal share of each
/// region's outgoing flow, clamped to [0, 1 - 1e-9].
template <class Scalar = double>
Vec<Scalar> update_pi(const FlowTensor<Scalar>& M, const NeighborSets& gamma,
                      std::vector<std::string>* warnings = nullptr) {
  const Index n = gamma.size();
  Vec<Scalar> pi = Vec<Scalar>::Zero(n);
  for (Index i = 0; i < n; ++i) {
    KahanSum<Scalar> moved, all;
    for (const auto& Mt : M) {
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        all.add(Mt(i, j));
        if (j != i) moved.add(Mt(i, j));
      }
    }
    if (all.value() <= Scalar(0)) {
      if (warnings != nullptr)
        warnings->push_back("update_pi: region " + std::to_string(i) +
                            " has no outgoing mass; probability set to 0");
      pi[i] = Scalar(0);
    } else {
      pi[i] = std::clamp(moved.value() / all.value(), Scalar(0), Scalar(1) - Scalar(1e-9));
    }
  }
  return pi;
}

template <class Scalar = double>
struct SBetaResult {
  Vec<Scalar> s;
  Scalar beta{};
  bool cycle_detected = false;
  int iterations = 0;
  Scalar f_value{};
};

struct SBetaOptions {
  BetaBounds bounds;
  double tol = 1e-6;
  int max_iter = 500;
  int cycle_window = 50;
  double brent_rel_tol = 1e-6;
};

/// Profile objective for (s, beta) given inbound totals A, outbound totals B
/// and the distance-weighted outbound mass D. Alternates the stationarity
/// fixed point for s (then max-normalizes) with a bounded line search for
/// beta, until the objective's relative change falls below tol, a state
/// repeats within the sliding window (cycle), or the iteration cap is hit.
/// The result never scores below the entry state.
template <class Scalar = double>
SBetaResult<Scalar> update_s_beta_core(const Vec<Scalar>& A, const Vec<Scalar>& B, Scalar D,
                                       const Mat<Scalar>& d, const NeighborSets& gamma,
                                       const Vec<Scalar>& s0, Scalar beta0,
                                       const SBetaOptions& opts) {
  const Index n = d.rows();
  if (A.size() != n || B.size() != n || s0.size() != n)
    throw InputError("update_s_beta: vector sizes must match the distance matrix");
  if (!(opts.bounds.lo < opts.bounds.hi))
    throw InputError("update_s_beta: beta bounds must satisfy lo < hi");

  const Scalar floor = Scalar(1e-12);
  // Flatten the off-diagonal neighbor structure once; these loops dominate.
  std::vector<std::size_t> offset(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> nbr;
  std::vector<Scalar> dist;
  for (Index i = 0; i < n; ++i) {
    for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
      if (j != i) {
        nbr.push_back(j);
        dist.push_back(d(i, j));
      }
    }
    offset[static_cast<std::size_t>(i) + 1] = nbr.size();
  }

  auto normalize = [&](Vec<Scalar>& s) {
    const Scalar top = s.maxCoeff();
    if (top > Scalar(0)) s /= top;
    s = s.cwiseMax(floor);
  };

  auto log_denoms = [&](const Vec<Scalar>& s, Scalar beta, Vec<Scalar>& out) {
    for (Index i = 0; i < n; ++i) {
      if (offset[static_cast<std::size_t>(i) + 1] == offset[static_cast<std::size_t>(i)]) {
        out[i] = Scalar(0);
        continue;
      }
      KahanSum<Scalar> acc;
      for (std::size_t k = offset[static_cast<std::size_t>(i)];
           k < offset[static_cast<std::size_t>(i) + 1]; ++k) {
        acc.add(s[nbr[k]] * std::exp(-beta * dist[k]));
      }
      out[i] = std::log(acc.value());
    }
  };

  Vec<Scalar> scratch(n);
  auto objective = [&](const Vec<Scalar>& s, Scalar beta) {
    log_denoms(s, beta, scratch);
    KahanSum<Scalar> f;
    for (Index i = 0; i < n; ++i) {
      if (offset[static_cast<std::size_t>(i) + 1] == offset[static_cast<std::size_t>(i)]) continue;
      f.add(A[i] * std::log(s[i]));
      f.add(-B[i] * scratch[i]);
    }
    f.add(-beta * D);
    return f.value();
  };

  SBetaResult<Scalar> out;
  out.s = s0;
  normalize(out.s);
  out.beta = beta0;
  out.f_value = objective(out.s, out.beta);
  const Vec<Scalar> entry_s = out.s;
  const Scalar entry_beta = out.beta;
  const Scalar entry_f = out.f_value;

  std::deque<std::uint64_t> window;
  window.push_back(detail::state_hash(out.s, out.beta));

  const Scalar xtol = std::max(
      Scalar(opts.brent_rel_tol) * Scalar(opts.bounds.hi - opts.bounds.lo), Scalar(1e-14));
  Vec<Scalar> exps(static_cast<Index>(dist.size()));
  Vec<Scalar> denom(n), gather(n), s_next(n);
  Scalar f_prev = out.f_value;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Stationarity fixed point for s at the current beta.
    for (std::size_t k = 0; k < dist.size(); ++k)
      exps[static_cast<Index>(k)] = std::exp(-out.beta * dist[k]);
    for (Index i = 0; i < n; ++i) {
      KahanSum<Scalar> acc;
      for (std::size_t k = offset[static_cast<std::size_t>(i)];
           k < offset[static_cast<std::size_t>(i) + 1]; ++k) {
        acc.add(out.s[nbr[k]] * exps[static_cast<Index>(k)]);
      }
      denom[i] = acc.value();
    }
    gather.setZero();
    for (Index k2 = 0; k2 < n; ++k2) {
      if (denom[k2] <= Scalar(0)) continue;
      const Scalar share = B[k2] / denom[k2];
      if (share == Scalar(0)) continue;
      for (std::size_t k = offset[static_cast<std::size_t>(k2)];
           k < offset[static_cast<std::size_t>(k2) + 1]; ++k) {
        gather[nbr[k]] += share * exps[static_cast<Index>(k)];
      }
    }
    for (Index i = 0; i < n; ++i) {
      const bool connected =
          offset[static_cast<std::size_t>(i) + 1] > offset[static_cast<std::size_t>(i)];
      if (!connected) {
        s_next[i] = out.s[i];
      } else if (A[i] > Scalar(0) && gather[i] > Scalar(0)) {
        s_next[i] = A[i] / gather[i];
      } else {
        s_next[i] = floor;
      }
    }
    normalize(s_next);
    out.s = s_next;

    // Bounded line search for beta at the new s.
    KahanSum<Scalar> fixed;
    for (Index i = 0; i < n; ++i) {
      if (offset[static_cast<std::size_t>(i) + 1] > offset[static_cast<std::size_t>(i)])
        fixed.add(A[i] * std::log(out.s[i]));
    }
    const Scalar fixed_part = fixed.value();
    auto neg_profile = [&](Scalar beta) {
      log_denoms(out.s, beta, scratch);
      KahanSum<Scalar> f;
      for (Index i = 0; i < n; ++i) {
        if (offset[static_cast<std::size_t>(i) + 1] > offset[static_cast<std::size_t>(i)])
          f.add(-B[i] * scratch[i]);
      }
      f.add(-beta * D);
      return -(fixed_part + f.value());
    };
    out.beta = minimize_scalar_bounded<Scalar>(neg_profile, Scalar(opts.bounds.lo),
                                               Scalar(opts.bounds.hi), xtol);
    out.f_value = objective(out.s, out.beta);
    out.iterations = iter + 1;

    const std::uint64_t h = detail::state_hash(out.s, out.beta);
    if (std::find(window.begin(), window.end(), h) != window.end()) {
      out.cycle_detected = true;
      break;
    }
    window.push_back(h);
    while (static_cast<int>(window.size()) > opts.cycle_window) window.pop_front();

    if (std::abs(out.f_value - f_prev) <= Scalar(opts.tol) * std::max(Scalar(1), std::abs(f_prev)))
      break;
    f_prev = out.f_value;
  }

  if (out.f_value < entry_f) {
    // Never hand back a state the objective ranks below the entry point.
    out.s = entry_s;
    out.beta = entry_beta;
    out.f_value = entry_f;
  }
  return out;
}

/// Inbound totals A, outbound totals B, and distance-weighted outbound mass D
/// of the off-diagonal active flows.
template <class Scalar = double>
void flow_margins(const FlowTensor<Scalar>& M, const Mat<Scalar>& d, const NeighborSets& gamma,
                  Vec<Scalar>& A, Vec<Scalar>& B, Scalar& D) {
  const Index n = gamma.size();
  A = Vec<Scalar>::Zero(n);
  B = Vec<Scalar>::Zero(n);
  KahanSum<Scalar> weighted;
  for (const auto& Mt : M) {
    for (Index i = 0; i < n; ++i) {
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        if (j == i) continue;
        B[i] += Mt(i, j);
        A[i] += Mt(j, i);
        weighted.add(d(i, j) * Mt(i, j));
      }
    }
  }
  D = weighted.value();
}

/// (s, beta) update from a flow tensor; leaves both untouched (with a warning)
/// when there is no off-diagonal mass to learn from.
template <class Scalar = double>
SBetaResult<Scalar> update_s_beta(const FlowTensor<Scalar>& M, const Mat<Scalar>& d,
                                  const NeighborSets& gamma, const Vec<Scalar>& s0, Scalar beta0,
                                  const SBetaOptions& opts,
                                  std::vector<std::string>* warnings = nullptr) {
  Vec<Scalar> A, B;
  Scalar D{};
  flow_margins(M, d, gamma, A, B, D);
  if (B.sum() <= Scalar(0)) {
    if (warnings != nullptr)
      warnings->push_back("update_s_beta: no off-diagonal flow; s and beta left unchanged");
    SBetaResult<Scalar> out;
    out.s = s0;
    out.beta = beta0;
    return out;
  }
  return update_s_beta_core(A, B, D, d, gamma, s0, beta0, opts);
}

namespace detail {

/// Negated penalized likelihood over packed active flows, with analytic
/// gradient; the only mutable state is scratch space.
template <class Scalar>
class FlowObjective {
 public:
  FlowObjective(const ActiveLayout& layout, const TransitionCoeffs<Scalar>& coeffs,
                const CountPanel<Scalar>& N, Scalar lambda)
      : layout_(layout), N_(N), lambda_(lambda) {
    coeff_.resize(layout.nnz);
    for (Index k = 0; k < layout.nnz; ++k) {
      const Index i = layout.origin[static_cast<std::size_t>(k)];
      const Index j = layout.dest[static_cast<std::size_t>(k)];
      coeff_[k] = (i == j) ? coeffs.log_stay[i] : coeffs.weight(i, j);
    }
    row_gap_.resize(layout.n);
    col_gap_.resize(layout.n);
    logm_.resize(layout.nnz);
  }

  Scalar operator()(const Vec<Scalar>& x, Vec<Scalar>& grad) {
    const Index steps = N_.rows() - 1;
    grad.resize(x.size());
    KahanSum<Scalar> value, cons;
    for (Index t = 0; t < steps; ++t) {
      const Index base = t * layout_.nnz;
      row_gap_ = N_.row(t).transpose();
      col_gap_ = N_.row(t + 1).transpose();
      for (Index k = 0; k < layout_.nnz; ++k) {
        const Scalar m = x[base + k];
        row_gap_[layout_.origin[static_cast<std::size_t>(k)]] -= m;
        col_gap_[layout_.dest[static_cast<std::size_t>(k)]] -= m;
        logm_[k] = std::log(m);
        value.add(coeff_[k] * m + m * (Scalar(1) - logm_[k]));
      }
      for (Index i = 0; i < layout_.n; ++i) {
        cons.add(row_gap_[i] * row_gap_[i]);
        cons.add(col_gap_[i] * col_gap_[i]);
      }
      for (Index k = 0; k < layout_.nnz; ++k) {
        grad[base + k] = logm_[k] - coeff_[k] -
                         lambda_ * (row_gap_[layout_.origin[static_cast<std::size_t>(k)]] +
                                    col_gap_[layout_.dest[static_cast<std::size_t>(k)]]);
      }
    }
    return -value.value() + lambda_ / Scalar(2) * cons.value();
  }

 private:
  const ActiveLayout& layout_;
  const CountPanel<Scalar>& N_;
  Scalar lambda_;
  Vec<Scalar> coeff_, row_gap_, col_gap_, logm_;
};

}  // namespace detail

/// In-place maximization of the penalized likelihood over the active flow
/// entries with the model parameters held fixed.
template <class Scalar = double>
OptimReport maximize_flows(FlowTensor<Scalar>& M, const TransitionCoeffs<Scalar>& coeffs,
                           const CountPanel<Scalar>& N, Scalar lambda, const ActiveLayout& layout,
                           const SolverConfig& cfg) {
  detail::FlowObjective<Scalar> objective(layout, coeffs, N, lambda);
  Vec<Scalar> x = detail::pack_flows(M, layout, Scalar(cfg.flow_floor));
  BoxSpec<Scalar> box;
  box.lower = Vec<Scalar>::Constant(x.size(), Scalar(cfg.flow_floor));
  MinimizeOptions opt;
  opt.history = cfg.lbfgs_history;
  opt.rel_f_tol = cfg.lbfgs_rel_f_tol;
  auto [x_best, report] = minimize_box<Scalar>(objective, std::move(x), box,
                                               Scalar(cfg.lbfgs_pg_tol), cfg.lbfgs_max_iter, opt);
  detail::unpack_flows(x_best, layout, M);
  return report;
}

template <class Scalar = double>
BetaBounds default_beta_bounds(const Mat<Scalar>& d) {
  const Scalar dbar = mean_positive_distance(d);
  if (dbar <= Scalar(0)) return {-10.0, 50.0};
  return {static_cast<double>(Scalar(-10) / dbar), static_cast<double>(Scalar(50) / dbar)};
}

namespace detail {

template <class Scalar>
void require_finite(const LikelihoodBreakdown<Scalar>& b) {
  const char* name = nullptr;
  if (!std::isfinite(static_cast<double>(b.L0))) name = "stay term";
  else if (!std::isfinite(static_cast<double>(b.L1))) name = "move term";
  else if (!std::isfinite(static_cast<double>(b.L2))) name = "entropy term";
  else if (!std::isfinite(static_cast<double>(b.C))) name = "conservation penalty";
  if (name != nullptr)
    throw ModelError(std::string("likelihood became non-finite in the ") + name);
}

}  // namespace detail

/// Alternating maximization: flows by box-constrained quasi-Newton ascent,
/// then the closed-form departure probabilities, then the (s, beta) profile
/// loop, until the penalized likelihood's relative change drops below epsilon.
/// A detected (s, beta) cycle sends control back to the flow step.
template <class Scalar = double>
FitResult<Scalar> fit_exact(const CountPanel<Scalar>& N, const Mat<Scalar>& d,
                            const NeighborSets& gamma, const SolverConfig& cfg,
                            const InitStrategy& init = {}) {
  detail::validate_panel(N);
  const Index n = N.cols();
  if (d.rows() != n || d.cols() != n) throw InputError("fit_exact: distance matrix must be n x n");
  if (gamma.size() != n) throw InputError("fit_exact: neighbor sets must match the panel");
  if (!is_symmetric(d)) throw InputError("fit_exact: distance matrix must be symmetric");

  FitResult<Scalar> result;
  auto [M, params] = initialize(N, d, gamma, init, &result.warnings);
  const ActiveLayout layout = ActiveLayout::build(gamma);
  // Work on floored flows throughout, matching the optimizer's box.
  {
    Vec<Scalar> x = detail::pack_flows(M, layout, Scalar(cfg.flow_floor));
    detail::unpack_flows(x, layout, M);
  }

  SBetaOptions sbeta;
  sbeta.bounds = cfg.beta_bounds.value_or(default_beta_bounds(d));
  sbeta.tol = cfg.sbeta_tol;
  sbeta.max_iter = cfg.sbeta_max_iter;
  sbeta.cycle_window = cfg.cycle_window;
  sbeta.brent_rel_tol = cfg.brent_rel_tol;

  LikelihoodBreakdown<Scalar> current =
      exact_loglik(M, params, N, Scalar(cfg.lambda), d, gamma);
  detail::require_finite(current);
  result.trace.push_back(current);

  TransitionCoeffs<Scalar> coeffs = precompute_coeffs(params, d, gamma);
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    maximize_flows(M, coeffs, N, Scalar(cfg.lambda), layout, cfg);
    params.pi = update_pi(M, gamma, &result.warnings);
    SBetaResult<Scalar> sb =
        update_s_beta(M, d, gamma, params.s, params.beta, sbeta, &result.warnings);
    params.s = sb.s;
    params.beta = sb.beta;
    if (sb.cycle_detected) ++result.cycle_retries;
    coeffs = precompute_coeffs(params, d, gamma);

    const Scalar prev_total = current.total;
    current = exact_loglik(M, params, N, Scalar(cfg.lambda), d, gamma);
    detail::require_finite(current);
    result.trace.push_back(current);
    result.outer_iterations = outer + 1;

    if (std::abs(current.total - prev_total) <=
        Scalar(cfg.epsilon) * std::max(Scalar(1), std::abs(prev_total))) {
      result.termination = FitTermination::Converged;
      break;
    }
  }

  result.M = std::move(M);
  result.params = std::move(params);
  return result;
}

/// Convenience entry point that derives the geometry from region centroids and
/// the configured travel cutoff.
inline FitResult<double> fit_exact(const CountPanel<double>& N, const RegionSet& regions,
                                   const SolverConfig& cfg, const InitStrategy& init = {}) {
  if (!(cfg.cutoff > 0)) throw InputError("fit_exact: travel cutoff must be positive");
  if (regions.size() != N.cols())
    throw InputError("fit_exact: region set must match the panel columns");
  const Mat<double> d = build_distance_matrix(regions);
  const NeighborSets gamma = neighbor_sets(d, cfg.cutoff);
  return fit_exact<double>(N, d, gamma, cfg, init);
}

}  // namespace odflow
