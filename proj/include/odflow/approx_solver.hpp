#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "odflow/exact_solver.hpp"
#include "odflow/geo.hpp"
#include "odflow/likelihood.hpp"
#include "odflow/metrics.hpp"
#include "odflow/numeric.hpp"
#include "odflow/optim.hpp"
#include "odflow/types.hpp"

namespace odflow {

/// Decoupled flow variables: X[t](i, j) is the flow arriving at i from j
/// (the transpose view of the flow tensor, diagonal included), Y(t, i) the
/// total off-diagonal outflow of region i, Z(t, i) its stayers. The three are
/// independent unknowns tied together only by the conservation penalty.
template <class Scalar = double>
struct XYZState {
  FlowTensor<Scalar> X;
  Mat<Scalar> Y;
  Mat<Scalar> Z;
};

struct OuterLoopConfig {
  int max_rounds = 1;
  std::optional<double> rel_change_threshold;  // stop when max |dM| / max(1, M) drops below
  std::optional<double> nae_target;            // with truth: stop at or below this error
};

template <class Scalar = double>
XYZState<Scalar> xyz_from_flows(const FlowTensor<Scalar>& M, const NeighborSets& gamma) {
  const Index steps = static_cast<Index>(M.size());
  if (steps < 1) throw InputError("xyz_from_flows: empty flow tensor");
  const Index n = M[0].rows();
  XYZState<Scalar> state;
  state.X.assign(static_cast<std::size_t>(steps), Mat<Scalar>::Zero(n, n));
  state.Y = Mat<Scalar>::Zero(steps, n);
  state.Z = Mat<Scalar>::Zero(steps, n);
  for (Index t = 0; t < steps; ++t) {
    const Mat<Scalar>& Mt = M[static_cast<std::size_t>(t)];
    Mat<Scalar>& Xt = state.X[static_cast<std::size_t>(t)];
    for (Index i = 0; i < n; ++i) {
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        Xt(j, i) = Mt(i, j);
        if (j != i) state.Y(t, i) += Mt(i, j);
      }
      state.Z(t, i) = Mt(i, i);
    }
  }
  return state;
}

/// Reassemble a flow tensor from the transposed arrival variables.
template <class Scalar = double>
FlowTensor<Scalar> flows_from_xyz(const XYZState<Scalar>& state) {
  FlowTensor<Scalar> M(state.X.size());
  for (std::size_t t = 0; t < state.X.size(); ++t) M[t] = state.X[t].transpose();
  return M;
}

/// Departure probabilities from the decoupled variables: the off-diagonal
/// outflow share of each region's total, clamped like the exact update.
template <class Scalar = double>
Vec<Scalar> update_pi_approx(const XYZState<Scalar>& state,
                             std::vector<std::string>* warnings = nullptr) {
  const Index n = state.Y.cols();
  Vec<Scalar> pi = Vec<Scalar>::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar moved = state.Y.col(i).sum();
    const Scalar total = moved + state.Z.col(i).sum();
    if (total <= Scalar(0)) {
      if (warnings != nullptr)
        warnings->push_back("update_pi_approx: region " + std::to_string(i) +
                            " has no mass; probability set to 0");
      pi[i] = Scalar(0);
    } else {
      pi[i] = std::clamp(moved / total, Scalar(0), Scalar(1) - Scalar(1e-9));
    }
  }
  return pi;
}

template <class Scalar = double>
struct ApproxEval {
  Scalar value{};        // x_term + y_term + z_term - lambda/2 * constraint
  Scalar x_term{};
  Scalar y_term{};
  Scalar z_term{};
  Scalar constraint{};
  FlowTensor<Scalar> grad_X;
  Mat<Scalar> grad_Y;
  Mat<Scalar> grad_Z;
};

/// Penalized decoupled objective and its gradients. Each variable sees only
/// its own Poisson-style term around the parameter-implied mean — expected
/// arrivals for X, expected departures for Y, expected stayers for Z — plus
/// the conservation penalty tying the pieces to the counts.
template <class Scalar = double>
ApproxEval<Scalar> approx_loglik_and_grad(const XYZState<Scalar>& state,
                                          const ModelParams<Scalar>& params,
                                          const CountPanel<Scalar>& N, Scalar lambda,
                                          const Mat<Scalar>& d, const NeighborSets& gamma) {
  detail::validate_panel(N);
  const Index n = N.cols();
  const Index steps = N.rows() - 1;
  if (static_cast<Index>(state.X.size()) != steps || state.Y.rows() != steps ||
      state.Z.rows() != steps || state.Y.cols() != n || state.Z.cols() != n)
    throw InputError("approx_loglik_and_grad: state shape mismatch");

  const Scalar floor = Scalar(kMinFlow);
  const Mat<Scalar> theta = transition_matrix(params, d, gamma);

  // Expected arrivals mu(i, j) = sum_t N_tj theta(j, i) over the departing
  // snapshots, shared by every step.
  Mat<Scalar> log_mu = Mat<Scalar>::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    Scalar total = 0;
    for (Index t = 0; t < steps; ++t) total += N(t, j);
    for (Index i : gamma.members[static_cast<std::size_t>(j)]) {
      log_mu(i, j) = std::log(std::max(total * theta(j, i), floor));
    }
  }

  ApproxEval<Scalar> eval;
  eval.grad_X.assign(static_cast<std::size_t>(steps), Mat<Scalar>::Zero(n, n));
  eval.grad_Y = Mat<Scalar>::Zero(steps, n);
  eval.grad_Z = Mat<Scalar>::Zero(steps, n);

  KahanSum<Scalar> x_sum, y_sum, z_sum, c_sum;
  for (Index t = 0; t < steps; ++t) {
    const Mat<Scalar>& Xt = state.X[static_cast<std::size_t>(t)];
    Mat<Scalar>& Gt = eval.grad_X[static_cast<std::size_t>(t)];
    for (Index i = 0; i < n; ++i) {
      // Row i of X collects arrivals at i; the active columns mirror Gamma_i.
      Scalar arrivals = 0;
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        const Scalar x = std::max(Xt(i, j), floor);
        arrivals += Xt(i, j);
        x_sum.add(x * (log_mu(i, j) + Scalar(1) - std::log(x)));
      }
      const Scalar arrive_gap = N(t + 1, i) - arrivals;
      c_sum.add(arrive_gap * arrive_gap);
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        const Scalar x = std::max(Xt(i, j), floor);
        Gt(i, j) = log_mu(i, j) - std::log(x) + lambda * arrive_gap;
      }

      const Scalar y = std::max(state.Y(t, i), floor);
      const Scalar z = std::max(state.Z(t, i), floor);
      const Scalar stay_gap = N(t, i) - state.Y(t, i) - state.Z(t, i);
      c_sum.add(stay_gap * stay_gap);
      const bool connected = gamma.degree(i) > 1;
      if (connected) {
        const Scalar log_leave = std::log(std::max(N(t, i) * params.pi[i], floor));
        y_sum.add(y * (log_leave + Scalar(1) - std::log(y)));
        eval.grad_Y(t, i) = log_leave - std::log(y) + lambda * stay_gap;
      }
      const Scalar log_stay = std::log(std::max(N(t, i) * (Scalar(1) - params.pi[i]), floor));
      z_sum.add(z * (log_stay + Scalar(1) - std::log(z)));
      eval.grad_Z(t, i) = log_stay - std::log(z) + lambda * stay_gap;
    }
  }

  eval.x_term = x_sum.value();
  eval.y_term = y_sum.value();
  eval.z_term = z_sum.value();
  eval.constraint = c_sum.value();
  eval.value = eval.x_term + eval.y_term + eval.z_term - lambda / Scalar(2) * eval.constraint;
  return eval;
}

namespace detail {

/// Packed variable order per step: X slots in the shared active layout
/// (interpreted as destination-major), then Y for connected regions, then Z.
struct XYZLayout {
  ActiveLayout slots;          // reused with origin == destination row
  std::vector<Index> y_region; // regions with at least one neighbor
  Index per_step = 0;

  static XYZLayout build(const NeighborSets& gamma) {
    XYZLayout layout;
    layout.slots = ActiveLayout::build(gamma);
    for (Index i = 0; i < gamma.size(); ++i) {
      if (gamma.degree(i) > 1) layout.y_region.push_back(i);
    }
    layout.per_step = layout.slots.nnz + static_cast<Index>(layout.y_region.size()) + gamma.size();
    return layout;
  }
};

template <class Scalar>
Vec<Scalar> pack_xyz(const XYZState<Scalar>& state, const XYZLayout& layout, Scalar floorv) {
  const Index steps = static_cast<Index>(state.X.size());
  const Index n = layout.slots.n;
  Vec<Scalar> x(steps * layout.per_step);
  for (Index t = 0; t < steps; ++t) {
    Index at = t * layout.per_step;
    const Mat<Scalar>& Xt = state.X[static_cast<std::size_t>(t)];
    for (Index k = 0; k < layout.slots.nnz; ++k) {
      x[at++] = std::max(Xt(layout.slots.origin[static_cast<std::size_t>(k)],
                            layout.slots.dest[static_cast<std::size_t>(k)]),
                         floorv);
    }
    for (Index i : layout.y_region) x[at++] = std::max(state.Y(t, i), floorv);
    for (Index i = 0; i < n; ++i) x[at++] = std::max(state.Z(t, i), floorv);
  }
  return x;
}

template <class Scalar>
void unpack_xyz(const Vec<Scalar>& x, const XYZLayout& layout, XYZState<Scalar>& state) {
  const Index steps = static_cast<Index>(state.X.size());
  const Index n = layout.slots.n;
  for (Index t = 0; t < steps; ++t) {
    Index at = t * layout.per_step;
    Mat<Scalar>& Xt = state.X[static_cast<std::size_t>(t)];
    Xt.setZero();
    for (Index k = 0; k < layout.slots.nnz; ++k) {
      Xt(layout.slots.origin[static_cast<std::size_t>(k)],
         layout.slots.dest[static_cast<std::size_t>(k)]) = x[at++];
    }
    state.Y.row(t).setZero();
    for (Index i : layout.y_region) state.Y(t, i) = x[at++];
    for (Index i = 0; i < n; ++i) state.Z(t, i) = x[at++];
  }
}

/// Negated penalized decoupled objective over the packed variables.
template <class Scalar>
class XYZObjective {
 public:
  XYZObjective(const XYZLayout& layout, const Mat<Scalar>& log_mu, const Vec<Scalar>& log_leave,
               const Vec<Scalar>& log_stay, const CountPanel<Scalar>& N, Scalar lambda)
      : layout_(layout), N_(N), lambda_(lambda) {
    const auto& slots = layout.slots;
    mu_.resize(slots.nnz);
    for (Index k = 0; k < slots.nnz; ++k) {
      mu_[k] = log_mu(slots.origin[static_cast<std::size_t>(k)],
                      slots.dest[static_cast<std::size_t>(k)]);
    }
    leave_ = log_leave;
    stay_ = log_stay;
    arrive_gap_.resize(slots.n);
    stay_gap_.resize(slots.n);
  }

  Scalar operator()(const Vec<Scalar>& x, Vec<Scalar>& grad) {
    const Index steps = N_.rows() - 1;
    const Index n = layout_.slots.n;
    const Index nnz = layout_.slots.nnz;
    const Index ny = static_cast<Index>(layout_.y_region.size());
    grad.resize(x.size());
    KahanSum<Scalar> value, cons;
    for (Index t = 0; t < steps; ++t) {
      const Index base = t * layout_.per_step;
      arrive_gap_ = N_.row(t + 1).transpose();
      stay_gap_ = N_.row(t).transpose();
      for (Index k = 0; k < nnz; ++k) {
        arrive_gap_[layout_.slots.origin[static_cast<std::size_t>(k)]] -= x[base + k];
      }
      for (Index y = 0; y < ny; ++y) stay_gap_[layout_.y_region[static_cast<std::size_t>(y)]] -= x[base + nnz + y];
      for (Index i = 0; i < n; ++i) stay_gap_[i] -= x[base + nnz + ny + i];
      for (Index i = 0; i < n; ++i) {
        cons.add(arrive_gap_[i] * arrive_gap_[i]);
        cons.add(stay_gap_[i] * stay_gap_[i]);
      }
      for (Index k = 0; k < nnz; ++k) {
        const Scalar v = x[base + k];
        const Scalar logv = std::log(v);
        // leave_(t,i) and stay_(t,i) are per-snapshot, mu is shared.
        value.add(v * (mu_[k] + Scalar(1) - logv));
        grad[base + k] = logv - mu_[k] -
                         lambda_ * arrive_gap_[layout_.slots.origin[static_cast<std::size_t>(k)]];
      }
      for (Index y = 0; y < ny; ++y) {
        const Index i = layout_.y_region[static_cast<std::size_t>(y)];
        const Scalar v = x[base + nnz + y];
        const Scalar logv = std::log(v);
        const Scalar target = leave_[t * n + i];
        value.add(v * (target + Scalar(1) - logv));
        grad[base + nnz + y] = logv - target - lambda_ * stay_gap_[i];
      }
      for (Index i = 0; i < n; ++i) {
        const Scalar v = x[base + nnz + ny + i];
        const Scalar logv = std::log(v);
        const Scalar target = stay_[t * n + i];
        value.add(v * (target + Scalar(1) - logv));
        grad[base + nnz + ny + i] = logv - target - lambda_ * stay_gap_[i];
      }
    }
    return -value.value() + lambda_ / Scalar(2) * cons.value();
  }

 private:
  const XYZLayout& layout_;
  const CountPanel<Scalar>& N_;
  Scalar lambda_;
  Vec<Scalar> mu_, leave_, stay_, arrive_gap_, stay_gap_;
};

}  // namespace detail

/// Margins of the arrival variables feeding the shared (s, beta) update:
/// inbound totals A, origin totals B and distance-weighted mass D. All three
/// come from X alone — the attractiveness and decay parameters enter the
/// decoupled objective only through the arrival means, so the departure
/// weights are the origin-side sums of X, not the separately optimized Y
/// (the two agree whenever the state was assembled from one flow tensor, but
/// diverge mid-stage, and using Y there skews the decay estimate).
template <class Scalar = double>
void xyz_margins(const XYZState<Scalar>& state, const Mat<Scalar>& d, const NeighborSets& gamma,
                 Vec<Scalar>& A, Vec<Scalar>& B, Scalar& D) {
  const Index n = gamma.size();
  A = Vec<Scalar>::Zero(n);
  B = Vec<Scalar>::Zero(n);
  KahanSum<Scalar> weighted;
  for (std::size_t t = 0; t < state.X.size(); ++t) {
    const Mat<Scalar>& Xt = state.X[t];
    for (Index i = 0; i < n; ++i) {
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        if (j == i) continue;
        A[i] += Xt(i, j);
        B[j] += Xt(i, j);
        weighted.add(d(i, j) * Xt(i, j));
      }
    }
  }
  D = weighted.value();
}

/// Decoupled alternating maximization with an outer feedback loop. Each round
/// maximizes the decoupled objective over (X, Y, Z), re-estimates the
/// parameters, and finally recovers a coupled flow tensor by the same
/// box-constrained likelihood ascent the exact solver uses; the recovered
/// flows seed the next round. Stops on the round cap, a relative-change
/// threshold, or (given truth) a target or non-improving error.
template <class Scalar = double>
FitResult<Scalar> fit_approx(const CountPanel<Scalar>& N, const Mat<Scalar>& d,
                             const NeighborSets& gamma, const SolverConfig& cfg,
                             const OuterLoopConfig& outer = {},
                             const FlowTensor<Scalar>* truth = nullptr) {
  detail::validate_panel(N);
  const Index n = N.cols();
  const Index steps = N.rows() - 1;
  if (d.rows() != n || d.cols() != n) throw InputError("fit_approx: distance matrix must be n x n");
  if (gamma.size() != n) throw InputError("fit_approx: neighbor sets must match the panel");
  if (!is_symmetric(d)) throw InputError("fit_approx: distance matrix must be symmetric");
  if (outer.max_rounds < 1) throw InputError("fit_approx: need at least one round");

  const detail::XYZLayout layout = detail::XYZLayout::build(gamma);
  const Scalar floorv = Scalar(cfg.flow_floor);

  FitResult<Scalar> result;
  ModelParams<Scalar> params;
  params.pi = Vec<Scalar>::Constant(n, Scalar(0.02));
  params.s = Vec<Scalar>::Constant(n, Scalar(0.02));
  const Scalar dmax = max_distance(d);
  params.beta = dmax > Scalar(0) ? Scalar(50) / dmax : Scalar(0);
  for (Index i = 0; i < n; ++i) {
    if (gamma.degree(i) <= 1) params.pi[i] = Scalar(0);  // nowhere to depart to
  }

  SBetaOptions sbeta;
  sbeta.bounds = cfg.beta_bounds.value_or(default_beta_bounds(d));
  sbeta.tol = cfg.sbeta_tol;
  sbeta.max_iter = cfg.sbeta_max_iter;
  sbeta.cycle_window = cfg.cycle_window;
  sbeta.brent_rel_tol = cfg.brent_rel_tol;

  // Diagonal start with small seeded off-diagonal mass.
  FlowTensor<Scalar> M_cur(static_cast<std::size_t>(steps), Mat<Scalar>::Zero(n, n));
  {
    std::mt19937_64 rng(detail::mix64(cfg.seed ^ 0x0ddf10a7ULL));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Index t = 0; t < steps; ++t) {
      Mat<Scalar>& Mt = M_cur[static_cast<std::size_t>(t)];
      Mt.diagonal() = N.row(t).transpose();
      for (Index i = 0; i < n; ++i) {
        for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
          if (j != i) Mt(i, j) = Scalar(u(rng));
        }
      }
    }
  }

  BoxSpec<Scalar> box;
  MinimizeOptions opt;
  opt.history = cfg.lbfgs_history;
  opt.rel_f_tol = cfg.lbfgs_rel_f_tol;

  double nae_prev = std::numeric_limits<double>::infinity();
  for (int round = 0; round < outer.max_rounds; ++round) {
    XYZState<Scalar> state = xyz_from_flows(M_cur, gamma);
    if (round > 0) {
      // The fed-back coupled flows re-seed the parameters; this is the channel
      // through which a new round actually differs from the previous one (the
      // decoupled stage alone has a unique optimum for fixed parameters). The
      // (s, beta) solve restarts from the flat defaults so a poor basin from
      // the cold round cannot trap the later, better-informed rounds.
      params.pi = update_pi_approx(state, &result.warnings);
      Vec<Scalar> A, B;
      Scalar D{};
      xyz_margins(state, d, gamma, A, B, D);
      if (B.sum() > Scalar(0)) {
        const Vec<Scalar> s_flat = Vec<Scalar>::Constant(n, Scalar(0.02));
        const Scalar beta_flat = dmax > Scalar(0) ? Scalar(50) / dmax : Scalar(0);
        SBetaResult<Scalar> sb = update_s_beta_core(A, B, D, d, gamma, s_flat, beta_flat, sbeta);
        params.s = sb.s;
        params.beta = sb.beta;
        if (sb.cycle_detected) ++result.cycle_retries;
      }
    }
    Vec<Scalar> x = detail::pack_xyz(state, layout, floorv);
    if (box.lower.size() != x.size()) box.lower = Vec<Scalar>::Constant(x.size(), floorv);

    Scalar prev_value = 0;
    bool have_prev = false;
    for (int inner = 0; inner < cfg.approx_max_inner; ++inner) {
      // Freeze the parameter-implied targets, then maximize the decoupled objective.
      const Mat<Scalar> theta = transition_matrix(params, d, gamma);
      Mat<Scalar> log_mu = Mat<Scalar>::Zero(n, n);
      for (Index j = 0; j < n; ++j) {
        Scalar total = 0;
        for (Index t = 0; t < steps; ++t) total += N(t, j);
        for (Index i : gamma.members[static_cast<std::size_t>(j)]) {
          log_mu(i, j) = std::log(std::max(total * theta(j, i), Scalar(kMinFlow)));
        }
      }
      Vec<Scalar> log_leave(steps * n), log_stay(steps * n);
      for (Index t = 0; t < steps; ++t) {
        for (Index i = 0; i < n; ++i) {
          log_leave[t * n + i] = std::log(std::max(N(t, i) * params.pi[i], Scalar(kMinFlow)));
          log_stay[t * n + i] =
              std::log(std::max(N(t, i) * (Scalar(1) - params.pi[i]), Scalar(kMinFlow)));
        }
      }
      detail::XYZObjective<Scalar> objective(layout, log_mu, log_leave, log_stay, N,
                                             Scalar(cfg.lambda));
      auto [x_best, report] = minimize_box<Scalar>(objective, std::move(x), box,
                                                   Scalar(cfg.lbfgs_pg_tol), cfg.lbfgs_max_iter,
                                                   opt);
      x = std::move(x_best);
      detail::unpack_xyz(x, layout, state);

      params.pi = update_pi_approx(state, &result.warnings);
      Vec<Scalar> A, B;
      Scalar D{};
      xyz_margins(state, d, gamma, A, B, D);
      if (B.sum() > Scalar(0)) {
        SBetaResult<Scalar> sb = update_s_beta_core(A, B, D, d, gamma, params.s, params.beta, sbeta);
        params.s = sb.s;
        params.beta = sb.beta;
        if (sb.cycle_detected) ++result.cycle_retries;
      }

      const ApproxEval<Scalar> eval =
          approx_loglik_and_grad(state, params, N, Scalar(cfg.lambda), d, gamma);
      LikelihoodBreakdown<Scalar> entry;
      entry.L0 = eval.x_term;  // arrivals part
      entry.L1 = eval.y_term;  // departures part
      entry.L2 = eval.z_term;  // stayers part
      entry.C = eval.constraint;
      entry.total = eval.value;
      result.trace.push_back(entry);
      if (!std::isfinite(static_cast<double>(eval.value)))
        throw ModelError("decoupled objective became non-finite");

      const Scalar value = Scalar(-report.final_value);
      if (have_prev && std::abs(value - prev_value) <=
                           Scalar(cfg.approx_inner_tol) * std::max(Scalar(1), std::abs(prev_value)))
        break;
      prev_value = value;
      have_prev = true;
    }

    // Recover coupled flows by likelihood ascent from the fitted arrivals.
    FlowTensor<Scalar> M_rec = flows_from_xyz(state);
    const TransitionCoeffs<Scalar> coeffs = precompute_coeffs(params, d, gamma);
    maximize_flows(M_rec, coeffs, N, Scalar(cfg.lambda), layout.slots, cfg);
    result.outer_iterations = round + 1;

    if (round > 0) {
      double change = 0.0;
      for (std::size_t t = 0; t < M_rec.size(); ++t) {
        for (Index i = 0; i < n; ++i) {
          for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
            const double prev = static_cast<double>(M_cur[t](i, j));
            change = std::max(change, std::abs(static_cast<double>(M_rec[t](i, j)) - prev) /
                                          std::max(1.0, prev));
          }
        }
      }
      result.round_changes.push_back(change);
    }

    if (truth != nullptr) {
      const double err = static_cast<double>(nae(M_rec, *truth));
      result.round_errors.push_back(err);
      if (err > nae_prev) {
        // The feedback loop stopped helping; keep the previous round's flows,
        // which still sit in M_cur because the rotation happens below.
        result.termination = FitTermination::Converged;
        result.M = std::move(M_cur);
        result.params = std::move(params);
        return result;
      }
      nae_prev = err;
      if (outer.nae_target.has_value() && err <= *outer.nae_target) {
        result.termination = FitTermination::Converged;
        M_cur = std::move(M_rec);
        break;
      }
    }

    M_cur = std::move(M_rec);
    if (outer.rel_change_threshold.has_value() && !result.round_changes.empty() &&
        result.round_changes.back() < *outer.rel_change_threshold) {
      result.termination = FitTermination::Converged;
      break;
    }
    if (round + 1 == outer.max_rounds && outer.max_rounds == result.outer_iterations &&
        !outer.rel_change_threshold.has_value() && !outer.nae_target.has_value()) {
      result.termination = FitTermination::Converged;  // ran the requested rounds to completion
    }
  }

  result.M = std::move(M_cur);
  result.params = std::move(params);
  return result;
}

/// Convenience entry point that derives the geometry from region centroids and
/// the configured travel cutoff.
inline FitResult<double> fit_approx(const CountPanel<double>& N, const RegionSet& regions,
                                    const SolverConfig& cfg, const OuterLoopConfig& outer = {},
                                    const FlowTensor<double>* truth = nullptr) {
  if (!(cfg.cutoff > 0)) throw InputError("fit_approx: travel cutoff must be positive");
  if (regions.size() != N.cols())
    throw InputError("fit_approx: region set must match the panel columns");
  const Mat<double> d = build_distance_matrix(regions);
  const NeighborSets gamma = neighbor_sets(d, cfg.cutoff);
  return fit_approx<double>(N, d, gamma, cfg, outer, truth);
}

}  // namespace odflow
