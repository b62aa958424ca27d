// Acceptance suite: each test case checks one release criterion and prints a
// single summary line with the measured values and the thresholds pinned here.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "odflow/approx_solver.hpp"
#include "odflow/exact_solver.hpp"
#include "odflow/geo.hpp"
#include "odflow/likelihood.hpp"
#include "odflow/metrics.hpp"
#include "odflow/scaling.hpp"
#include "odflow/simulator.hpp"

using namespace odflow;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double pearson(const Vec<double>& a, const Vec<double>& b) {
  const double ma = a.mean(), mb = b.mean();
  const Vec<double> ca = a.array() - ma, cb = b.array() - mb;
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  REQUIRE(denom > 0.0);
  return ca.dot(cb) / denom;
}

double median(std::vector<double> values) {
  REQUIRE(!values.empty());
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  return values[mid];
}

/// Production pipeline: pick the count scale, fit on scaled counts with the
/// compensated penalty weight, then map the flows back.
FitResult<double> scaled_exact(const CountPanel<double>& N, const Mat<double>& d,
                               const NeighborSets& gamma, SolverConfig cfg,
                               InitStrategy init = {}) {
  const ScalePlan plan = plan_scaling(N, gamma, 1.0, cfg.lambda);
  cfg.lambda = plan.lambda_scaled;
  FitResult<double> result = fit_exact<double>(apply_scaling(N, plan), d, gamma, cfg, init);
  result.M = descale_flows(result.M, plan);
  return result;
}

FitResult<double> scaled_approx(const CountPanel<double>& N, const Mat<double>& d,
                                const NeighborSets& gamma, SolverConfig cfg,
                                const OuterLoopConfig& outer) {
  const ScalePlan plan = plan_scaling(N, gamma, 1.0, cfg.lambda);
  cfg.lambda = plan.lambda_scaled;
  FitResult<double> result = fit_approx<double>(apply_scaling(N, plan), d, gamma, cfg, outer);
  result.M = descale_flows(result.M, plan);
  return result;
}

/// Relative agreement between an analytic derivative and a central difference,
/// scaled so near-zero derivatives are judged absolutely.
double rel_gap(double analytic, double fd) {
  return std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
}

bool trace_non_decreasing(const std::vector<LikelihoodBreakdown<double>>& trace, double slack,
                          double* worst = nullptr) {
  bool ok = true;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    const double allowed = slack * std::max(1.0, std::abs(trace[k - 1].total));
    const double drop = trace[k - 1].total - trace[k].total;
    if (worst != nullptr) *worst = std::max(*worst, drop);
    if (drop > allowed) ok = false;
  }
  return ok;
}

struct RandomInstance {
  Mat<double> d;
  NeighborSets gamma;
  CountPanel<double> N;
  ModelParams<double> params;
  FlowTensor<double> M;
};

/// Small dense-ish geometry with strictly positive flows on every active
/// entry, safely away from the evaluation floor so differencing is smooth.
RandomInstance random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RandomInstance inst;
  const Index n = 3 + static_cast<Index>(rng() % 4);  // 3..6 regions
  Mat<double> coords(n, 2);
  for (Index i = 0; i < n; ++i) {
    coords(i, 0) = static_cast<double>(i) + 0.3 * u(rng);
    coords(i, 1) = 0.5 * u(rng);
  }
  inst.d = pairwise_distances(coords);
  inst.gamma = neighbor_sets(inst.d, 2.6);
  const Index steps = 2;
  inst.N.resize(steps + 1, n);
  for (Index t = 0; t <= steps; ++t)
    for (Index i = 0; i < n; ++i) inst.N(t, i) = 60.0 + 80.0 * u(rng);
  inst.params.pi = Vec<double>::Zero(n);
  inst.params.s = Vec<double>::Zero(n);
  for (Index i = 0; i < n; ++i) {
    inst.params.pi[i] = 0.05 + 0.25 * u(rng);
    inst.params.s[i] = 0.3 + u(rng);
  }
  inst.params.beta = 0.2 + 1.3 * u(rng);
  inst.M.assign(steps, Mat<double>::Zero(n, n));
  for (auto& slice : inst.M) {
    for (Index i = 0; i < n; ++i) {
      for (Index j : inst.gamma.members[static_cast<std::size_t>(i)]) {
        slice(i, j) = (i == j ? 40.0 : 0.5) + 7.0 * u(rng);
      }
    }
  }
  return inst;
}

XYZState<double> random_xyz(const RandomInstance& inst, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 3.0);
  const Index n = inst.N.cols();
  const Index steps = inst.N.rows() - 1;
  XYZState<double> state;
  state.X.assign(static_cast<std::size_t>(steps), Mat<double>::Zero(n, n));
  state.Y = Mat<double>::Zero(steps, n);
  state.Z = Mat<double>::Zero(steps, n);
  for (Index t = 0; t < steps; ++t) {
    for (Index i = 0; i < n; ++i) {
      for (Index j : inst.gamma.members[static_cast<std::size_t>(i)])
        state.X[static_cast<std::size_t>(t)](i, j) = (i == j ? 45.0 : 1.5) * u(rng);
      state.Y(t, i) = 6.0 * u(rng);
      state.Z(t, i) = 45.0 * u(rng);
    }
  }
  return state;
}

}  // namespace

// Criterion 1: analytic gradients of the coupled likelihood and of the
// decoupled objective match central finite differences on randomized
// instances. Tolerance: relative error < 1e-5; runtime < 60 s.
TEST_CASE("criterion_1") {
  const auto start = Clock::now();
  const double kTol = 1e-5;
  const double h = 1e-5;
  double worst = 0.0;

  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RandomInstance inst = random_instance(seed);
    const double lambda = 0.5 + 2.0 * static_cast<double>(seed % 5);

    // Coupled likelihood: derivative with respect to every active flow entry.
    const FlowTensor<double> grad =
        exact_grad_M(inst.M, inst.params, inst.N, lambda, inst.d, inst.gamma);
    for (std::size_t t = 0; t < inst.M.size(); ++t) {
      for (Index i = 0; i < inst.N.cols(); ++i) {
        for (Index j : inst.gamma.members[static_cast<std::size_t>(i)]) {
          FlowTensor<double> work = inst.M;
          work[t](i, j) += h;
          const double up = exact_loglik(work, inst.params, inst.N, lambda, inst.d, inst.gamma).total;
          work[t](i, j) -= 2 * h;
          const double dn = exact_loglik(work, inst.params, inst.N, lambda, inst.d, inst.gamma).total;
          worst = std::max(worst, rel_gap(grad[t](i, j), (up - dn) / (2 * h)));
        }
      }
    }

    // Decoupled objective: derivatives with respect to arrivals, departure
    // totals and stay totals.
    std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
    XYZState<double> state = random_xyz(inst, rng);
    const ApproxEval<double> eval =
        approx_loglik_and_grad(state, inst.params, inst.N, lambda, inst.d, inst.gamma);
    const auto value_at = [&](const XYZState<double>& s) {
      return approx_loglik_and_grad(s, inst.params, inst.N, lambda, inst.d, inst.gamma).value;
    };
    for (Index t = 0; t < inst.N.rows() - 1; ++t) {
      for (Index i = 0; i < inst.N.cols(); ++i) {
        for (Index j : inst.gamma.members[static_cast<std::size_t>(i)]) {
          XYZState<double> work = state;
          work.X[static_cast<std::size_t>(t)](i, j) += h;
          const double up = value_at(work);
          work.X[static_cast<std::size_t>(t)](i, j) -= 2 * h;
          const double dn = value_at(work);
          worst = std::max(
              worst, rel_gap(eval.grad_X[static_cast<std::size_t>(t)](i, j), (up - dn) / (2 * h)));
        }
        {
          XYZState<double> work = state;
          work.Y(t, i) += h;
          const double up = value_at(work);
          work.Y(t, i) -= 2 * h;
          const double dn = value_at(work);
          worst = std::max(worst, rel_gap(eval.grad_Y(t, i), (up - dn) / (2 * h)));
        }
        {
          XYZState<double> work = state;
          work.Z(t, i) += h;
          const double up = value_at(work);
          work.Z(t, i) -= 2 * h;
          const double dn = value_at(work);
          worst = std::max(worst, rel_gap(eval.grad_Z(t, i), (up - dn) / (2 * h)));
        }
      }
    }
  }

  const double elapsed = seconds_since(start);
  const bool ok = worst < kTol && elapsed < 60.0;
  std::printf("[criterion 1] %s worst relative gradient error %.3g (tol %.0e) in %.1fs (limit 60s)\n",
              ok ? "PASS" : "FAIL", worst, kTol, elapsed);
  CHECK(worst < kTol);
  CHECK(elapsed < 60.0);
}

// Criterion 2: on the nine-cell benchmark the exact fit recovers the departure
// probabilities and gathering scores with Pearson r > 0.9 each; the decay rate
// is reported but not asserted. Runtime < 120 s.
TEST_CASE("criterion_2") {
  const auto start = Clock::now();
  const ScenarioSpec spec = make_benchmark_grid(7);
  const SyntheticTruth truth = simulate(spec);
  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);

  SolverConfig cfg;
  const FitResult<double> fit = scaled_exact(truth.N, d, gamma, cfg);
  const double r_pi = pearson(fit.params.pi, spec.pi);
  const double r_s = pearson(fit.params.s, spec.s);
  const double elapsed = seconds_since(start);

  const bool ok = r_pi > 0.9 && r_s > 0.9 && elapsed < 120.0;
  std::printf(
      "[criterion 2] %s r_pi=%.4f r_s=%.4f (need > 0.9) beta_hat=%.3f (true %.1f, unasserted) "
      "in %.1fs (limit 120s)\n",
      ok ? "PASS" : "FAIL", r_pi, r_s, fit.params.beta, spec.beta, elapsed);
  CHECK(r_pi > 0.9);
  CHECK(r_s > 0.9);
  CHECK(elapsed < 120.0);
}

// Criterion 3: on the 225-region ring panel, (a) three feedback rounds of the
// decoupled solver beat one round on NAE, and (b) its off-diagonal NAE beats
// the coupled solver's. Absolute values are recorded; NAE above 0.15 after
// three rounds is flagged. Runtime < 1800 s.
TEST_CASE("criterion_3") {
  const auto start = Clock::now();
  const ScenarioSpec spec = make_benchmark_ring(1e5, 3, 7);
  const SyntheticTruth truth = simulate(spec);
  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);

  SolverConfig cfg;
  const FitResult<double> exact_fit = scaled_exact(truth.N, d, gamma, cfg);
  const double exact_off = offdiag_nae(exact_fit.M, truth.M_true);

  OuterLoopConfig one_round;
  one_round.max_rounds = 1;
  const FitResult<double> approx1 = scaled_approx(truth.N, d, gamma, cfg, one_round);
  const double nae1 = nae(approx1.M, truth.M_true);

  OuterLoopConfig three_rounds;
  three_rounds.max_rounds = 3;
  const FitResult<double> approx3 = scaled_approx(truth.N, d, gamma, cfg, three_rounds);
  const double nae3 = nae(approx3.M, truth.M_true);
  const double approx_off = offdiag_nae(approx3.M, truth.M_true);

  const double elapsed = seconds_since(start);
  const bool ordering_rounds = nae3 < nae1;
  const bool ordering_solvers = approx_off < exact_off;
  const bool ok = ordering_rounds && ordering_solvers && elapsed < 1800.0;
  std::printf(
      "[criterion 3] %s nae(1 round)=%.4f nae(3 rounds)=%.4f (need strict decrease); "
      "offdiag nae approx=%.4f exact=%.4f (need approx < exact)%s in %.1fs (limit 1800s)\n",
      ok ? "PASS" : "FAIL", nae1, nae3, approx_off, exact_off,
      nae3 > 0.15 ? " [FLAG: nae(3 rounds) > 0.15]" : "", elapsed);
  CHECK(nae3 < nae1);
  CHECK(approx_off < exact_off);
  CHECK(elapsed < 1800.0);
}

// Criterion 4: with noisy counts the middle penalty weight wins: mean NAE at
// lambda = 10 is <= the means at lambda = 1 and lambda = 100 over four seeds.
TEST_CASE("criterion_4") {
  const auto start = Clock::now();
  const std::vector<double> lambdas{1.0, 10.0, 100.0};
  std::vector<double> mean_nae(3, 0.0);
  const std::vector<std::uint64_t> seeds{7, 8, 9, 10};

  for (const std::uint64_t seed : seeds) {
    ScenarioSpec spec = make_benchmark_ring(1e5, 3, seed);
    spec.noise_fraction = 0.1;
    const SyntheticTruth truth = simulate(spec);
    const Mat<double> d = build_distance_matrix(spec.regions);
    const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      SolverConfig cfg;
      cfg.lambda = lambdas[k];
      const FitResult<double> fit = scaled_exact(truth.N, d, gamma, cfg);
      mean_nae[k] += nae(fit.M, truth.M_true) / static_cast<double>(seeds.size());
    }
  }

  const double elapsed = seconds_since(start);
  const bool ok = mean_nae[1] <= mean_nae[0] && mean_nae[1] <= mean_nae[2];
  std::printf(
      "[criterion 4] %s mean NAE over %zu seeds: lambda=1 %.4f, lambda=10 %.4f, lambda=100 %.4f "
      "(need middle <= both) in %.1fs\n",
      ok ? "PASS" : "FAIL", seeds.size(), mean_nae[0], mean_nae[1], mean_nae[2], elapsed);
  CHECK(mean_nae[1] <= mean_nae[0]);
  CHECK(mean_nae[1] <= mean_nae[2]);
}

// Criterion 5: fitting the same small-count panel under scale factors 1e3 and
// 1e4 gives descaled flows agreeing on >= 90% of active entries within 10%
// relative or 0.5 absolute. The fits run at a tightened convergence tolerance
// so the comparison isolates the scale handling itself.
TEST_CASE("criterion_5") {
  const auto start = Clock::now();
  ScenarioSpec spec = make_benchmark_grid(7);
  spec.n0 = Vec<double>::Constant(9, 50.0);
  const SyntheticTruth truth = simulate(spec);
  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);

  std::vector<FlowTensor<double>> fits;
  for (const double c : {1e3, 1e4}) {
    ScalePlan plan;
    plan.c = c;
    plan.lambda_original = 10.0;
    plan.lambda_scaled = 10.0 / c;
    SolverConfig cfg;
    cfg.lambda = plan.lambda_scaled;
    cfg.epsilon = 1e-6;
    cfg.lbfgs_pg_tol = 1e-8;
    const FitResult<double> fit = fit_exact<double>(apply_scaling(truth.N, plan), d, gamma, cfg, {});
    fits.push_back(descale_flows(fit.M, plan));
  }

  int total = 0, agreeing = 0;
  for (std::size_t t = 0; t < fits[0].size(); ++t) {
    for (Index i = 0; i < 9; ++i) {
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        const double a = fits[0][t](i, j), b = fits[1][t](i, j);
        ++total;
        const double gap = std::abs(a - b);
        if (gap <= 0.5 || gap <= 0.1 * std::max(std::abs(a), std::abs(b))) ++agreeing;
      }
    }
  }
  const double fraction = static_cast<double>(agreeing) / static_cast<double>(total);
  const double elapsed = seconds_since(start);
  const bool ok = fraction >= 0.9;
  std::printf(
      "[criterion 5] %s %d/%d active entries agree within 10%% relative or 0.5 absolute "
      "(fraction %.3f, need >= 0.9) in %.1fs\n",
      ok ? "PASS" : "FAIL", agreeing, total, fraction, elapsed);
  CHECK(fraction >= 0.9);
}

// Criterion 6: across 20 jittered initializations, more than 80% of active
// entries with non-negligible mean have std/mean below 1.
TEST_CASE("criterion_6") {
  const auto start = Clock::now();
  const ScenarioSpec spec = make_benchmark_grid(7);
  const SyntheticTruth truth = simulate(spec);
  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);

  std::vector<FlowTensor<double>> runs;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SolverConfig cfg;
    const FitResult<double> fit =
        scaled_exact(truth.N, d, gamma, cfg, InitStrategy{InitKind::StaticJittered, seed});
    runs.push_back(fit.M);
  }
  const StabilityReport report = stability_report(runs);
  const double elapsed = seconds_since(start);
  const bool ok = report.fraction_below_one > 0.8;
  std::printf(
      "[criterion 6] %s std/mean < 1 on %.1f%% of %zu measurable entries "
      "(need > 80%%; %zu near-zero entries excluded) in %.1fs\n",
      ok ? "PASS" : "FAIL", 100.0 * report.fraction_below_one, report.ratios.size(),
      report.near_zero_entries, elapsed);
  CHECK(report.fraction_below_one > 0.8);
}

// Criterion 7: tightening the outer tolerance from 1e-2 to 1e-4 shrinks the
// disagreement between static-start and movement-start fits (median absolute
// log-ratio over shared positive entries strictly decreases).
TEST_CASE("criterion_7") {
  const auto start = Clock::now();
  const ScenarioSpec spec = make_benchmark_ring(1e5, 3, 7);
  const SyntheticTruth truth = simulate(spec);
  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);

  std::vector<double> medians;
  for (const double eps : {1e-2, 1e-4}) {
    SolverConfig cfg;
    cfg.epsilon = eps;
    const FitResult<double> fit_static =
        scaled_exact(truth.N, d, gamma, cfg, InitStrategy{InitKind::Static, std::nullopt});
    const FitResult<double> fit_moving =
        scaled_exact(truth.N, d, gamma, cfg, InitStrategy{InitKind::Moving, std::nullopt});
    std::vector<double> ratios;
    for (std::size_t t = 0; t < fit_static.M.size(); ++t) {
      for (Index i = 0; i < d.rows(); ++i) {
        for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
          const double a = fit_static.M[t](i, j), b = fit_moving.M[t](i, j);
          if (a > 1e-9 && b > 1e-9) ratios.push_back(std::abs(std::log(a / b)));
        }
      }
    }
    medians.push_back(median(std::move(ratios)));
  }

  const double elapsed = seconds_since(start);
  const bool ok = medians[1] < medians[0];
  std::printf(
      "[criterion 7] %s median |log ratio| static-vs-moving: %.4g at eps=1e-2, %.4g at eps=1e-4 "
      "(need strict decrease) in %.1fs\n",
      ok ? "PASS" : "FAIL", medians[0], medians[1], elapsed);
  CHECK(medians[1] < medians[0]);
}

// Criterion 8: the coupled solver's objective trace is non-decreasing within
// 1e-8 relative slack on every fit in a representative battery.
TEST_CASE("criterion_8") {
  const auto start = Clock::now();
  const double kSlack = 1e-8;
  double worst_drop = 0.0;
  bool all_ok = true;
  int fits = 0;

  const auto check_fit = [&](const FitResult<double>& fit) {
    ++fits;
    if (!trace_non_decreasing(fit.trace, kSlack, &worst_drop)) all_ok = false;
  };

  {
    const ScenarioSpec spec = make_benchmark_grid(7);
    const SyntheticTruth truth = simulate(spec);
    const Mat<double> d = build_distance_matrix(spec.regions);
    const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
    for (const double lambda : {1.0, 10.0, 100.0}) {
      SolverConfig cfg;
      cfg.lambda = lambda;
      check_fit(scaled_exact(truth.N, d, gamma, cfg));
    }
    SolverConfig cfg;
    check_fit(scaled_exact(truth.N, d, gamma, cfg, InitStrategy{InitKind::StaticJittered, 5}));
    check_fit(scaled_exact(truth.N, d, gamma, cfg, InitStrategy{InitKind::Moving, std::nullopt}));
  }
  {
    ScenarioSpec spec = make_benchmark_grid(7);
    spec.n0 = Vec<double>::Constant(9, 50.0);
    const SyntheticTruth truth = simulate(spec);
    const Mat<double> d = build_distance_matrix(spec.regions);
    const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
    SolverConfig cfg;
    check_fit(scaled_exact(truth.N, d, gamma, cfg));
  }
  {
    const ScenarioSpec spec = make_benchmark_ring(1e5, 3, 7);
    const SyntheticTruth truth = simulate(spec);
    const Mat<double> d = build_distance_matrix(spec.regions);
    const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
    SolverConfig cfg;
    check_fit(scaled_exact(truth.N, d, gamma, cfg));
  }
  {
    ScenarioSpec spec = make_benchmark_ring(1e5, 3, 8);
    spec.noise_fraction = 0.1;
    const SyntheticTruth truth = simulate(spec);
    const Mat<double> d = build_distance_matrix(spec.regions);
    const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
    SolverConfig cfg;
    check_fit(scaled_exact(truth.N, d, gamma, cfg));
  }

  const double elapsed = seconds_since(start);
  std::printf(
      "[criterion 8] %s objective trace non-decreasing on %d fits within %.0e relative slack "
      "(worst single-step drop %.3g) in %.1fs\n",
      all_ok ? "PASS" : "FAIL", fits, kSlack, worst_drop, elapsed);
  CHECK(all_ok);
}

// Criterion 9: the noise-free simulator satisfies both marginal identities
// exactly, and the fitted conservation residual strictly decreases as the
// penalty weight increases tenfold across three points.
TEST_CASE("criterion_9") {
  const auto start = Clock::now();

  bool identities_exact = true;
  for (const bool use_ring : {false, true}) {
    const ScenarioSpec spec =
        use_ring ? make_benchmark_ring(1e4, 3, 11) : make_benchmark_grid(11);
    const SyntheticTruth truth = simulate(spec);
    for (Index t = 0; t + 1 <= truth.N.rows() - 1; ++t) {
      const Mat<double>& Mt = truth.M_true[static_cast<std::size_t>(t)];
      for (Index i = 0; i < spec.regions.size(); ++i) {
        if (Mt.row(i).sum() != truth.N(t, i)) identities_exact = false;
        if (Mt.col(i).sum() != truth.N(t + 1, i)) identities_exact = false;
      }
    }
  }

  const ScenarioSpec spec = make_benchmark_grid(7);
  const SyntheticTruth truth = simulate(spec);
  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
  std::vector<double> residuals;
  for (const double lambda : {1.0, 10.0, 100.0}) {
    SolverConfig cfg;
    cfg.lambda = lambda;
    const FitResult<double> fit = fit_exact<double>(truth.N, d, gamma, cfg, {});
    residuals.push_back(fit.trace.back().C);
  }

  const double elapsed = seconds_since(start);
  const bool decreasing = residuals[1] < residuals[0] && residuals[2] < residuals[1];
  const bool ok = identities_exact && decreasing;
  std::printf(
      "[criterion 9] %s noise-free marginal identities %s; fitted residual C: %.4g (lambda=1) "
      "> %.4g (lambda=10) > %.4g (lambda=100): %s in %.1fs\n",
      ok ? "PASS" : "FAIL", identities_exact ? "exact" : "VIOLATED", residuals[0], residuals[1],
      residuals[2], decreasing ? "strictly decreasing" : "NOT DECREASING", elapsed);
  CHECK(identities_exact);
  CHECK(decreasing);
}

// Criterion 10: an 800-region, two-snapshot panel with roughly 300 reachable
// destinations per region completes the coupled fit in under 10 minutes.
TEST_CASE("criterion_10") {
  ScenarioSpec spec;
  const Index rows = 25, cols = 32;
  const Index n = rows * cols;
  spec.regions.coords = Mat<double>(n, 2);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      spec.regions.ids.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
      spec.regions.coords(r * cols + c, 0) = static_cast<double>(c);
      spec.regions.coords(r * cols + c, 1) = static_cast<double>(r);
    }
  }
  spec.cutoff = 12.0;  // mean reachable set just under 300 destinations
  spec.beta = 1.0;
  spec.steps = 1;
  spec.seed = 3;
  spec.pi = Vec<double>::Constant(n, 0.05);
  spec.s = Vec<double>::Ones(n);
  spec.n0 = Vec<double>::Constant(n, 1000.0);

  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
  double mean_degree = 0.0;
  for (Index i = 0; i < n; ++i) mean_degree += static_cast<double>(gamma.degree(i));
  mean_degree /= static_cast<double>(n);
  const SyntheticTruth truth = simulate(spec);

  const auto start = Clock::now();
  SolverConfig cfg;
  const FitResult<double> fit = scaled_exact(truth.N, d, gamma, cfg);
  const double elapsed = seconds_since(start);

  const bool ok = elapsed < 600.0;
  std::printf(
      "[criterion 10] %s %ld regions (mean reachable set %.0f) fitted in %.1fs (limit 600s), "
      "%d outer iterations, %s\n",
      ok ? "PASS" : "FAIL", static_cast<long>(n), mean_degree, elapsed, fit.outer_iterations,
      fit.termination == FitTermination::Converged ? "converged" : "hit iteration cap");
  CHECK(elapsed < 600.0);
}
