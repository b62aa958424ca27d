#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "odflow/geo.hpp"
#include "odflow/likelihood.hpp"
#include "odflow/types.hpp"

namespace odflow {

/// Everything needed to generate a synthetic panel: geometry, model
/// parameters, initial counts, horizon, optional count noise, and the seed.
struct ScenarioSpec {
  RegionSet regions;
  Vec<double> pi;
  Vec<double> s;
  double beta = 0.0;
  double cutoff = 0.0;       // travel cutoff K
  Vec<double> n0;            // initial counts, non-negative integers
  int steps = 1;             // number of transitions; snapshots = steps + 1
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticTruth {
  CountPanel<double> N;        // (steps + 1) x n, integer-valued
  FlowTensor<double> M_true;   // steps slices of realized moves
};

namespace detail {

/// Independent per-(step, region, purpose) random stream so draws do not
/// depend on evaluation order or thread count.
inline std::mt19937_64 stream(std::uint64_t seed, Index t, Index i, std::uint64_t purpose) {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = mix64(h ^ static_cast<std::uint64_t>(t));
  h = mix64(h ^ static_cast<std::uint64_t>(i));
  h = mix64(h ^ purpose);
  return std::mt19937_64(h);
}

/// Sequential conditional-binomial multinomial draw of `total` over `probs`.
inline std::vector<long long> multinomial(std::mt19937_64& rng, long long total,
                                          const std::vector<double>& probs) {
  std::vector<long long> out(probs.size(), 0);
  long long remaining = total;
  double mass_left = 1.0;
  for (std::size_t k = 0; k + 1 < probs.size() && remaining > 0; ++k) {
    const double p = std::clamp(mass_left > 0.0 ? probs[k] / mass_left : 1.0, 0.0, 1.0);
    std::binomial_distribution<long long> binom(remaining, p);
    const long long taken = binom(rng);
    out[k] = taken;
    remaining -= taken;
    mass_left -= probs[k];
  }
  if (!probs.empty()) out.back() += remaining;
  return out;
}

}  // namespace detail

/// Generate counts and realized flows by moving each region's population with
/// one multinomial draw per (step, region) over its destination set. When
/// noise_fraction is positive, each region's population is perturbed by a
/// rounded signed uniform amount of up to that fraction before it moves; the
/// recorded departing snapshot keeps the unperturbed counts while arrivals
/// define the next snapshot exactly.
inline SyntheticTruth simulate(const ScenarioSpec& spec) {
  const Index n = spec.regions.size();
  if (n < 1) throw InputError("simulate: scenario has no regions");
  if (spec.pi.size() != n || spec.s.size() != n || spec.n0.size() != n)
    throw InputError("simulate: parameter vectors must match the region count");
  if ((spec.pi.array() < 0.0).any() || (spec.pi.array() > 1.0).any())
    throw InputError("simulate: departure probabilities must lie in [0, 1]");
  if ((spec.n0.array() < 0.0).any() || !spec.n0.allFinite())
    throw InputError("simulate: initial counts must be non-negative");
  for (Index i = 0; i < n; ++i) {
    if (spec.n0[i] != std::floor(spec.n0[i]))
      throw InputError("simulate: initial counts must be integers");
  }
  if (spec.steps < 1) throw InputError("simulate: need at least one step");
  if (spec.noise_fraction < 0.0 || spec.noise_fraction >= 1.0)
    throw InputError("simulate: noise fraction must lie in [0, 1)");

  const Mat<double> d = build_distance_matrix(spec.regions);
  const NeighborSets gamma = neighbor_sets(d, spec.cutoff);
  ModelParams<double> params{spec.pi, spec.s, spec.beta};
  const Mat<double> theta = transition_matrix(params, d, gamma);  // rejects stranded departures

  SyntheticTruth truth;
  truth.N = CountPanel<double>::Zero(spec.steps + 1, n);
  truth.N.row(0) = spec.n0.transpose();
  truth.M_true.assign(static_cast<std::size_t>(spec.steps), Mat<double>::Zero(n, n));

  for (Index t = 0; t < spec.steps; ++t) {
    Mat<double>& Mt = truth.M_true[static_cast<std::size_t>(t)];
    Vec<double> arrivals = Vec<double>::Zero(n);
    for (Index i = 0; i < n; ++i) {
      long long pop = static_cast<long long>(truth.N(t, i));
      if (spec.noise_fraction > 0.0 && pop > 0) {
        auto rng = detail::stream(spec.seed, t, i, 0x9011);
        const double span = spec.noise_fraction * static_cast<double>(pop);
        std::uniform_real_distribution<double> wobble(-span, span);
        pop = std::max(0LL, pop + static_cast<long long>(std::llround(wobble(rng))));
      }
      if (pop == 0) continue;
      const auto& row = gamma.members[static_cast<std::size_t>(i)];
      std::vector<double> probs(row.size());
      for (std::size_t k = 0; k < row.size(); ++k) probs[k] = theta(i, row[k]);
      auto rng = detail::stream(spec.seed, t, i, 0x3ace);
      const std::vector<long long> moved = detail::multinomial(rng, pop, probs);
      for (std::size_t k = 0; k < row.size(); ++k) {
        Mt(i, row[k]) = static_cast<double>(moved[k]);
        arrivals[row[k]] += static_cast<double>(moved[k]);
      }
    }
    truth.N.row(t + 1) = arrivals.transpose();
  }
  return truth;
}

/// Nine regions on a unit-spaced 3x3 grid (outermost centers two units
/// apart), cutoff 2 and decay 1. The central region departs with probability
/// 0.1, the others draw theirs uniformly from [0.01, 0.02] using the seed;
/// gathering scores are 1 except the four corner cells at 2. One transition
/// of a million people per region.
inline ScenarioSpec make_benchmark_grid(std::uint64_t seed = 7) {
  ScenarioSpec spec;
  const Index n = 9;
  spec.regions.coords = Mat<double>(n, 2);
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < 3; ++c) {
      spec.regions.ids.push_back("cell_" + std::to_string(r) + std::to_string(c));
      spec.regions.coords(r * 3 + c, 0) = static_cast<double>(c);
      spec.regions.coords(r * 3 + c, 1) = static_cast<double>(r);
    }
  }
  spec.cutoff = 2.0;
  spec.beta = 1.0;
  spec.steps = 1;
  spec.seed = seed;
  spec.n0 = Vec<double>::Constant(n, 1e6);
  std::mt19937_64 rng(detail::mix64(seed ^ 0x5bd1e995ULL));
  std::uniform_real_distribution<double> low(0.01, 0.02);
  spec.pi.resize(n);
  for (Index i = 0; i < n; ++i) spec.pi[i] = low(rng);
  spec.pi[4] = 0.1;  // center of the grid
  spec.s = Vec<double>::Ones(n);
  for (Index i : {Index(0), Index(2), Index(6), Index(8)}) spec.s[i] = 2.0;
  return spec;
}

/// 15 x 15 cells spanning a 2 x 2 square with cutoff 1.5. Initial counts lay
/// nu people along a ring of radius 0.8 around the center, gathering scores
/// decay from the center, and departure probabilities scale with the initial
/// density peaking at 0.1.
inline ScenarioSpec make_benchmark_ring(double nu, int steps = 3, std::uint64_t seed = 7) {
  if (!(nu > 0)) throw InputError("make_benchmark_ring: nu must be positive");
  ScenarioSpec spec;
  const Index side = 15;
  const Index n = side * side;
  spec.regions.coords = Mat<double>(n, 2);
  Vec<double> density(n);
  for (Index r = 0; r < side; ++r) {
    for (Index c = 0; c < side; ++c) {
      const Index idx = r * side + c;
      const double x = -1.0 + 2.0 * static_cast<double>(c) / static_cast<double>(side - 1);
      const double y = -1.0 + 2.0 * static_cast<double>(r) / static_cast<double>(side - 1);
      spec.regions.ids.push_back("cell_" + std::to_string(r) + "_" + std::to_string(c));
      spec.regions.coords(idx, 0) = x;
      spec.regions.coords(idx, 1) = y;
      const double radius = std::sqrt(x * x + y * y);
      density[idx] = std::exp(-(radius - 0.8) * (radius - 0.8));
    }
  }
  spec.cutoff = 1.5;
  spec.beta = 1.0;
  spec.steps = steps;
  spec.seed = seed;
  spec.n0.resize(n);
  spec.pi.resize(n);
  spec.s.resize(n);
  const double peak = density.maxCoeff();
  for (Index i = 0; i < n; ++i) {
    spec.n0[i] = static_cast<double>(std::llround(nu * density[i]));
    spec.pi[i] = 0.1 * density[i] / peak;
    const double r2 = spec.regions.coords(i, 0) * spec.regions.coords(i, 0) +
                      spec.regions.coords(i, 1) * spec.regions.coords(i, 1);
    spec.s[i] = std::exp(-4.0 * r2);
  }
  return spec;
}

}  // namespace odflow
