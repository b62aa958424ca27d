#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace odflow {

using Index = Eigen::Index;

template <class Scalar = double>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar = double>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Snapshot counts: one row per snapshot, one column per region.
template <class Scalar = double>
using CountPanel = Mat<Scalar>;

/// Per-step flow matrices; entry (i, j) of slice t is the flow i -> j between
/// snapshots t and t+1. Entries outside the neighbor sets are structural zeros.
template <class Scalar = double>
using FlowTensor = std::vector<Mat<Scalar>>;

/// Flow variables are kept at or above this floor inside likelihood and
/// gradient evaluations, and it is the optimizer's lower bound for them.
inline constexpr double kMinFlow = 1e-12;

struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Region identifiers plus planar centroid coordinates (n x 2, same order as ids).
struct RegionSet {
  std::vector<std::string> ids;
  Mat<double> coords;

  Index size() const { return static_cast<Index>(ids.size()); }
};

/// Reachable destination sets under the travel cutoff. members[i] is sorted and
/// always contains i itself.
struct NeighborSets {
  std::vector<std::vector<Index>> members;

  Index size() const { return static_cast<Index>(members.size()); }
  Index degree(Index i) const { return static_cast<Index>(members[i].size()); }
};

template <class Scalar = double>
struct ModelParams {
  Vec<Scalar> pi;  // per-region departure probability, in [0, 1)
  Vec<Scalar> s;   // per-region gathering score, positive; max-normalized by updates
  Scalar beta{};   // distance decay rate
};

/// Additive pieces of the penalized log likelihood.
/// total = L0 + L1 + L2 - lambda/2 * C.
template <class Scalar = double>
struct LikelihoodBreakdown {
  Scalar L0{};     // stay terms
  Scalar L1{};     // move terms
  Scalar L2{};     // entropy-like flow terms
  Scalar C{};      // squared conservation violations (both marginals)
  Scalar total{};
};

struct BetaBounds {
  double lo = 0.0;
  double hi = 0.0;
};

struct SolverConfig {
  double cutoff = 0.0;   // travel cutoff K, used when geometry is built from a RegionSet
  double lambda = 10.0;  // conservation penalty weight
  double epsilon = 1e-4; // outer-loop relative likelihood change threshold
  std::optional<BetaBounds> beta_bounds;  // defaults to [-10, 50] / (mean positive distance)
  int max_outer = 200;

  // (s, beta) inner loop
  double sbeta_tol = 1e-6;
  int sbeta_max_iter = 500;
  int cycle_window = 50;
  double brent_rel_tol = 1e-6;  // beta line-search x-tolerance relative to the bound width

  // box-constrained flow maximization
  double flow_floor = kMinFlow;
  int lbfgs_history = 10;
  double lbfgs_pg_tol = 1e-6;
  double lbfgs_rel_f_tol = 1e-9;
  int lbfgs_max_iter = 2000;

  // approximate solver inner loop
  double approx_inner_tol = 1e-5;
  int approx_max_inner = 100;
  std::uint64_t seed = 0;  // seeds the approximate solver's small off-diagonal initials
};

enum class InitKind { Static, StaticJittered, Moving };

struct InitStrategy {
  InitKind kind = InitKind::Static;
  std::optional<std::uint64_t> seed;  // required for StaticJittered
};

enum class FitTermination { Converged, MaxOuterIterations };

template <class Scalar = double>
struct FitResult {
  FlowTensor<Scalar> M;
  ModelParams<Scalar> params;
  std::vector<LikelihoodBreakdown<Scalar>> trace;  // entry 0 is the initial state
  FitTermination termination = FitTermination::MaxOuterIterations;
  int outer_iterations = 0;
  int cycle_retries = 0;  // (s, beta) closed-loop events
  std::vector<double> round_changes;  // approximate solver: per-round flow change metric
  std::vector<double> round_errors;   // approximate solver: per-round error vs truth when supplied
  std::vector<std::string> warnings;
};

}  // namespace odflow
