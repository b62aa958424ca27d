#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "odflow/types.hpp"

namespace odflow {

enum class ScaleRule { LambdaOverC, LambdaOverC2 };

struct ScalePlan {
  double c = 1.0;
  double lambda_original = 0.0;
  double lambda_scaled = 0.0;
};

/// Pick the smallest power-of-ten factor c >= 1 that lifts every
/// count-difference heuristic flow (|N_t - N_{t+1}| spread over the outgoing
/// neighbors) to at least target_min_flow, and compensate the penalty weight
/// accordingly. Regions with no neighbors or no count change put no demand on
/// the factor.
template <class Scalar = double>
ScalePlan plan_scaling(const CountPanel<Scalar>& N, const NeighborSets& gamma,
                       double target_min_flow, double lambda,
                       ScaleRule rule = ScaleRule::LambdaOverC) {
  if (!(target_min_flow >= 1.0)) throw InputError("plan_scaling: target flow must be >= 1");
  if (N.rows() < 2 || N.cols() != gamma.size())
    throw InputError("plan_scaling: panel and neighbor sets disagree");

  double smallest = std::numeric_limits<double>::infinity();
  for (Index t = 0; t + 1 < N.rows(); ++t) {
    for (Index i = 0; i < N.cols(); ++i) {
      const double change = std::abs(static_cast<double>(N(t, i) - N(t + 1, i)));
      const Index k = gamma.degree(i) - 1;
      if (k == 0 || change == 0.0) continue;
      smallest = std::min(smallest, change / static_cast<double>(k));
    }
  }

  ScalePlan plan;
  plan.lambda_original = lambda;
  plan.c = 1.0;
  if (std::isfinite(smallest)) {
    while (plan.c * smallest < target_min_flow * (1.0 - 1e-12)) plan.c *= 10.0;
  }
  plan.lambda_scaled =
      rule == ScaleRule::LambdaOverC ? lambda / plan.c : lambda / (plan.c * plan.c);
  return plan;
}

template <class Scalar = double>
CountPanel<Scalar> apply_scaling(const CountPanel<Scalar>& N, const ScalePlan& plan) {
  return N * Scalar(plan.c);
}

/// Map flows fitted on scaled counts back to the original count scale.
template <class Scalar = double>
FlowTensor<Scalar> descale_flows(const FlowTensor<Scalar>& M, const ScalePlan& plan) {
  FlowTensor<Scalar> out = M;
  for (auto& slice : out) slice /= Scalar(plan.c);
  return out;
}

}  // namespace odflow
