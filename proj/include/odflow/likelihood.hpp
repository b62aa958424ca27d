#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "odflow/numeric.hpp"
#include "odflow/types.hpp"

namespace odflow {

namespace detail {

template <class Scalar>
void validate_panel(const CountPanel<Scalar>& N) {
  if (N.rows() < 2) throw InputError("count panel needs at least two snapshots");
  if (N.cols() < 1) throw InputError("count panel needs at least one region");
  if (!N.allFinite() || (N.array() < Scalar(0)).any())
    throw InputError("count panel entries must be finite and non-negative");
}

template <class Scalar>
void validate_params(const ModelParams<Scalar>& params, Index n) {
  if (params.pi.size() != n || params.s.size() != n)
    throw InputError("model parameter vectors must match the region count");
  if (!params.pi.allFinite() || (params.pi.array() < Scalar(0)).any() ||
      (params.pi.array() >= Scalar(1)).any())
    throw InputError("departure probabilities must lie in [0, 1)");
  if (!params.s.allFinite() || (params.s.array() <= Scalar(0)).any())
    throw InputError("gathering scores must be positive");
  if (!std::isfinite(static_cast<double>(params.beta)))
    throw InputError("distance decay must be finite");
}

template <class Scalar>
void validate_flows(const FlowTensor<Scalar>& M, const NeighborSets& gamma, Index n,
                    Index steps) {
  if (static_cast<Index>(M.size()) != steps)
    throw InputError("flow tensor must have one slice per transition step");
  for (const auto& slice : M) {
    if (slice.rows() != n || slice.cols() != n)
      throw InputError("flow slices must be n x n");
    if (!slice.allFinite() || (slice.array() < Scalar(0)).any())
      throw InputError("flow entries must be finite and non-negative");
  }
  for (Index i = 0; i < n; ++i) {
    const auto& row = gamma.members[static_cast<std::size_t>(i)];
    std::size_t next = 0;
    for (Index j = 0; j < n; ++j) {
      if (next < row.size() && row[next] == j) {
        ++next;
        continue;
      }
      for (const auto& slice : M) {
        if (slice(i, j) != Scalar(0))
          throw InputError("flow tensor has mass on a structurally zero entry");
      }
    }
  }
}

}  // namespace detail

/// Log-domain coefficients of the flow likelihood for fixed parameters: the
/// per-region stay weight, the per-pair move weight, and the destination
/// normalizer each move weight divides by.
template <class Scalar = double>
struct TransitionCoeffs {
  Vec<Scalar> log_stay;  // log(1 - pi_i)
  Vec<Scalar> denom;     // sum over k in Gamma_i \ {i} of s_k exp(-beta d_ik); 0 if isolated
  Mat<Scalar> weight;    // log pi_i + log s_j - beta d_ij - log denom_i, on Gamma_i \ {i}
};

template <class Scalar = double>
TransitionCoeffs<Scalar> precompute_coeffs(const ModelParams<Scalar>& params,
                                           const Mat<Scalar>& d, const NeighborSets& gamma) {
  const Index n = d.rows();
  detail::validate_params(params, n);
  if (gamma.size() != n) throw InputError("neighbor sets must match the distance matrix");

  TransitionCoeffs<Scalar> coeffs;
  coeffs.log_stay.resize(n);
  coeffs.denom = Vec<Scalar>::Zero(n);
  coeffs.weight = Mat<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    coeffs.log_stay[i] = std::log(Scalar(1) - params.pi[i]);
    const auto& row = gamma.members[static_cast<std::size_t>(i)];
    if (row.size() <= 1) {
      if (params.pi[i] > Scalar(0))
        throw ModelError("region " + std::to_string(i) +
                         " departs with positive probability but has no destination");
      continue;
    }
    KahanSum<Scalar> denom;
    for (Index j : row) {
      if (j != i) denom.add(params.s[j] * std::exp(-params.beta * d(i, j)));
    }
    coeffs.denom[i] = denom.value();
    const Scalar log_pi = std::log(params.pi[i]);
    const Scalar log_denom = std::log(coeffs.denom[i]);
    for (Index j : row) {
      if (j != i)
        coeffs.weight(i, j) = log_pi + std::log(params.s[j]) - params.beta * d(i, j) - log_denom;
    }
  }
  return coeffs;
}

/// Single-step transition probabilities: stay with 1 - pi_i, otherwise move to
/// a destination in Gamma_i \ {i} with probability proportional to
/// s_j exp(-beta d_ij). Zero outside Gamma_i. Rows sum to one.
template <class Scalar = double>
Mat<Scalar> transition_matrix(const ModelParams<Scalar>& params, const Mat<Scalar>& d,
                              const NeighborSets& gamma) {
  const Index n = d.rows();
  if (params.pi.size() != n || params.s.size() != n)
    throw InputError("model parameter vectors must match the region count");
  if (!params.pi.allFinite() || (params.pi.array() < Scalar(0)).any() ||
      (params.pi.array() > Scalar(1)).any())
    throw InputError("departure probabilities must lie in [0, 1]");
  if (!params.s.allFinite() || (params.s.array() <= Scalar(0)).any())
    throw InputError("gathering scores must be positive");
  if (gamma.size() != n) throw InputError("neighbor sets must match the distance matrix");

  Mat<Scalar> theta = Mat<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = gamma.members[static_cast<std::size_t>(i)];
    theta(i, i) = Scalar(1) - params.pi[i];
    if (row.size() <= 1) {
      if (params.pi[i] > Scalar(0))
        throw ModelError("region " + std::to_string(i) +
                         " departs with positive probability but has no destination");
      continue;
    }
    KahanSum<Scalar> denom;
    for (Index j : row) {
      if (j != i) denom.add(params.s[j] * std::exp(-params.beta * d(i, j)));
    }
    for (Index j : row) {
      if (j != i)
        theta(i, j) = params.pi[i] * params.s[j] * std::exp(-params.beta * d(i, j)) / denom.value();
    }
  }
  return theta;
}

/// Penalized log likelihood of a flow tensor under the model, split into its
/// additive parts. Active flow entries are floored at kMinFlow inside logs;
/// exact zeros contribute zero to the entropy term (the x log x limit).
/// The conservation penalty C compares full row sums with the departing
/// snapshot and full column sums with the arriving snapshot.
template <class Scalar = double>
LikelihoodBreakdown<Scalar> exact_loglik(const FlowTensor<Scalar>& M,
                                         const ModelParams<Scalar>& params,
                                         const CountPanel<Scalar>& N, Scalar lambda,
                                         const Mat<Scalar>& d, const NeighborSets& gamma) {
  detail::validate_panel(N);
  const Index n = N.cols();
  const Index steps = N.rows() - 1;
  if (d.rows() != n || d.cols() != n) throw InputError("distance matrix must be n x n");
  detail::validate_flows(M, gamma, n, steps);
  const TransitionCoeffs<Scalar> coeffs = precompute_coeffs(params, d, gamma);

  const Scalar floor = Scalar(kMinFlow);
  KahanSum<Scalar> L0, L1, L2, C;
  for (Index t = 0; t < steps; ++t) {
    const Mat<Scalar>& Mt = M[static_cast<std::size_t>(t)];
    for (Index i = 0; i < n; ++i) {
      L0.add(coeffs.log_stay[i] * Mt(i, i));
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        const Scalar m = Mt(i, j);
        if (m == Scalar(0)) continue;
        const Scalar mf = std::max(m, floor);
        if (j != i) L1.add(coeffs.weight(i, j) * m);
        L2.add(mf * (Scalar(1) - std::log(mf)));
      }
    }
    const Vec<Scalar> row_gap = N.row(t).transpose() - Mt.rowwise().sum();
    const Vec<Scalar> col_gap = N.row(t + 1).transpose() - Mt.colwise().sum().transpose();
    for (Index i = 0; i < n; ++i) {
      C.add(row_gap[i] * row_gap[i]);
      C.add(col_gap[i] * col_gap[i]);
    }
  }

  LikelihoodBreakdown<Scalar> out;
  out.L0 = L0.value();
  out.L1 = L1.value();
  out.L2 = L2.value();
  out.C = C.value();
  out.total = out.L0 + out.L1 + out.L2 - lambda / Scalar(2) * out.C;
  return out;
}

/// Gradient of the penalized log likelihood with respect to each flow entry;
/// zero at structural zeros. Entries below the floor differentiate as if at
/// the floor.
template <class Scalar = double>
FlowTensor<Scalar> exact_grad_M(const FlowTensor<Scalar>& M, const ModelParams<Scalar>& params,
                                const CountPanel<Scalar>& N, Scalar lambda, const Mat<Scalar>& d,
                                const NeighborSets& gamma) {
  detail::validate_panel(N);
  const Index n = N.cols();
  const Index steps = N.rows() - 1;
  if (d.rows() != n || d.cols() != n) throw InputError("distance matrix must be n x n");
  detail::validate_flows(M, gamma, n, steps);
  const TransitionCoeffs<Scalar> coeffs = precompute_coeffs(params, d, gamma);

  const Scalar floor = Scalar(kMinFlow);
  FlowTensor<Scalar> grad(static_cast<std::size_t>(steps));
  for (Index t = 0; t < steps; ++t) {
    const Mat<Scalar>& Mt = M[static_cast<std::size_t>(t)];
    Mat<Scalar>& Gt = grad[static_cast<std::size_t>(t)];
    Gt = Mat<Scalar>::Zero(n, n);
    const Vec<Scalar> row_gap = N.row(t).transpose() - Mt.rowwise().sum();
    const Vec<Scalar> col_gap = N.row(t + 1).transpose() - Mt.colwise().sum().transpose();
    for (Index i = 0; i < n; ++i) {
      for (Index j : gamma.members[static_cast<std::size_t>(i)]) {
        const Scalar mf = std::max(Mt(i, j), floor);
        const Scalar model_part = (j == i) ? coeffs.log_stay[i] : coeffs.weight(i, j);
        Gt(i, j) = model_part - std::log(mf) + lambda * (row_gap[i] + col_gap[j]);
      }
    }
  }
  return grad;
}

}  // namespace odflow
