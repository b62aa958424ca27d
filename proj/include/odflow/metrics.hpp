#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "odflow/numeric.hpp"
#include "odflow/types.hpp"

namespace odflow {

namespace detail {

template <class Scalar>
void require_same_shape(const FlowTensor<Scalar>& a, const FlowTensor<Scalar>& b) {
  if (a.size() != b.size() || a.empty())
    throw InputError("flow tensors must be non-empty and cover the same steps");
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].rows() != b[t].rows() || a[t].cols() != b[t].cols())
      throw InputError("flow tensors must have matching shapes");
  }
}

}  // namespace detail

/// Normalized absolute error: sum of absolute entry differences over the total
/// true mass. Entries are compared densely; structural zeros agree at zero.
template <class Scalar = double>
Scalar nae(const FlowTensor<Scalar>& estimate, const FlowTensor<Scalar>& truth) {
  detail::require_same_shape(estimate, truth);
  KahanSum<Scalar> gap, mass;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (Index i = 0; i < truth[t].rows(); ++i) {
      for (Index j = 0; j < truth[t].cols(); ++j) {
        gap.add(std::abs(estimate[t](i, j) - truth[t](i, j)));
        mass.add(truth[t](i, j));
      }
    }
  }
  if (!(mass.value() > Scalar(0))) throw InputError("nae: true flows carry no mass");
  return gap.value() / mass.value();
}

/// Normalized absolute error restricted to origin != destination entries.
template <class Scalar = double>
Scalar offdiag_nae(const FlowTensor<Scalar>& estimate, const FlowTensor<Scalar>& truth) {
  detail::require_same_shape(estimate, truth);
  KahanSum<Scalar> gap, mass;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    for (Index i = 0; i < truth[t].rows(); ++i) {
      for (Index j = 0; j < truth[t].cols(); ++j) {
        if (i == j) continue;
        gap.add(std::abs(estimate[t](i, j) - truth[t](i, j)));
        mass.add(truth[t](i, j));
      }
    }
  }
  if (!(mass.value() > Scalar(0)))
    throw InputError("offdiag_nae: true off-diagonal flows carry no mass");
  return gap.value() / mass.value();
}

/// Per-entry spread across repeated runs. Entries whose mean is essentially
/// zero are counted separately instead of producing meaningless ratios.
struct StabilityReport {
  FlowTensor<double> mean;
  FlowTensor<double> stddev;          // population standard deviation
  std::vector<double> ratios;         // std/mean for entries with mean >= 1e-9
  std::size_t near_zero_entries = 0;  // entries with mean below 1e-9
  double fraction_below_one = 0.0;    // share of ratios under 1
};

inline StabilityReport stability_report(const std::vector<FlowTensor<double>>& runs) {
  if (runs.size() < 2) throw InputError("stability_report: need at least two runs");
  for (std::size_t r = 1; r < runs.size(); ++r) detail::require_same_shape(runs[r], runs[0]);

  const double floor = 1e-9;
  const auto steps = runs[0].size();
  StabilityReport report;
  report.mean.assign(steps, Mat<double>());
  report.stddev.assign(steps, Mat<double>());
  std::size_t below = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const Index rows = runs[0][t].rows();
    const Index cols = runs[0][t].cols();
    report.mean[t] = Mat<double>::Zero(rows, cols);
    report.stddev[t] = Mat<double>::Zero(rows, cols);
    for (const auto& run : runs) report.mean[t] += run[t];
    report.mean[t] /= static_cast<double>(runs.size());
    for (const auto& run : runs) {
      report.stddev[t].array() += (run[t] - report.mean[t]).array().square();
    }
    report.stddev[t] = (report.stddev[t] / static_cast<double>(runs.size())).cwiseSqrt();
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (report.mean[t](i, j) < floor) {
          ++report.near_zero_entries;
        } else {
          const double ratio = report.stddev[t](i, j) / report.mean[t](i, j);
          report.ratios.push_back(ratio);
          if (ratio < 1.0) ++below;
        }
      }
    }
  }
  report.fraction_below_one =
      report.ratios.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(report.ratios.size());
  return report;
}

/// Fixed-width histogram of non-negative values over [0, hi); the final count
/// collects everything at or above hi.
struct Histogram {
  std::vector<double> edges;   // nbins + 1 ascending edges
  std::vector<long> counts;    // nbins + 1, last entry is the overflow bucket
};

inline Histogram histogram(const std::vector<double>& values, double hi = 2.0, int nbins = 40) {
  if (!(hi > 0.0) || nbins < 1) throw InputError("histogram: bad binning");
  Histogram h;
  h.edges.resize(static_cast<std::size_t>(nbins) + 1);
  for (int b = 0; b <= nbins; ++b)
    h.edges[static_cast<std::size_t>(b)] = hi * static_cast<double>(b) / nbins;
  h.counts.assign(static_cast<std::size_t>(nbins) + 1, 0);
  for (double v : values) {
    if (v >= hi) {
      ++h.counts.back();
    } else {
      const int b = std::max(0, std::min(nbins - 1, static_cast<int>(v / hi * nbins)));
      ++h.counts[static_cast<std::size_t>(b)];
    }
  }
  return h;
}

/// Total off-diagonal mass leaving and entering each region over the step
/// window [t_begin, t_end).
struct InOutSummary {
  Vec<double> outbound;
  Vec<double> inbound;
};

template <class Scalar = double>
InOutSummary aggregate_inout(const FlowTensor<Scalar>& M, Index t_begin, Index t_end) {
  if (M.empty()) throw InputError("aggregate_inout: empty flow tensor");
  if (t_begin < 0 || t_end > static_cast<Index>(M.size()) || t_begin >= t_end)
    throw InputError("aggregate_inout: empty or out-of-range step window");
  const Index n = M[0].rows();
  InOutSummary summary;
  summary.outbound = Vec<double>::Zero(n);
  summary.inbound = Vec<double>::Zero(n);
  for (Index t = t_begin; t < t_end; ++t) {
    const auto& Mt = M[static_cast<std::size_t>(t)];
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        summary.outbound[i] += static_cast<double>(Mt(i, j));
        summary.inbound[j] += static_cast<double>(Mt(i, j));
      }
    }
  }
  return summary;
}

}  // namespace odflow
