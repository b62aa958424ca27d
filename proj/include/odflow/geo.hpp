#pragma once

#include <algorithm>
#include <cmath>

#include "odflow/types.hpp"

namespace odflow {

/// Dense symmetric matrix of Euclidean distances between coordinate rows.
template <class Scalar = double>
Mat<Scalar> pairwise_distances(const Mat<Scalar>& coords) {
  if (coords.rows() < 1) throw InputError("pairwise_distances: no points");
  if (!coords.allFinite()) throw InputError("pairwise_distances: non-finite coordinate");
  const Index n = coords.rows();
  Mat<Scalar> d = Mat<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const Scalar dist = (coords.row(i) - coords.row(j)).norm();
      d(i, j) = dist;
      d(j, i) = dist;
    }
  }
  return d;
}

inline Mat<double> build_distance_matrix(const RegionSet& regions) {
  if (regions.size() < 1) throw InputError("build_distance_matrix: empty region set");
  if (regions.coords.rows() != regions.size() || regions.coords.cols() != 2)
    throw InputError("build_distance_matrix: coords must be n x 2 and match ids");
  return pairwise_distances<double>(regions.coords);
}

/// Destination sets Gamma_i = { j : d_ij <= cutoff }. Ties at the cutoff are
/// included and i itself always qualifies (d_ii = 0).
template <class Scalar = double>
NeighborSets neighbor_sets(const Mat<Scalar>& d, Scalar cutoff) {
  if (d.rows() != d.cols() || d.rows() < 1)
    throw InputError("neighbor_sets: distance matrix must be square and non-empty");
  if (!(cutoff >= Scalar(0))) throw InputError("neighbor_sets: cutoff must be >= 0");
  const Index n = d.rows();
  NeighborSets gamma;
  gamma.members.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& row = gamma.members[static_cast<std::size_t>(i)];
    for (Index j = 0; j < n; ++j) {
      if (d(i, j) <= cutoff || j == i) row.push_back(j);
    }
  }
  return gamma;
}

template <class Scalar = double>
Scalar max_distance(const Mat<Scalar>& d) {
  return d.maxCoeff();
}

/// Mean of the strictly positive entries; zero when there are none.
template <class Scalar = double>
Scalar mean_positive_distance(const Mat<Scalar>& d) {
  Scalar sum = 0;
  Index count = 0;
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < d.cols(); ++j) {
      if (d(i, j) > Scalar(0)) {
        sum += d(i, j);
        ++count;
      }
    }
  }
  return count > 0 ? sum / Scalar(count) : Scalar(0);
}

template <class Scalar = double>
bool is_symmetric(const Mat<Scalar>& d, Scalar tol = Scalar(1e-9)) {
  if (d.rows() != d.cols()) return false;
  const Scalar scale = std::max(Scalar(1), d.template lpNorm<Eigen::Infinity>());
  return (d - d.transpose()).template lpNorm<Eigen::Infinity>() <= tol * scale;
}

}  // namespace odflow
