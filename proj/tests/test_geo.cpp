#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "odflow/geo.hpp"

using namespace odflow;

namespace {

RegionSet unit_grid3() {
  RegionSet regions;
  regions.coords.resize(9, 2);
  for (Index r = 0; r < 3; ++r) {
    for (Index c = 0; c < 3; ++c) {
      regions.ids.push_back("g" + std::to_string(r) + std::to_string(c));
      regions.coords(r * 3 + c, 0) = static_cast<double>(c);
      regions.coords(r * 3 + c, 1) = static_cast<double>(r);
    }
  }
  return regions;
}

bool contains(const NeighborSets& gamma, Index i, Index j) {
  const auto& row = gamma.members[static_cast<std::size_t>(i)];
  return std::find(row.begin(), row.end(), j) != row.end();
}

}  // namespace

TEST_CASE("single region yields a 1x1 zero matrix") {
  RegionSet one;
  one.ids = {"only"};
  one.coords.resize(1, 2);
  one.coords << 0.0, 0.0;
  const Mat<double> d = build_distance_matrix(one);
  REQUIRE(d.rows() == 1);
  CHECK(d(0, 0) == 0.0);
}

TEST_CASE("3-4-5 triangle distance") {
  RegionSet two;
  two.ids = {"a", "b"};
  two.coords.resize(2, 2);
  two.coords << 0.0, 0.0, 3.0, 4.0;
  const Mat<double> d = build_distance_matrix(two);
  CHECK(d(0, 1) == doctest::Approx(5.0));
  CHECK(d(1, 0) == doctest::Approx(5.0));
  CHECK(d(0, 0) == 0.0);
  CHECK(d(1, 1) == 0.0);
}

TEST_CASE("distance matrix is symmetric with zero diagonal") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  CHECK(is_symmetric(d));
  for (Index i = 0; i < 9; ++i) CHECK(d(i, i) == 0.0);
  // corner-to-corner across the diagonal of the unit-spaced grid
  CHECK(d(0, 8) == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("non-finite coordinates are rejected") {
  RegionSet bad;
  bad.ids = {"a", "b"};
  bad.coords.resize(2, 2);
  bad.coords << 0.0, 0.0, std::numeric_limits<double>::quiet_NaN(), 1.0;
  CHECK_THROWS_AS(build_distance_matrix(bad), InputError);
}

TEST_CASE("cutoff covering the whole span makes every set complete") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  const NeighborSets gamma = neighbor_sets(d, 10.0);
  for (Index i = 0; i < 9; ++i) CHECK(gamma.degree(i) == 9);
}

TEST_CASE("zero cutoff keeps only the region itself") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  const NeighborSets gamma = neighbor_sets(d, 0.0);
  for (Index i = 0; i < 9; ++i) {
    REQUIRE(gamma.degree(i) == 1);
    CHECK(gamma.members[static_cast<std::size_t>(i)][0] == i);
  }
}

TEST_CASE("negative cutoff is rejected") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  CHECK_THROWS_AS(neighbor_sets(d, -1.0), InputError);
}

TEST_CASE("unit grid at cutoff 2 excludes exactly the pairs beyond it") {
  // Indices: row-major, corners {0, 2, 6, 8}, center 4. Between corners the
  // diagonal pairs sit at 2*sqrt(2) and the corner-to-far-edge pairs at
  // sqrt(5); both exceed 2 and drop out. Straight-line corner pairs at
  // exactly 2.0 are ties and stay in.
  const Mat<double> d = build_distance_matrix(unit_grid3());
  const NeighborSets gamma = neighbor_sets(d, 2.0);

  CHECK_FALSE(contains(gamma, 0, 8));
  CHECK_FALSE(contains(gamma, 2, 6));
  CHECK_FALSE(contains(gamma, 0, 5));  // (0,0) -> (2,1): sqrt(5)
  CHECK_FALSE(contains(gamma, 0, 7));  // (0,0) -> (1,2): sqrt(5)
  CHECK(contains(gamma, 0, 2));        // distance exactly 2: tie included
  CHECK(contains(gamma, 0, 6));
  CHECK(contains(gamma, 0, 4));        // sqrt(2)

  // Degrees: corners lose the opposite corner and two sqrt(5) cells; edge
  // midpoints lose the two sqrt(5) corners; the center reaches everyone.
  for (Index corner : {Index(0), Index(2), Index(6), Index(8)}) CHECK(gamma.degree(corner) == 6);
  for (Index edge : {Index(1), Index(3), Index(5), Index(7)}) CHECK(gamma.degree(edge) == 7);
  CHECK(gamma.degree(4) == 9);
}

TEST_CASE("self membership holds for every cutoff") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  for (double cutoff : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    const NeighborSets gamma = neighbor_sets(d, cutoff);
    for (Index i = 0; i < 9; ++i) CHECK(contains(gamma, i, i));
  }
}

TEST_CASE("neighbor relation is symmetric for symmetric distances") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  const NeighborSets gamma = neighbor_sets(d, 1.5);
  for (Index i = 0; i < 9; ++i) {
    for (Index j = 0; j < 9; ++j) {
      CHECK(contains(gamma, i, j) == contains(gamma, j, i));
    }
  }
}

TEST_CASE("shrinking the cutoff never adds members") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  const std::vector<double> cutoffs = {3.0, 2.0, 1.5, 1.0, 0.5, 0.0};
  for (std::size_t k = 1; k < cutoffs.size(); ++k) {
    const NeighborSets wide = neighbor_sets(d, cutoffs[k - 1]);
    const NeighborSets narrow = neighbor_sets(d, cutoffs[k]);
    for (Index i = 0; i < 9; ++i) {
      for (Index j : narrow.members[static_cast<std::size_t>(i)]) {
        CHECK(contains(wide, i, j));
      }
    }
  }
}

TEST_CASE("member lists are sorted ascending") {
  const Mat<double> d = build_distance_matrix(unit_grid3());
  const NeighborSets gamma = neighbor_sets(d, 2.0);
  for (Index i = 0; i < 9; ++i) {
    const auto& row = gamma.members[static_cast<std::size_t>(i)];
    CHECK(std::is_sorted(row.begin(), row.end()));
  }
}

TEST_CASE("mean positive distance ignores the diagonal") {
  RegionSet two;
  two.ids = {"a", "b"};
  two.coords.resize(2, 2);
  two.coords << 0.0, 0.0, 2.0, 0.0;
  const Mat<double> d = build_distance_matrix(two);
  CHECK(mean_positive_distance(d) == doctest::Approx(2.0));
  CHECK(max_distance(d) == doctest::Approx(2.0));

  const Mat<double> lone = Mat<double>::Zero(1, 1);
  CHECK(mean_positive_distance(lone) == 0.0);
}

TEST_CASE("symmetry check tolerates rounding but flags real gaps") {
  Mat<double> d(2, 2);
  d << 0.0, 1.0, 1.0 + 1e-12, 0.0;
  CHECK(is_symmetric(d));
  d(1, 0) = 1.1;
  CHECK_FALSE(is_symmetric(d));
}
