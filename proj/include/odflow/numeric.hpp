#pragma once

#include <cmath>
#include <cstdint>

namespace odflow {

namespace detail {

/// 64-bit finalizer-style mixer; used to derive hashes and per-stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Neumaier-compensated accumulator; keeps long mixed-magnitude sums stable and
/// independent of how terms would be partitioned.
template <class Scalar = double>
class KahanSum {
 public:
  void add(Scalar v) {
    const Scalar t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }

  Scalar value() const { return sum_ + comp_; }

 private:
  Scalar sum_{0};
  Scalar comp_{0};
};

}  // namespace odflow
