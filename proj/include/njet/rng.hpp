#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "njet/common.hpp"

namespace njet {

// Deterministic random source. The raw generator is std::mt19937_64 (fully
// specified by the standard); the derived draws below are hand-rolled so
// streams are identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection-free modulo is fine here; the bias
  /// for n << 2^64 is far below anything observable.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

  /// Fisher-Yates shuffle with a fixed traversal order.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Fills coefficients in row-major traversal order.
  template <typename Derived>
  void fill_uniform(Eigen::DenseBase<Derived>& out, double lo, double hi) {
    for (Index r = 0; r < out.rows(); ++r)
      for (Index c = 0; c < out.cols(); ++c) out(r, c) = uniform(lo, hi);
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace njet
