#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "njet/common.hpp"

namespace njet {

/// Physicists' Hermite polynomial H_m(x), evaluated by the two-term
/// recursion H_i(x) = 2x H_{i-1}(x) - 2(i-1) H_{i-2}(x).
template <typename Scalar>
Scalar hermite(int m, Scalar x) {
  Scalar prev = Scalar(1);  // H_0
  if (m == 0) return prev;
  Scalar cur = Scalar(2) * x;  // H_1
  for (int i = 2; i <= m; ++i) {
    Scalar next = Scalar(2) * x * cur - Scalar(2 * (i - 1)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// 1D Gaussian at scale sigma: G(x; sigma) = exp(-x^2 / 2 sigma^2) / (sigma sqrt(2 pi)).
template <typename Scalar>
Scalar gauss_1d(Scalar x, Scalar sigma) {
  const Scalar inv = Scalar(1) / sigma;
  return inv * Scalar(0.3989422804014326779) * std::exp(Scalar(-0.5) * x * x * inv * inv);
}

/// m-th derivative of the 1D Gaussian:
/// G^m(x; sigma) = (-1 / (sigma sqrt 2))^m H_m(x / (sigma sqrt 2)) G(x; sigma).
template <typename Scalar>
Scalar gauss_deriv_1d(int m, Scalar x, Scalar sigma) {
  const Scalar sqrt2 = Scalar(1.4142135623730950488);
  const Scalar u = x / (sigma * sqrt2);
  Scalar scale = Scalar(1);
  for (int i = 0; i < m; ++i) scale *= Scalar(-1) / (sigma * sqrt2);
  return scale * hermite(m, u) * gauss_1d(x, sigma);
}

/// Filter size rule s = 2 ceil(k sigma) + 1; always odd, >= 3 for k sigma > 0.
int filter_size(double sigma, double extent_k);

/// Order, scale and spatial extent; fully determines a discretized basis stack.
struct BasisSpec {
  int order = 3;          // max total derivative order N
  double sigma = 1.0;     // scale in pixels
  double extent_k = 2.0;  // truncation factor

  int size() const { return filter_size(sigma, extent_k); }
  /// Number of basis filters M = (N+1)(N+2)/2.
  int count() const { return (order + 1) * (order + 2) / 2; }
};

struct SampleOptions {
  int max_size = 63;     // hard cap on the derived filter size
  int size_override = 0; // when > 0, sample on this (odd) grid instead of the derived one
  bool normalized = true;  // multiply order-(i+j) filters by sigma^(i+j)
};

/// Discretized 2D Gaussian derivative basis together with the analytic
/// derivative of every sample with respect to sigma.
///
/// Storage is one vectorized filter per row; entry (y, x) of filter m lives at
/// filters(m, y * size + x) with the grid centered on zero.
struct BasisStack {
  BasisSpec spec;
  int size = 0;
  std::vector<std::pair<int, int>> index_map;  // (i, j) with i + j <= N
  RowMatrixXd filters;  // M x (size * size)
  RowMatrixXd dsigma;   // M x (size * size)

  Index count() const { return filters.rows(); }
  ConstGridMap filter(Index m) const {
    return ConstGridMap(filters.row(m).data(), size, size);
  }
  ConstGridMap dsigma_filter(Index m) const {
    return ConstGridMap(dsigma.row(m).data(), size, size);
  }
};

/// Derivative-order pairs in fixed order: ascending i + j, ties by ascending i.
std::vector<std::pair<int, int>> basis_index_map(int order);

/// Samples the scale-normalized basis sigma^(i+j) G^i(x; sigma) G^j(y; sigma)
/// on the integer grid [-(s-1)/2, (s-1)/2]^2, together with its exact partial
/// derivative with respect to sigma at fixed grid positions.
///
/// Throws SizeCapError when the derived size exceeds opts.max_size.
BasisStack sample_basis(const BasisSpec& spec, const SampleOptions& opts = {});

}  // namespace njet
