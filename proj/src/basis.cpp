#include "njet/basis.hpp"

#include <cmath>

namespace njet {

int filter_size(double sigma, double extent_k) {
  require(sigma > 0.0, "filter_size: sigma must be positive");
  require(extent_k > 0.0, "filter_size: extent_k must be positive");
  return 2 * static_cast<int>(std::ceil(extent_k * sigma)) + 1;
}

std::vector<std::pair<int, int>> basis_index_map(int order) {
  require(order >= 0, "basis order must be non-negative");
  std::vector<std::pair<int, int>> map;
  map.reserve(static_cast<std::size_t>((order + 1) * (order + 2) / 2));
  for (int total = 0; total <= order; ++total)
    for (int i = 0; i <= total; ++i) map.emplace_back(i, total - i);
  return map;
}

BasisStack sample_basis(const BasisSpec& spec, const SampleOptions& opts) {
  require(spec.sigma > 0.0, "sample_basis: sigma must be positive");
  require(spec.extent_k > 0.0, "sample_basis: extent_k must be positive");
  require(spec.order >= 0, "sample_basis: order must be non-negative");

  int s = spec.size();
  if (opts.size_override > 0) {
    require(opts.size_override % 2 == 1, "sample_basis: size override must be odd");
    s = opts.size_override;
  } else if (s > opts.max_size) {
    throw SizeCapError(s, opts.max_size);
  }

  const int half = (s - 1) / 2;
  const int order = spec.order;
  const double sigma = spec.sigma;

  // 1D derivative tables up to order N+2; the sigma-derivative of G^m is
  // sigma * G^(m+2) (the Gaussian satisfies dG/dsigma = sigma d^2G/dx^2).
  std::vector<VectorXd> g(static_cast<std::size_t>(order) + 3);
  for (int m = 0; m <= order + 2; ++m) {
    VectorXd& col = g[static_cast<std::size_t>(m)];
    col.resize(s);
    for (int t = 0; t < s; ++t)
      col[t] = gauss_deriv_1d(m, static_cast<double>(t - half), sigma);
  }

  BasisStack stack;
  stack.spec = spec;
  stack.size = s;
  stack.index_map = basis_index_map(order);

  const Index m_count = static_cast<Index>(stack.index_map.size());
  stack.filters.resize(m_count, static_cast<Index>(s) * s);
  stack.dsigma.resize(m_count, static_cast<Index>(s) * s);

  for (Index m = 0; m < m_count; ++m) {
    const auto [i, j] = stack.index_map[static_cast<std::size_t>(m)];
    const VectorXd& gx = g[static_cast<std::size_t>(i)];
    const VectorXd& gy = g[static_cast<std::size_t>(j)];

    GridMap value(stack.filters.row(m).data(), s, s);
    GridMap deriv(stack.dsigma.row(m).data(), s, s);

    if (!opts.normalized) {
      value.noalias() = gy * gx.transpose();
      deriv.noalias() = sigma * (g[static_cast<std::size_t>(j)] * g[static_cast<std::size_t>(i + 2)].transpose() +
                                 g[static_cast<std::size_t>(j + 2)] * gx.transpose());
      continue;
    }

    // B = sigma^(i+j) G^i(x) G^j(y)
    // dB/dsigma = (i+j) sigma^(i+j-1) G^i G^j
    //           + sigma^(i+j+1) (G^(i+2) G^j + G^i G^(j+2))
    const int total = i + j;
    const double norm = std::pow(sigma, total);
    value.noalias() = norm * (gy * gx.transpose());
    deriv.noalias() =
        (total * std::pow(sigma, total - 1)) * (gy * gx.transpose()) +
        std::pow(sigma, total + 1) *
            (gy * g[static_cast<std::size_t>(i + 2)].transpose() +
             g[static_cast<std::size_t>(j + 2)] * gx.transpose());
  }
  return stack;
}

}  // namespace njet
