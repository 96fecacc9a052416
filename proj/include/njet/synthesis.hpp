#pragma once

#include "njet/basis.hpp"
#include "njet/common.hpp"

namespace njet {

/// Mixing coefficients for a bank of synthesized filters.
/// Row o * in_channels + c holds the M coefficients of filter (o, c).
struct AlphaTensor {
  Index out_channels = 0;
  Index in_channels = 0;
  RowMatrixXd values;  // (out_channels * in_channels) x M

  Index count() const { return values.cols(); }
  double& at(Index o, Index c, Index m) { return values(o * in_channels + c, m); }
  double at(Index o, Index c, Index m) const { return values(o * in_channels + c, m); }
};

/// Effective convolution filters F = sum_m alpha_m B_m together with dF/dsigma.
/// Same row layout as AlphaTensor; one vectorized s x s filter per row.
struct SynthesizedFilters {
  Index out_channels = 0;
  Index in_channels = 0;
  int size = 0;
  RowMatrixXd filters;          // (out * in) x (s * s)
  RowMatrixXd dfilters_dsigma;  // (out * in) x (s * s)

  ConstGridMap filter(Index o, Index c) const {
    return ConstGridMap(filters.row(o * in_channels + c).data(), size, size);
  }
};

/// Weighted sums of the basis filters; a single matrix product per field.
SynthesizedFilters synthesize(const AlphaTensor& alphas, const BasisStack& basis);

/// Adjoint of synthesize: entry (o, c, m) = <upstream(o, c), basis filter m>.
/// `upstream` has one vectorized s x s gradient per row, matching
/// SynthesizedFilters::filters.
RowMatrixXd grad_alpha(const RowMatrixXd& upstream, const BasisStack& basis);

/// Scalar dJ/dsigma = <upstream, dF/dsigma>, summed over all filters because
/// sigma is shared per layer.
double grad_sigma(const RowMatrixXd& upstream, const SynthesizedFilters& synthesized);

}  // namespace njet
