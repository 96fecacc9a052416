#pragma once

#include "njet/common.hpp"
#include "njet/nn/feature_map.hpp"

namespace njet {

enum class Padding { Same, Valid };

/// Cross-correlation of a filter bank with a batch of feature maps.
/// `filters` holds one vectorized s x s kernel per (out, in) pair, row
/// o * in_channels + c, matching SynthesizedFilters::filters. `Same` zero-pads
/// by (s-1)/2 on each side; `Valid` requires the filter to fit inside the input.
FeatureMap conv2d_forward(const FeatureMap& input, const RowMatrixXd& filters,
                          Index out_channels, Index in_channels, int size,
                          const VectorXd& bias, Padding padding);

struct Conv2dGrads {
  FeatureMap dinput;
  RowMatrixXd dfilters;  // same layout as `filters`
  VectorXd dbias;
};

/// Exact gradients of conv2d_forward with respect to input, filters, and bias.
Conv2dGrads conv2d_backward(const FeatureMap& upstream, const FeatureMap& input,
                            const RowMatrixXd& filters, Index out_channels,
                            Index in_channels, int size, Padding padding);

}  // namespace njet
