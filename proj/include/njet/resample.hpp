#pragma once

#include "njet/common.hpp"
#include "njet/nn/feature_map.hpp"

namespace njet {

/// Safe-subsampling hyper-parameter r.
struct SubsampleRule {
  double r = 4.0;
};

/// Target size after safe-subsampling: max(1, round(s * (1/2)^(sigma / r))).
/// A large learned sigma means the map carries no high-frequency content and
/// can shrink without loss.
int safe_size(int s, double sigma, const SubsampleRule& rule);

/// Area-averaging resample to target_h x target_w (targets no larger than the
/// source). Each output pixel is the mean of its source rectangle, with
/// fractional overlap weights; preserves the per-channel mean exactly when the
/// dimensions divide evenly.
FeatureMap downsample(const FeatureMap& map, int target_h, int target_w);

/// Adjoint of downsample, for gradient routing: spreads each upstream value
/// over its source rectangle with the same overlap weights / area.
FeatureMap downsample_backward(const FeatureMap& upstream, int source_h, int source_w);

/// Bilinear resize with half-pixel-center alignment. Output dims are
/// round(factor * dim); throws when either rounds to zero.
/// Channels are the leading dimension: data is [C x H x W] flattened.
struct Image {
  Index channels = 0, height = 0, width = 0;
  VectorXd data;  // ((c * H) + y) * W + x

  double& at(Index c, Index y, Index x) { return data[(c * height + y) * width + x]; }
  double at(Index c, Index y, Index x) const { return data[(c * height + y) * width + x]; }
};

Image resize_bilinear(const Image& image, double factor);

}  // namespace njet
