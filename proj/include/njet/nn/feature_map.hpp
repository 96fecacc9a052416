#pragma once

#include "njet/common.hpp"

namespace njet {

/// Rank-4 activation tensor [batch x channels x height x width], stored flat.
struct FeatureMap {
  Index batch = 0, channels = 0, height = 0, width = 0;
  VectorXd data;

  FeatureMap() = default;
  FeatureMap(Index b, Index c, Index h, Index w)
      : batch(b), channels(c), height(h), width(w), data(VectorXd::Zero(b * c * h * w)) {}

  static FeatureMap zeros_like(const FeatureMap& other) {
    return FeatureMap(other.batch, other.channels, other.height, other.width);
  }

  Index size() const { return data.size(); }
  Index plane_size() const { return height * width; }
  bool same_shape(const FeatureMap& o) const {
    return batch == o.batch && channels == o.channels && height == o.height &&
           width == o.width;
  }

  Index offset(Index b, Index c) const { return (b * channels + c) * plane_size(); }

  double& at(Index b, Index c, Index y, Index x) {
    return data[offset(b, c) + y * width + x];
  }
  double at(Index b, Index c, Index y, Index x) const {
    return data[offset(b, c) + y * width + x];
  }

  GridMap plane(Index b, Index c) {
    return GridMap(data.data() + offset(b, c), height, width);
  }
  ConstGridMap plane(Index b, Index c) const {
    return ConstGridMap(data.data() + offset(b, c), height, width);
  }
};

}  // namespace njet
