#pragma once

#include <memory>
#include <string>
#include <vector>

#include "njet/nn/layers.hpp"

namespace njet {

/// Everything needed to rebuild a network topology (and therefore to reload a
/// checkpoint into a freshly built network).
struct ArchSpec {
  std::string arch = "toy";  // toy | two_layer | four_layer
  bool njet = true;          // N-Jet convolutions vs fixed-size standard ones
  int order = 0;             // basis order; 0 = auto (4 for toy, 3 otherwise)
  double extent_k = 2.0;
  int conv_size = 3;         // filter size of the standard-conv baseline
  Index in_channels = 1;
  Index image_h = 28, image_w = 28;
  int class_count = 10;
  int toy_pool = 2;          // max-pool window (= stride) of the toy arch
  double subsample_r = 0.0;  // > 0 enables safe-subsampling before the head
  Index toy_filters = 16;
  Index c1 = 8, c2 = 16;     // channel widths of the deeper stacks

  int resolved_order() const { return order > 0 ? order : (arch == "toy" ? 4 : 3); }
};

class Network {
public:
  ArchSpec spec;
  std::vector<std::unique_ptr<Layer>> layers;
  std::vector<Layer*> conv_layers;          // njet_conv / conv2d, in depth order
  std::vector<NJetConvLayer*> njet_layers;  // subset of the above
  Index flatten_index = 0;                  // first non-spatial layer

  FeatureMap forward(const FeatureMap& input, bool train);
  FeatureMap backward(const FeatureMap& upstream);
  void collect_params(std::vector<ParamRef>& out);
  void zero_grads();

  /// Binary checkpoint, magic "NJET1": the ArchSpec followed by each layer's
  /// parameter block in depth order.
  void save(const std::string& path) const;
  static Network load(const std::string& path);

  /// Effective receptive field of the output unit at (y, x) of the last
  /// spatial layer: forward in eval mode, backprop a unit gradient from that
  /// location (all channels), return the channel-averaged |input gradient|.
  MatrixXd erf_map(const FeatureMap& input, Index y, Index x);
};

/// Mass-weighted second moment of a map about its centroid; the paper's
/// eRF-size summary statistic.
double erf_second_moment(const MatrixXd& map);

Network build_network(const ArchSpec& spec, Rng& rng);

}  // namespace njet
