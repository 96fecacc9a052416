#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "njet/common.hpp"
#include "njet/nn/conv2d.hpp"
#include "njet/nn/feature_map.hpp"
#include "njet/resample.hpp"
#include "njet/rng.hpp"
#include "njet/synthesis.hpp"

namespace njet {

/// How the optimizer should treat a parameter block.
enum class ParamKind { Generic, Alpha, LogSigma };

/// Flat view of one parameter block and its gradient accumulator.
struct ParamRef {
  ParamKind kind;
  std::string name;
  double* value;
  double* grad;
  Index n;
};

class Layer {
public:
  virtual ~Layer() = default;
  virtual std::string name() const = 0;
  /// `train` selects batch statistics vs running statistics in batch norm.
  virtual FeatureMap forward(const FeatureMap& input, bool train) = 0;
  /// Accumulates parameter gradients; returns the input gradient.
  virtual FeatureMap backward(const FeatureMap& upstream) = 0;
  virtual void collect_params(std::vector<ParamRef>&) {}
  virtual void save_params(std::ostream&) const {}
  virtual void load_params(std::istream&) {}
};

/// Convolution whose filters are synthesized on every forward pass from the
/// Gaussian derivative basis at sigma = exp(log_sigma). Both the mixing
/// coefficients alpha and log_sigma are learned.
class NJetConvLayer : public Layer {
public:
  NJetConvLayer(Index in_channels, Index out_channels, int order, double extent_k,
                Rng& rng);

  std::string name() const override { return "njet_conv"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void save_params(std::ostream& out) const override;
  void load_params(std::istream& in) override;

  double sigma() const { return std::exp(log_sigma); }
  /// Filter size the next forward pass will use.
  int current_size() const;
  /// Test hook: freeze the sampling grid at `s` (0 = follow sigma). Lets the
  /// finite-difference check of dlog_sigma hold the grid fixed across the stencil.
  void pin_size(int s) { pinned_size = s; }

  Index in_channels = 0, out_channels = 0;
  int order = 3;
  double extent_k = 2.0;
  double log_sigma = 0.0;
  AlphaTensor alphas;
  VectorXd bias;

  double glog_sigma = 0.0;
  RowMatrixXd galphas;
  VectorXd gbias;

private:
  int pinned_size = 0;
  bool have_cache = false;
  FeatureMap input_cache;
  BasisStack basis_cache;
  SynthesizedFilters synth_cache;
};

/// Plain trainable convolution with a fixed odd filter size (baseline nets).
class Conv2dLayer : public Layer {
public:
  Conv2dLayer(Index in_channels, Index out_channels, int size, Rng& rng);

  std::string name() const override { return "conv2d"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void save_params(std::ostream& out) const override;
  void load_params(std::istream& in) override;

  Index in_channels = 0, out_channels = 0;
  int size = 3;
  RowMatrixXd weights;  // (out * in) x (size * size)
  VectorXd bias;
  RowMatrixXd gweights;
  VectorXd gbias;

private:
  bool have_cache = false;
  FeatureMap input_cache;
};

/// Per-channel batch normalization with learnable scale/shift and running
/// statistics for eval mode. eps = 1e-5.
class BatchNormLayer : public Layer {
public:
  explicit BatchNormLayer(Index channels);

  std::string name() const override { return "batchnorm"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void save_params(std::ostream& out) const override;
  void load_params(std::istream& in) override;

  Index channels = 0;
  double eps = 1e-5;
  double momentum = 0.9;  // running <- momentum * running + (1 - momentum) * batch
  VectorXd gamma, beta, ggamma, gbeta;
  VectorXd running_mean, running_var;

private:
  bool have_cache = false;
  bool cached_train = false;
  FeatureMap xhat_cache;
  VectorXd inv_std_cache;
};

class ReluLayer : public Layer {
public:
  std::string name() const override { return "relu"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;

private:
  bool have_cache = false;
  FeatureMap mask;  // 1 where input > 0
};

class MaxPoolLayer : public Layer {
public:
  MaxPoolLayer(int window, int stride);

  std::string name() const override { return "maxpool"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;

  int window = 2, stride = 2;

private:
  bool have_cache = false;
  Index in_b = 0, in_c = 0, in_h = 0, in_w = 0;
  std::vector<Index> argmax;  // winning flat index per output element
  Index out_h = 0, out_w = 0;
};

/// [B x C x H x W] -> [B x C*H*W x 1 x 1]; the flat layout already matches.
class FlattenLayer : public Layer {
public:
  std::string name() const override { return "flatten"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;

private:
  Index in_channels = 0, in_h = 0, in_w = 0;
};

class DenseLayer : public Layer {
public:
  DenseLayer(Index in_features, Index out_features, Rng& rng);

  std::string name() const override { return "dense"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void save_params(std::ostream& out) const override;
  void load_params(std::istream& in) override;

  Index in_features = 0, out_features = 0;
  RowMatrixXd weights;  // out x in
  VectorXd bias;
  RowMatrixXd gweights;
  VectorXd gbias;

private:
  bool have_cache = false;
  FeatureMap input_cache;
};

/// Shrinks the map to safe_size(dim, sigma, r) of the producing N-Jet layer,
/// recomputed every forward pass from the live sigma. Area averaging with
/// exact adjoint.
class SafeSubsampleLayer : public Layer {
public:
  /// `floor_size` keeps the output at least that large (clamped to the input),
  /// so a fixed-grid resample further down never runs out of pixels.
  SafeSubsampleLayer(const NJetConvLayer* source, double r, int floor_size = 1);

  std::string name() const override { return "safe_subsample"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;

private:
  const NJetConvLayer* source;
  SubsampleRule rule;
  int floor_size = 1;
  Index in_h = 0, in_w = 0;
};

/// Area-average resample to a fixed grid; gives the dense head a stable input
/// size when safe-subsampling makes upstream dims depend on sigma.
class ResampleLayer : public Layer {
public:
  ResampleLayer(Index target_h, Index target_w);

  std::string name() const override { return "avg_resample"; }
  FeatureMap forward(const FeatureMap& input, bool train) override;
  FeatureMap backward(const FeatureMap& upstream) override;

  Index target_h = 0, target_w = 0;

private:
  Index in_h = 0, in_w = 0;
};

struct SoftmaxXent {
  double loss;
  FeatureMap dlogits;
};

/// Mean softmax cross-entropy over the batch; logits are [B x K x 1 x 1].
SoftmaxXent softmax_xent(const FeatureMap& logits, const VectorXi& labels);

}  // namespace njet
