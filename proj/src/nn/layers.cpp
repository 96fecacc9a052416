#include "njet/nn/layers.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace njet {

namespace {

void write_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::int32_t read_i32(std::istream& in) {
  std::int32_t v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

double read_f64(std::istream& in) {
  double v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  return v;
}

void write_block(std::ostream& out, const double* p, Index n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

void read_block(std::istream& in, double* p, Index n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8));
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
}

}  // namespace

// ---------------------------------------------------------------- NJetConvLayer

NJetConvLayer::NJetConvLayer(Index in_c, Index out_c, int order_, double k,
                             Rng& rng)
    : in_channels(in_c), out_channels(out_c), order(order_), extent_k(k) {
  require(in_c >= 1 && out_c >= 1, "njet_conv: channel counts must be positive");
  const Index m = BasisSpec{order, 1.0, extent_k}.count();
  alphas.out_channels = out_c;
  alphas.in_channels = in_c;
  alphas.values.resize(out_c * in_c, m);
  const double bound = std::sqrt(6.0 / double((in_c + out_c) * m));
  rng.fill_uniform(alphas.values, -bound, bound);
  bias = VectorXd::Zero(out_c);
  galphas = RowMatrixXd::Zero(out_c * in_c, m);
  gbias = VectorXd::Zero(out_c);
}

int NJetConvLayer::current_size() const {
  if (pinned_size > 0) return pinned_size;
  return filter_size(sigma(), extent_k);
}

FeatureMap NJetConvLayer::forward(const FeatureMap& input, bool) {
  BasisSpec spec{order, sigma(), extent_k};
  SampleOptions opts;
  opts.size_override = pinned_size;
  basis_cache = sample_basis(spec, opts);
  synth_cache = synthesize(alphas, basis_cache);
  input_cache = input;
  have_cache = true;
  return conv2d_forward(input, synth_cache.filters, out_channels, in_channels,
                        synth_cache.size, bias, Padding::Same);
}

FeatureMap NJetConvLayer::backward(const FeatureMap& upstream) {
  require(have_cache, "njet_conv: backward before forward");
  Conv2dGrads g =
      conv2d_backward(upstream, input_cache, synth_cache.filters, out_channels,
                      in_channels, synth_cache.size, Padding::Same);
  galphas += grad_alpha(g.dfilters, basis_cache);
  // d/d log_sigma = sigma * d/d sigma (sigma = exp(log_sigma)).
  glog_sigma += sigma() * grad_sigma(g.dfilters, synth_cache);
  gbias += g.dbias;
  return std::move(g.dinput);
}

void NJetConvLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({ParamKind::Alpha, "njet.alpha", alphas.values.data(),
                 galphas.data(), alphas.values.size()});
  out.push_back({ParamKind::LogSigma, "njet.log_sigma", &log_sigma, &glog_sigma, 1});
  out.push_back({ParamKind::Generic, "njet.bias", bias.data(), gbias.data(),
                 bias.size()});
}

void NJetConvLayer::save_params(std::ostream& out) const {
  write_i32(out, order);
  write_f64(out, extent_k);
  write_f64(out, log_sigma);
  write_block(out, alphas.values.data(), alphas.values.size());
  write_block(out, bias.data(), bias.size());
}

void NJetConvLayer::load_params(std::istream& in) {
  order = read_i32(in);
  extent_k = read_f64(in);
  log_sigma = read_f64(in);
  read_block(in, alphas.values.data(), alphas.values.size());
  read_block(in, bias.data(), bias.size());
}

// ------------------------------------------------------------------ Conv2dLayer

Conv2dLayer::Conv2dLayer(Index in_c, Index out_c, int size_, Rng& rng)
    : in_channels(in_c), out_channels(out_c), size(size_) {
  require(size >= 1 && size % 2 == 1, "conv2d: filter size must be odd");
  weights.resize(out_c * in_c, Index(size) * size);
  const double fan = double((in_c + out_c) * size * size);
  const double bound = std::sqrt(6.0 / fan);
  rng.fill_uniform(weights, -bound, bound);
  bias = VectorXd::Zero(out_c);
  gweights = RowMatrixXd::Zero(weights.rows(), weights.cols());
  gbias = VectorXd::Zero(out_c);
}

FeatureMap Conv2dLayer::forward(const FeatureMap& input, bool) {
  input_cache = input;
  have_cache = true;
  return conv2d_forward(input, weights, out_channels, in_channels, size, bias,
                        Padding::Same);
}

FeatureMap Conv2dLayer::backward(const FeatureMap& upstream) {
  require(have_cache, "conv2d: backward before forward");
  Conv2dGrads g = conv2d_backward(upstream, input_cache, weights, out_channels,
                                  in_channels, size, Padding::Same);
  gweights += g.dfilters;
  gbias += g.dbias;
  return std::move(g.dinput);
}

void Conv2dLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({ParamKind::Generic, "conv.weights", weights.data(),
                 gweights.data(), weights.size()});
  out.push_back({ParamKind::Generic, "conv.bias", bias.data(), gbias.data(),
                 bias.size()});
}

void Conv2dLayer::save_params(std::ostream& out) const {
  write_i32(out, size);
  write_block(out, weights.data(), weights.size());
  write_block(out, bias.data(), bias.size());
}

void Conv2dLayer::load_params(std::istream& in) {
  size = read_i32(in);
  read_block(in, weights.data(), weights.size());
  read_block(in, bias.data(), bias.size());
}

// --------------------------------------------------------------- BatchNormLayer

BatchNormLayer::BatchNormLayer(Index channels_) : channels(channels_) {
  require(channels >= 1, "batchnorm: channel count must be positive");
  gamma = VectorXd::Ones(channels);
  beta = VectorXd::Zero(channels);
  ggamma = VectorXd::Zero(channels);
  gbeta = VectorXd::Zero(channels);
  running_mean = VectorXd::Zero(channels);
  running_var = VectorXd::Ones(channels);
}

FeatureMap BatchNormLayer::forward(const FeatureMap& input, bool train) {
  require(input.channels == channels, "batchnorm: channel mismatch");
  const Index n = input.batch * input.plane_size();
  FeatureMap out = FeatureMap::zeros_like(input);
  xhat_cache = FeatureMap::zeros_like(input);
  inv_std_cache.resize(channels);

  for (Index c = 0; c < channels; ++c) {
    double mean, var;
    if (train) {
      double s1 = 0.0, s2 = 0.0;
      for (Index b = 0; b < input.batch; ++b) {
        s1 += input.plane(b, c).sum();
        s2 += input.plane(b, c).array().square().sum();
      }
      mean = s1 / n;
      var = std::max(0.0, s2 / n - mean * mean);
      const double unbiased = n > 1 ? var * double(n) / double(n - 1) : var;
      running_mean[c] = momentum * running_mean[c] + (1.0 - momentum) * mean;
      running_var[c] = momentum * running_var[c] + (1.0 - momentum) * unbiased;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + eps);
    inv_std_cache[c] = inv_std;
    for (Index b = 0; b < input.batch; ++b) {
      GridMap xh = xhat_cache.plane(b, c);
      xh = ((input.plane(b, c).array() - mean) * inv_std).matrix();
      out.plane(b, c) = (gamma[c] * xh.array() + beta[c]).matrix();
    }
  }
  have_cache = true;
  cached_train = train;
  return out;
}

FeatureMap BatchNormLayer::backward(const FeatureMap& upstream) {
  require(have_cache, "batchnorm: backward before forward");
  require(upstream.channels == channels, "batchnorm: upstream channel mismatch");
  const Index n = upstream.batch * upstream.plane_size();
  FeatureMap dinput = FeatureMap::zeros_like(upstream);

  for (Index c = 0; c < channels; ++c) {
    double sum_u = 0.0, sum_ux = 0.0;
    for (Index b = 0; b < upstream.batch; ++b) {
      sum_u += upstream.plane(b, c).sum();
      sum_ux += upstream.plane(b, c).cwiseProduct(xhat_cache.plane(b, c)).sum();
    }
    ggamma[c] += sum_ux;
    gbeta[c] += sum_u;
    const double scale = gamma[c] * inv_std_cache[c];
    for (Index b = 0; b < upstream.batch; ++b) {
      GridMap di = dinput.plane(b, c);
      if (cached_train) {
        // Batch statistics depend on the input, hence the two correction terms.
        di = (scale * (upstream.plane(b, c).array() - sum_u / double(n) -
                       xhat_cache.plane(b, c).array() * (sum_ux / double(n))))
                 .matrix();
      } else {
        di = scale * upstream.plane(b, c);
      }
    }
  }
  return dinput;
}

void BatchNormLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({ParamKind::Generic, "bn.gamma", gamma.data(), ggamma.data(),
                 gamma.size()});
  out.push_back({ParamKind::Generic, "bn.beta", beta.data(), gbeta.data(),
                 beta.size()});
}

void BatchNormLayer::save_params(std::ostream& out) const {
  write_block(out, gamma.data(), gamma.size());
  write_block(out, beta.data(), beta.size());
  write_block(out, running_mean.data(), running_mean.size());
  write_block(out, running_var.data(), running_var.size());
}

void BatchNormLayer::load_params(std::istream& in) {
  read_block(in, gamma.data(), gamma.size());
  read_block(in, beta.data(), beta.size());
  read_block(in, running_mean.data(), running_mean.size());
  read_block(in, running_var.data(), running_var.size());
}

// -------------------------------------------------------------------- ReluLayer

FeatureMap ReluLayer::forward(const FeatureMap& input, bool) {
  FeatureMap out = FeatureMap::zeros_like(input);
  mask = FeatureMap::zeros_like(input);
  mask.data = (input.data.array() > 0.0).cast<double>().matrix();
  out.data = input.data.cwiseProduct(mask.data);
  have_cache = true;
  return out;
}

FeatureMap ReluLayer::backward(const FeatureMap& upstream) {
  require(have_cache, "relu: backward before forward");
  require(upstream.same_shape(mask), "relu: upstream shape mismatch");
  FeatureMap out = FeatureMap::zeros_like(upstream);
  out.data = upstream.data.cwiseProduct(mask.data);
  return out;
}

// ----------------------------------------------------------------- MaxPoolLayer

MaxPoolLayer::MaxPoolLayer(int window_, int stride_)
    : window(window_), stride(stride_) {
  require(window >= 1 && stride >= 1, "maxpool: window and stride must be positive");
}

FeatureMap MaxPoolLayer::forward(const FeatureMap& input, bool) {
  if (window > input.height || window > input.width)
    throw std::invalid_argument("maxpool: window larger than input");
  in_b = input.batch;
  in_c = input.channels;
  in_h = input.height;
  in_w = input.width;
  out_h = (input.height - window) / stride + 1;
  out_w = (input.width - window) / stride + 1;
  FeatureMap out(in_b, in_c, out_h, out_w);
  argmax.assign(static_cast<std::size_t>(out.size()), 0);

  Index i = 0;
  for (Index b = 0; b < in_b; ++b)
    for (Index c = 0; c < in_c; ++c) {
      const Index base = input.offset(b, c);
      for (Index oy = 0; oy < out_h; ++oy)
        for (Index ox = 0; ox < out_w; ++ox, ++i) {
          double best = -std::numeric_limits<double>::infinity();
          Index best_idx = 0;
          for (int u = 0; u < window; ++u)
            for (int v = 0; v < window; ++v) {
              const Index idx =
                  base + (oy * stride + u) * in_w + (ox * stride + v);
              if (input.data[idx] > best) {
                best = input.data[idx];
                best_idx = idx;
              }
            }
          out.data[i] = best;
          argmax[static_cast<std::size_t>(i)] = best_idx;
        }
    }
  have_cache = true;
  return out;
}

FeatureMap MaxPoolLayer::backward(const FeatureMap& upstream) {
  require(have_cache, "maxpool: backward before forward");
  require(upstream.batch == in_b && upstream.channels == in_c &&
              upstream.height == out_h && upstream.width == out_w,
          "maxpool: upstream shape mismatch");
  FeatureMap dinput(in_b, in_c, in_h, in_w);
  for (Index i = 0; i < upstream.size(); ++i)
    dinput.data[argmax[static_cast<std::size_t>(i)]] += upstream.data[i];
  return dinput;
}

// ----------------------------------------------------------------- FlattenLayer

FeatureMap FlattenLayer::forward(const FeatureMap& input, bool) {
  in_channels = input.channels;
  in_h = input.height;
  in_w = input.width;
  FeatureMap out(input.batch, input.channels * input.height * input.width, 1, 1);
  out.data = input.data;  // identical flat layout
  return out;
}

FeatureMap FlattenLayer::backward(const FeatureMap& upstream) {
  require(upstream.channels == in_channels * in_h * in_w &&
              upstream.height == 1 && upstream.width == 1,
          "flatten: upstream shape mismatch");
  FeatureMap out(upstream.batch, in_channels, in_h, in_w);
  out.data = upstream.data;
  return out;
}

// ------------------------------------------------------------------- DenseLayer

DenseLayer::DenseLayer(Index in_f, Index out_f, Rng& rng)
    : in_features(in_f), out_features(out_f) {
  require(in_f >= 1 && out_f >= 1, "dense: feature counts must be positive");
  weights.resize(out_f, in_f);
  const double bound = std::sqrt(6.0 / double(in_f + out_f));
  rng.fill_uniform(weights, -bound, bound);
  bias = VectorXd::Zero(out_f);
  gweights = RowMatrixXd::Zero(out_f, in_f);
  gbias = VectorXd::Zero(out_f);
}

FeatureMap DenseLayer::forward(const FeatureMap& input, bool) {
  require(input.channels == in_features && input.height == 1 && input.width == 1,
          "dense: input feature mismatch");
  input_cache = input;
  have_cache = true;
  FeatureMap out(input.batch, out_features, 1, 1);
  Eigen::Map<const RowMatrixXd> x(input.data.data(), input.batch, in_features);
  Eigen::Map<RowMatrixXd> y(out.data.data(), input.batch, out_features);
  y.noalias() = x * weights.transpose();
  y.rowwise() += bias.transpose();
  return out;
}

FeatureMap DenseLayer::backward(const FeatureMap& upstream) {
  require(have_cache, "dense: backward before forward");
  require(upstream.channels == out_features && upstream.height == 1 &&
              upstream.width == 1 && upstream.batch == input_cache.batch,
          "dense: upstream shape mismatch");
  Eigen::Map<const RowMatrixXd> u(upstream.data.data(), upstream.batch, out_features);
  Eigen::Map<const RowMatrixXd> x(input_cache.data.data(), input_cache.batch,
                                  in_features);
  gweights.noalias() += u.transpose() * x;
  gbias += u.colwise().sum().transpose();
  FeatureMap dinput(upstream.batch, in_features, 1, 1);
  Eigen::Map<RowMatrixXd> dx(dinput.data.data(), upstream.batch, in_features);
  dx.noalias() = u * weights;
  return dinput;
}

void DenseLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({ParamKind::Generic, "dense.weights", weights.data(),
                 gweights.data(), weights.size()});
  out.push_back({ParamKind::Generic, "dense.bias", bias.data(), gbias.data(),
                 bias.size()});
}

void DenseLayer::save_params(std::ostream& out) const {
  write_block(out, weights.data(), weights.size());
  write_block(out, bias.data(), bias.size());
}

void DenseLayer::load_params(std::istream& in) {
  read_block(in, weights.data(), weights.size());
  read_block(in, bias.data(), bias.size());
}

// ----------------------------------------------------------- SafeSubsampleLayer

SafeSubsampleLayer::SafeSubsampleLayer(const NJetConvLayer* source_, double r,
                                       int floor_size_)
    : source(source_), floor_size(floor_size_) {
  require(source != nullptr, "safe_subsample: needs a producing njet layer");
  require(r > 0.0, "safe_subsample: r must be positive");
  require(floor_size >= 1, "safe_subsample: floor_size must be positive");
  rule.r = r;
}

FeatureMap SafeSubsampleLayer::forward(const FeatureMap& input, bool) {
  in_h = input.height;
  in_w = input.width;
  int th = safe_size(static_cast<int>(input.height), source->sigma(), rule);
  int tw = safe_size(static_cast<int>(input.width), source->sigma(), rule);
  th = std::min<int>(std::max(th, floor_size), static_cast<int>(input.height));
  tw = std::min<int>(std::max(tw, floor_size), static_cast<int>(input.width));
  return downsample(input, th, tw);
}

FeatureMap SafeSubsampleLayer::backward(const FeatureMap& upstream) {
  require(in_h > 0, "safe_subsample: backward before forward");
  return downsample_backward(upstream, static_cast<int>(in_h), static_cast<int>(in_w));
}

// ---------------------------------------------------------------- ResampleLayer

ResampleLayer::ResampleLayer(Index th, Index tw) : target_h(th), target_w(tw) {
  require(th >= 1 && tw >= 1, "avg_resample: target dims must be positive");
}

FeatureMap ResampleLayer::forward(const FeatureMap& input, bool) {
  in_h = input.height;
  in_w = input.width;
  return downsample(input, static_cast<int>(target_h), static_cast<int>(target_w));
}

FeatureMap ResampleLayer::backward(const FeatureMap& upstream) {
  require(in_h > 0, "avg_resample: backward before forward");
  return downsample_backward(upstream, static_cast<int>(in_h), static_cast<int>(in_w));
}

// ----------------------------------------------------------------- softmax_xent

SoftmaxXent softmax_xent(const FeatureMap& logits, const VectorXi& labels) {
  require(logits.height == 1 && logits.width == 1,
          "softmax_xent: expected flat logits [B x K x 1 x 1]");
  require(labels.size() == logits.batch, "softmax_xent: label count mismatch");
  const Index k = logits.channels;
  SoftmaxXent result;
  result.loss = 0.0;
  result.dlogits = FeatureMap::zeros_like(logits);
  Eigen::Map<const RowMatrixXd> x(logits.data.data(), logits.batch, k);
  Eigen::Map<RowMatrixXd> d(result.dlogits.data.data(), logits.batch, k);

  for (Index b = 0; b < logits.batch; ++b) {
    if (labels[b] < 0 || labels[b] >= k)
      throw std::invalid_argument("softmax_xent: label out of range");
    const double m = x.row(b).maxCoeff();
    const Eigen::Array<double, 1, Eigen::Dynamic> e = (x.row(b).array() - m).exp();
    const double z = e.sum();
    result.loss += -(x(b, labels[b]) - m - std::log(z));
    d.row(b) = (e / z).matrix();
    d(b, labels[b]) -= 1.0;
  }
  result.loss /= double(logits.batch);
  d /= double(logits.batch);
  return result;
}

}  // namespace njet
