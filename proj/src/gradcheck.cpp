#include "njet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "njet/nn/network.hpp"
#include "njet/train.hpp"

namespace njet {

namespace {

double central_diff(double* coord, const std::function<double()>& f) {
  const double x0 = *coord;
  const double h = std::cbrt(2.2e-16) * std::max(1.0, std::abs(x0));
  *coord = x0 + h;
  const double fp = f();
  *coord = x0 - h;
  const double fm = f();
  *coord = x0;
  return (fp - fm) / (2.0 * h);
}

double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({1e-4, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

/// Strided coordinate coverage: up to `want` probes spread over [0, n).
std::vector<Index> probes(Index n, Index want, Rng& rng) {
  std::vector<Index> out;
  if (n <= want) {
    for (Index i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  const Index step = n / want;
  const Index offset = static_cast<Index>(rng.below(static_cast<std::uint64_t>(step)));
  for (Index i = offset; i < n && Index(out.size()) < want; i += step)
    out.push_back(i);
  return out;
}

FeatureMap random_map(Rng& rng, Index b, Index c, Index h, Index w,
                      double lo = -1.0, double hi = 1.0) {
  FeatureMap map(b, c, h, w);
  rng.fill_uniform(map.data, lo, hi);
  return map;
}

double weighted_sum(const FeatureMap& map, const FeatureMap& weight) {
  return map.data.dot(weight.data);
}

struct Harness {
  Rng rng;
  std::vector<GradCheckResult> results;

  explicit Harness(std::uint64_t seed) : rng(seed) {}

  void record(const std::string& name, double err) {
    for (auto& r : results)
      if (r.name == name) {
        r.max_rel_err = std::max(r.max_rel_err, err);
        return;
      }
    results.push_back({name, err});
  }

  /// Compares analytic[i] against FD over flat coordinates of `value`.
  void probe_block(const std::string& name, double* value, const double* analytic,
                   Index n, Index want, const std::function<double()>& loss) {
    for (Index i : probes(n, want, rng))
      record(name, rel_err(analytic[i], central_diff(value + i, loss)));
  }

  void check_conv2d(Index b, Index cin, Index cout, Index h, Index w, int s,
                    Padding padding) {
    FeatureMap x = random_map(rng, b, cin, h, w);
    RowMatrixXd filters(cout * cin, Index(s) * s);
    rng.fill_uniform(filters, -0.5, 0.5);
    VectorXd bias(cout);
    rng.fill_uniform(bias, -0.2, 0.2);
    FeatureMap out0 =
        conv2d_forward(x, filters, cout, cin, s, bias, padding);
    FeatureMap r = random_map(rng, out0.batch, out0.channels, out0.height,
                              out0.width);
    auto loss = [&] {
      return weighted_sum(conv2d_forward(x, filters, cout, cin, s, bias, padding),
                          r);
    };
    Conv2dGrads g = conv2d_backward(r, x, filters, cout, cin, s, padding);
    probe_block("conv2d.input", x.data.data(), g.dinput.data.data(), x.size(), 8,
                loss);
    probe_block("conv2d.filters", filters.data(), g.dfilters.data(),
                filters.size(), 8, loss);
    probe_block("conv2d.bias", bias.data(), g.dbias.data(), bias.size(), 4, loss);
  }

  void check_synthesis() {
    const BasisSpec spec{3, 1.3, 2.0};
    const BasisStack basis = sample_basis(spec);
    AlphaTensor alphas;
    alphas.out_channels = 2;
    alphas.in_channels = 2;
    alphas.values.resize(4, basis.count());
    rng.fill_uniform(alphas.values, -1.0, 1.0);
    RowMatrixXd r(4, Index(basis.size) * basis.size);
    rng.fill_uniform(r, -1.0, 1.0);

    auto alpha_loss = [&] {
      return (synthesize(alphas, basis).filters.cwiseProduct(r)).sum();
    };
    const RowMatrixXd dalpha = grad_alpha(r, basis);
    probe_block("synthesis.alpha", alphas.values.data(), dalpha.data(),
                alphas.values.size(), 12, alpha_loss);

    // dF/dsigma with the grid pinned to the sigma-derived size.
    double sigma = spec.sigma;
    SampleOptions pinned;
    pinned.size_override = basis.size;
    auto sigma_loss = [&] {
      const BasisStack b2 = sample_basis({spec.order, sigma, spec.extent_k}, pinned);
      return (synthesize(alphas, b2).filters.cwiseProduct(r)).sum();
    };
    const double analytic = grad_sigma(r, synthesize(alphas, basis));
    record("synthesis.sigma",
           rel_err(analytic, central_diff(&sigma, sigma_loss)));
  }

  void check_njet(Index b, Index cin, Index cout, Index h, Index w, int order,
                  double k, double log_sigma0) {
    NJetConvLayer layer(cin, cout, order, k, rng);
    layer.log_sigma = log_sigma0;
    layer.pin_size(layer.current_size());
    FeatureMap x = random_map(rng, b, cin, h, w);
    FeatureMap r = random_map(rng, b, cout, h, w);
    auto loss = [&] { return weighted_sum(layer.forward(x, true), r); };

    layer.galphas.setZero();
    layer.gbias.setZero();
    layer.glog_sigma = 0.0;
    layer.forward(x, true);
    FeatureMap dinput = layer.backward(r);

    probe_block("njet_conv.alpha", layer.alphas.values.data(),
                layer.galphas.data(), layer.alphas.values.size(), 10, loss);
    probe_block("njet_conv.bias", layer.bias.data(), layer.gbias.data(),
                layer.bias.size(), 4, loss);
    probe_block("njet_conv.input", x.data.data(), dinput.data.data(), x.size(), 8,
                loss);
    record("njet_conv.log_sigma",
           rel_err(layer.glog_sigma, central_diff(&layer.log_sigma, loss)));
  }

  void check_batchnorm(Index b, Index c, Index h, Index w) {
    BatchNormLayer layer(c);
    rng.fill_uniform(layer.gamma, 0.5, 1.5);
    rng.fill_uniform(layer.beta, -0.5, 0.5);
    FeatureMap x = random_map(rng, b, c, h, w);
    FeatureMap r = random_map(rng, b, c, h, w);
    auto loss = [&] { return weighted_sum(layer.forward(x, true), r); };

    layer.ggamma.setZero();
    layer.gbeta.setZero();
    layer.forward(x, true);
    FeatureMap dinput = layer.backward(r);

    probe_block("batchnorm.gamma", layer.gamma.data(), layer.ggamma.data(),
                c, 4, loss);
    probe_block("batchnorm.beta", layer.beta.data(), layer.gbeta.data(), c, 4,
                loss);
    probe_block("batchnorm.input", x.data.data(), dinput.data.data(), x.size(), 8,
                loss);
  }

  void check_relu(Index b, Index c, Index h, Index w) {
    ReluLayer layer;
    FeatureMap x = random_map(rng, b, c, h, w);
    // Keep values away from the kink so the finite difference is valid.
    for (Index i = 0; i < x.size(); ++i)
      if (std::abs(x.data[i]) < 0.02) x.data[i] += 0.05;
    FeatureMap r = random_map(rng, b, c, h, w);
    auto loss = [&] { return weighted_sum(layer.forward(x, true), r); };
    layer.forward(x, true);
    FeatureMap dinput = layer.backward(r);
    probe_block("relu.input", x.data.data(), dinput.data.data(), x.size(), 8, loss);
  }

  void check_maxpool(Index b, Index c, Index h, Index w, int window, int stride) {
    MaxPoolLayer layer(window, stride);
    FeatureMap x = random_map(rng, b, c, h, w);
    FeatureMap out0 = layer.forward(x, true);
    FeatureMap r = random_map(rng, out0.batch, out0.channels, out0.height,
                              out0.width);
    auto loss = [&] { return weighted_sum(layer.forward(x, true), r); };
    layer.forward(x, true);
    FeatureMap dinput = layer.backward(r);
    probe_block("maxpool.input", x.data.data(), dinput.data.data(), x.size(), 8,
                loss);
  }

  void check_dense(Index b, Index in_f, Index out_f) {
    DenseLayer layer(in_f, out_f, rng);
    FeatureMap x = random_map(rng, b, in_f, 1, 1);
    FeatureMap r = random_map(rng, b, out_f, 1, 1);
    auto loss = [&] { return weighted_sum(layer.forward(x, true), r); };
    layer.gweights.setZero();
    layer.gbias.setZero();
    layer.forward(x, true);
    FeatureMap dinput = layer.backward(r);
    probe_block("dense.weights", layer.weights.data(), layer.gweights.data(),
                layer.weights.size(), 10, loss);
    probe_block("dense.bias", layer.bias.data(), layer.gbias.data(),
                layer.bias.size(), 4, loss);
    probe_block("dense.input", x.data.data(), dinput.data.data(), x.size(), 6,
                loss);
  }

  void check_subsample(Index b, Index c, Index h, Index w) {
    NJetConvLayer source(1, 1, 0, 2.0, rng);
    source.log_sigma = 0.3;
    SafeSubsampleLayer layer(&source, 3.0);
    FeatureMap x = random_map(rng, b, c, h, w);
    FeatureMap out0 = layer.forward(x, true);
    FeatureMap r = random_map(rng, out0.batch, out0.channels, out0.height,
                              out0.width);
    auto loss = [&] { return weighted_sum(layer.forward(x, true), r); };
    layer.forward(x, true);
    FeatureMap dinput = layer.backward(r);
    probe_block("safe_subsample.input", x.data.data(), dinput.data.data(),
                x.size(), 8, loss);

    ResampleLayer fixed(std::max<Index>(1, h / 2), std::max<Index>(1, w / 2));
    FeatureMap out1 = fixed.forward(x, true);
    FeatureMap r1 = random_map(rng, out1.batch, out1.channels, out1.height,
                               out1.width);
    auto loss1 = [&] { return weighted_sum(fixed.forward(x, true), r1); };
    fixed.forward(x, true);
    FeatureMap dinput1 = fixed.backward(r1);
    probe_block("avg_resample.input", x.data.data(), dinput1.data.data(),
                x.size(), 8, loss1);
  }

  void check_softmax(Index b, Index k) {
    FeatureMap logits = random_map(rng, b, k, 1, 1);
    VectorXi labels(b);
    for (Index i = 0; i < b; ++i)
      labels[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    auto loss = [&] { return softmax_xent(logits, labels).loss; };
    SoftmaxXent sx = softmax_xent(logits, labels);
    probe_block("softmax_xent.logits", logits.data.data(),
                sx.dlogits.data.data(), logits.size(), 10, loss);
  }

  void check_network() {
    ArchSpec spec;
    spec.arch = "toy";
    spec.order = 2;
    spec.in_channels = 1;
    spec.image_h = 10;
    spec.image_w = 10;
    spec.class_count = 3;
    spec.toy_filters = 3;
    Network net = build_network(spec, rng);
    for (NJetConvLayer* layer : net.njet_layers)
      layer->pin_size(layer->current_size());

    FeatureMap x = random_map(rng, 2, 1, 10, 10, 0.0, 1.0);
    VectorXi labels(2);
    labels << 0, 2;
    auto loss = [&] { return softmax_xent(net.forward(x, true), labels).loss; };

    net.zero_grads();
    SoftmaxXent sx = softmax_xent(net.forward(x, true), labels);
    FeatureMap dinput = net.backward(sx.dlogits);

    std::vector<ParamRef> params;
    net.collect_params(params);
    for (auto& p : params)
      probe_block("network." + p.name, p.value, p.grad, p.n, 4, loss);
    probe_block("network.input", x.data.data(), dinput.data.data(), x.size(), 6,
                loss);
  }
};

}  // namespace

std::vector<GradCheckResult> run_gradchecks(std::uint64_t seed) {
  Harness h(seed);

  h.check_conv2d(2, 2, 3, 5, 5, 3, Padding::Same);
  h.check_conv2d(1, 3, 2, 6, 4, 3, Padding::Valid);
  h.check_conv2d(2, 1, 4, 8, 8, 5, Padding::Same);

  h.check_synthesis();

  h.check_njet(2, 2, 3, 6, 5, 2, 1.5, 0.1);
  h.check_njet(1, 1, 2, 7, 7, 3, 2.0, 0.0);
  h.check_njet(2, 3, 1, 5, 6, 1, 2.0, -0.2);

  h.check_batchnorm(3, 2, 4, 3);
  h.check_batchnorm(2, 4, 3, 3);
  h.check_batchnorm(4, 1, 5, 2);

  h.check_relu(2, 2, 4, 3);
  h.check_relu(3, 1, 5, 5);
  h.check_relu(1, 4, 2, 6);

  h.check_maxpool(2, 2, 6, 6, 2, 2);
  h.check_maxpool(1, 3, 7, 5, 2, 2);
  h.check_maxpool(2, 1, 9, 9, 3, 3);

  h.check_dense(3, 7, 4);
  h.check_dense(2, 5, 5);
  h.check_dense(4, 3, 2);

  h.check_subsample(2, 2, 9, 9);
  h.check_subsample(1, 3, 8, 6);
  h.check_subsample(3, 1, 7, 10);

  h.check_softmax(4, 5);
  h.check_softmax(2, 10);
  h.check_softmax(6, 2);

  h.check_network();

  return h.results;
}

}  // namespace njet
