#include "njet/nn/network.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>

namespace njet {

namespace {

constexpr char kMagic[5] = {'N', 'J', 'E', 'T', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
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

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  if (n > 4096) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw std::runtime_error("checkpoint: truncated stream");
  return s;
}

void write_spec(std::ostream& out, const ArchSpec& spec) {
  write_string(out, spec.arch);
  write_u32(out, spec.njet ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(spec.order));
  write_f64(out, spec.extent_k);
  write_u32(out, static_cast<std::uint32_t>(spec.conv_size));
  write_u32(out, static_cast<std::uint32_t>(spec.in_channels));
  write_u32(out, static_cast<std::uint32_t>(spec.image_h));
  write_u32(out, static_cast<std::uint32_t>(spec.image_w));
  write_u32(out, static_cast<std::uint32_t>(spec.class_count));
  write_u32(out, static_cast<std::uint32_t>(spec.toy_pool));
  write_f64(out, spec.subsample_r);
  write_u32(out, static_cast<std::uint32_t>(spec.toy_filters));
  write_u32(out, static_cast<std::uint32_t>(spec.c1));
  write_u32(out, static_cast<std::uint32_t>(spec.c2));
}

ArchSpec read_spec(std::istream& in) {
  ArchSpec spec;
  spec.arch = read_string(in);
  spec.njet = read_u32(in) != 0;
  spec.order = static_cast<int>(read_u32(in));
  spec.extent_k = read_f64(in);
  spec.conv_size = static_cast<int>(read_u32(in));
  spec.in_channels = static_cast<Index>(read_u32(in));
  spec.image_h = static_cast<Index>(read_u32(in));
  spec.image_w = static_cast<Index>(read_u32(in));
  spec.class_count = static_cast<int>(read_u32(in));
  spec.toy_pool = static_cast<int>(read_u32(in));
  spec.subsample_r = read_f64(in);
  spec.toy_filters = static_cast<Index>(read_u32(in));
  spec.c1 = static_cast<Index>(read_u32(in));
  spec.c2 = static_cast<Index>(read_u32(in));
  return spec;
}

/// Incrementally assembles the stack while tracking the running spatial shape.
struct Builder {
  Network& net;
  Rng& rng;
  Index c, h, w;

  NJetConvLayer* last_njet = nullptr;

  void conv(Index out_c) {
    const ArchSpec& spec = net.spec;
    if (spec.njet) {
      auto layer = std::make_unique<NJetConvLayer>(c, out_c, spec.resolved_order(),
                                                   spec.extent_k, rng);
      last_njet = layer.get();
      net.njet_layers.push_back(layer.get());
      net.conv_layers.push_back(layer.get());
      net.layers.push_back(std::move(layer));
    } else {
      auto layer = std::make_unique<Conv2dLayer>(c, out_c, spec.conv_size, rng);
      net.conv_layers.push_back(layer.get());
      net.layers.push_back(std::move(layer));
    }
    c = out_c;  // same padding keeps h, w
    net.layers.push_back(std::make_unique<BatchNormLayer>(c));
    net.layers.push_back(std::make_unique<ReluLayer>());
  }

  void pool(int window) {
    require(h >= window && w >= window, "arch: pool window larger than feature map");
    net.layers.push_back(std::make_unique<MaxPoolLayer>(window, window));
    h = (h - window) / window + 1;
    w = (w - window) / window + 1;
  }

  /// Safe-subsampling driven by the last N-Jet layer's live sigma, pinned to a
  /// fixed grid afterwards so the dense head keeps a constant input size.
  void safe_subsample(double r) {
    require(last_njet != nullptr,
            "arch: safe-subsampling needs an N-Jet layer upstream");
    const int target = static_cast<int>(std::max<Index>(1, std::min(h, w) / 2));
    net.layers.push_back(
        std::make_unique<SafeSubsampleLayer>(last_njet, r, target));
    net.layers.push_back(std::make_unique<ResampleLayer>(target, target));
    h = target;
    w = target;
  }

  void head(int class_count) {
    net.flatten_index = static_cast<Index>(net.layers.size());
    net.layers.push_back(std::make_unique<FlattenLayer>());
    net.layers.push_back(std::make_unique<DenseLayer>(c * h * w, class_count, rng));
  }
};

}  // namespace

FeatureMap Network::forward(const FeatureMap& input, bool train) {
  FeatureMap x = input;
  for (auto& layer : layers) x = layer->forward(x, train);
  return x;
}

FeatureMap Network::backward(const FeatureMap& upstream) {
  FeatureMap g = upstream;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Network::collect_params(std::vector<ParamRef>& out) {
  for (auto& layer : layers) layer->collect_params(out);
}

void Network::zero_grads() {
  std::vector<ParamRef> params;
  collect_params(params);
  for (auto& p : params) std::fill(p.grad, p.grad + p.n, 0.0);
}

void Network::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  write_spec(out, spec);
  for (const auto& layer : layers) layer->save_params(out);
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Network Network::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  char magic[5];
  in.read(magic, sizeof magic);
  if (!in || !std::equal(magic, magic + 5, kMagic))
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const ArchSpec spec = read_spec(in);
  Rng rng(0);  // placeholder init; every parameter is overwritten below
  Network net = build_network(spec, rng);
  for (auto& layer : net.layers) layer->load_params(in);
  return net;
}

MatrixXd Network::erf_map(const FeatureMap& input, Index y, Index x) {
  require(input.batch == 1, "erf_map: expects a single input");
  FeatureMap act = input;
  for (Index i = 0; i < flatten_index; ++i) act = layers[i]->forward(act, false);
  if (y < 0 || y >= act.height || x < 0 || x >= act.width)
    throw std::invalid_argument("erf_map: location out of range");

  FeatureMap upstream = FeatureMap::zeros_like(act);
  for (Index c = 0; c < act.channels; ++c) upstream.at(0, c, y, x) = 1.0;
  for (Index i = flatten_index - 1; i >= 0; --i)
    upstream = layers[i]->backward(upstream);

  MatrixXd map = MatrixXd::Zero(input.height, input.width);
  for (Index c = 0; c < input.channels; ++c)
    map += upstream.plane(0, c).cwiseAbs();
  map /= double(input.channels);
  return map;
}

double erf_second_moment(const MatrixXd& map) {
  const double mass = map.sum();
  if (mass <= 0.0) return 0.0;
  double cy = 0.0, cx = 0.0;
  for (Index y = 0; y < map.rows(); ++y)
    for (Index x = 0; x < map.cols(); ++x) {
      cy += map(y, x) * double(y);
      cx += map(y, x) * double(x);
    }
  cy /= mass;
  cx /= mass;
  double moment = 0.0;
  for (Index y = 0; y < map.rows(); ++y)
    for (Index x = 0; x < map.cols(); ++x) {
      const double dy = double(y) - cy;
      const double dx = double(x) - cx;
      moment += map(y, x) * (dy * dy + dx * dx);
    }
  return moment / mass;
}

Network build_network(const ArchSpec& spec, Rng& rng) {
  require(spec.class_count >= 2, "arch: need at least two classes");
  require(spec.image_h >= 1 && spec.image_w >= 1 && spec.in_channels >= 1,
          "arch: bad input shape");
  Network net;
  net.spec = spec;
  Builder b{net, rng, spec.in_channels, spec.image_h, spec.image_w};

  if (spec.arch == "toy") {
    b.conv(spec.toy_filters);
    if (spec.subsample_r > 0.0) b.safe_subsample(spec.subsample_r);
    b.pool(spec.toy_pool);
  } else if (spec.arch == "two_layer") {
    b.conv(spec.c1);
    b.pool(2);
    b.conv(spec.c2);
    b.pool(2);
    if (spec.subsample_r > 0.0) b.safe_subsample(spec.subsample_r);
  } else if (spec.arch == "four_layer") {
    b.conv(spec.c1);
    b.conv(spec.c1);
    b.pool(2);
    b.conv(spec.c2);
    b.conv(spec.c2);
    b.pool(2);
    if (spec.subsample_r > 0.0) b.safe_subsample(spec.subsample_r);
  } else {
    throw std::invalid_argument("arch: unknown architecture '" + spec.arch + "'");
  }
  b.head(spec.class_count);
  return net;
}

}  // namespace njet
