#include "njet/resample.hpp"

#include <cmath>

namespace njet {

int safe_size(int s, double sigma, const SubsampleRule& rule) {
  require(s >= 1, "safe_size: size must be at least 1");
  require(sigma > 0.0, "safe_size: sigma must be positive");
  require(rule.r > 0.0, "safe_size: rule.r must be positive");
  const double scaled = s * std::pow(0.5, sigma / rule.r);
  const long long rounded = std::llround(scaled);
  return rounded < 1 ? 1 : static_cast<int>(rounded);
}

namespace {

// Overlap of source cell [i, i+1) with output cell [o*step, (o+1)*step).
double overlap(Index i, Index o, double step) {
  const double lo = std::max(static_cast<double>(i), o * step);
  const double hi = std::min(static_cast<double>(i + 1), (o + 1) * step);
  return hi > lo ? hi - lo : 0.0;
}

}  // namespace

FeatureMap downsample(const FeatureMap& map, int target_h, int target_w) {
  require(target_h >= 1 && target_w >= 1, "downsample: degenerate target");
  require(target_h <= map.height && target_w <= map.width,
          "downsample: target larger than source");

  FeatureMap out(map.batch, map.channels, target_h, target_w);
  const double step_y = static_cast<double>(map.height) / target_h;
  const double step_x = static_cast<double>(map.width) / target_w;
  const double inv_area = 1.0 / (step_y * step_x);

  for (Index b = 0; b < map.batch; ++b) {
    for (Index c = 0; c < map.channels; ++c) {
      auto src = map.plane(b, c);
      auto dst = out.plane(b, c);
      for (Index oy = 0; oy < target_h; ++oy) {
        const Index y0 = static_cast<Index>(std::floor(oy * step_y));
        const Index y1 = std::min<Index>(map.height - 1,
                                         static_cast<Index>(std::ceil((oy + 1) * step_y)) - 1);
        for (Index ox = 0; ox < target_w; ++ox) {
          const Index x0 = static_cast<Index>(std::floor(ox * step_x));
          const Index x1 = std::min<Index>(map.width - 1,
                                           static_cast<Index>(std::ceil((ox + 1) * step_x)) - 1);
          double acc = 0.0;
          for (Index y = y0; y <= y1; ++y) {
            const double wy = overlap(y, oy, step_y);
            for (Index x = x0; x <= x1; ++x) acc += wy * overlap(x, ox, step_x) * src(y, x);
          }
          dst(oy, ox) = acc * inv_area;
        }
      }
    }
  }
  return out;
}

FeatureMap downsample_backward(const FeatureMap& upstream, int source_h, int source_w) {
  require(source_h >= upstream.height && source_w >= upstream.width,
          "downsample_backward: source smaller than upstream");

  FeatureMap out(upstream.batch, upstream.channels, source_h, source_w);
  const double step_y = static_cast<double>(source_h) / upstream.height;
  const double step_x = static_cast<double>(source_w) / upstream.width;
  const double inv_area = 1.0 / (step_y * step_x);

  for (Index b = 0; b < upstream.batch; ++b) {
    for (Index c = 0; c < upstream.channels; ++c) {
      auto up = upstream.plane(b, c);
      auto dst = out.plane(b, c);
      for (Index oy = 0; oy < upstream.height; ++oy) {
        const Index y0 = static_cast<Index>(std::floor(oy * step_y));
        const Index y1 = std::min<Index>(source_h - 1,
                                         static_cast<Index>(std::ceil((oy + 1) * step_y)) - 1);
        for (Index ox = 0; ox < upstream.width; ++ox) {
          const Index x0 = static_cast<Index>(std::floor(ox * step_x));
          const Index x1 = std::min<Index>(source_w - 1,
                                           static_cast<Index>(std::ceil((ox + 1) * step_x)) - 1);
          const double g = up(oy, ox) * inv_area;
          for (Index y = y0; y <= y1; ++y) {
            const double wy = overlap(y, oy, step_y);
            for (Index x = x0; x <= x1; ++x) dst(y, x) += g * wy * overlap(x, ox, step_x);
          }
        }
      }
    }
  }
  return out;
}

Image resize_bilinear(const Image& image, double factor) {
  require(factor > 0.0, "resize_bilinear: factor must be positive");
  const Index out_h = static_cast<Index>(std::llround(factor * image.height));
  const Index out_w = static_cast<Index>(std::llround(factor * image.width));
  require(out_h >= 1 && out_w >= 1, "resize_bilinear: degenerate output dims");

  Image out;
  out.channels = image.channels;
  out.height = out_h;
  out.width = out_w;
  out.data.resize(image.channels * out_h * out_w);

  const double sy = static_cast<double>(image.height) / out_h;
  const double sx = static_cast<double>(image.width) / out_w;

  for (Index y = 0; y < out_h; ++y) {
    // Half-pixel centers: output center (y + 0.5) lands at source coordinate
    // (y + 0.5) * sy, sampled relative to source pixel centers.
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(image.height - 1));
    const Index y0 = static_cast<Index>(std::floor(fy));
    const Index y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (Index x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(image.width - 1));
      const Index x0 = static_cast<Index>(std::floor(fx));
      const Index x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (Index c = 0; c < image.channels; ++c) {
        const double top = (1.0 - wx) * image.at(c, y0, x0) + wx * image.at(c, y0, x1);
        const double bot = (1.0 - wx) * image.at(c, y1, x0) + wx * image.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

}  // namespace njet
