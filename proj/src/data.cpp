#include "njet/data.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "njet/rng.hpp"

namespace njet {

FeatureMap LabeledDataset::batch(Index first, Index n) const {
  require(first >= 0 && first + n <= count, "batch: sample range out of bounds");
  FeatureMap out(n, channels, height, width);
  const Index stride = image_size();
  for (Index i = 0; i < n * stride; ++i)
    out.data[i] = static_cast<double>(images[first * stride + i]);
  return out;
}

FeatureMap LabeledDataset::gather(const std::vector<Index>& indices) const {
  FeatureMap out(static_cast<Index>(indices.size()), channels, height, width);
  const Index stride = image_size();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] >= 0 && indices[k] < count, "gather: index out of bounds");
    for (Index i = 0; i < stride; ++i)
      out.data[static_cast<Index>(k) * stride + i] =
          static_cast<double>(images[indices[k] * stride + i]);
  }
  return out;
}

Image LabeledDataset::image(Index n) const {
  require(n >= 0 && n < count, "image: index out of bounds");
  Image img;
  img.channels = channels;
  img.height = height;
  img.width = width;
  img.data.resize(image_size());
  for (Index i = 0; i < image_size(); ++i)
    img.data[i] = static_cast<double>(images[n * image_size() + i]);
  return img;
}

LabeledDataset LabeledDataset::slice(Index first, Index n) const {
  require(first >= 0 && first + n <= count, "slice: range out of bounds");
  LabeledDataset out;
  out.count = n;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.class_count = class_count;
  out.images = images.segment(first * image_size(), n * image_size());
  out.labels = labels.segment(first, n);
  return out;
}

namespace {

std::uint32_t read_be_u32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw IdxTruncatedError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img_in(images_path, std::ios::binary);
  if (!img_in) throw std::runtime_error("cannot open: " + images_path);
  std::ifstream lab_in(labels_path, std::ios::binary);
  if (!lab_in) throw std::runtime_error("cannot open: " + labels_path);

  const std::uint32_t img_magic = read_be_u32(img_in, images_path);
  if (img_magic != 0x00000803u)
    throw IdxMagicError("bad IDX image magic in " + images_path);
  const std::uint32_t lab_magic = read_be_u32(lab_in, labels_path);
  if (lab_magic != 0x00000801u)
    throw IdxMagicError("bad IDX label magic in " + labels_path);

  const std::uint32_t n_img = read_be_u32(img_in, images_path);
  const std::uint32_t rows = read_be_u32(img_in, images_path);
  const std::uint32_t cols = read_be_u32(img_in, images_path);
  const std::uint32_t n_lab = read_be_u32(lab_in, labels_path);
  if (n_img != n_lab)
    throw IdxCountMismatchError("IDX image/label count mismatch: " +
                                std::to_string(n_img) + " vs " + std::to_string(n_lab));

  LabeledDataset ds;
  ds.count = static_cast<Index>(n_img);
  ds.channels = 1;
  ds.height = static_cast<Index>(rows);
  ds.width = static_cast<Index>(cols);

  const std::size_t pixel_count = std::size_t(n_img) * rows * cols;
  std::vector<unsigned char> pixels(pixel_count);
  img_in.read(reinterpret_cast<char*>(pixels.data()),
              static_cast<std::streamsize>(pixel_count));
  if (img_in.gcount() != static_cast<std::streamsize>(pixel_count))
    throw IdxTruncatedError("truncated IDX image data: " + images_path);

  std::vector<unsigned char> raw_labels(n_lab);
  lab_in.read(reinterpret_cast<char*>(raw_labels.data()), n_lab);
  if (lab_in.gcount() != static_cast<std::streamsize>(n_lab))
    throw IdxTruncatedError("truncated IDX label data: " + labels_path);

  ds.images.resize(static_cast<Index>(pixel_count));
  for (std::size_t i = 0; i < pixel_count; ++i)
    ds.images[static_cast<Index>(i)] = pixels[i] / 255.0f;

  ds.labels.resize(static_cast<Index>(n_lab));
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    ds.labels[static_cast<Index>(i)] = raw_labels[i];
    max_label = std::max(max_label, static_cast<int>(raw_labels[i]));
  }
  ds.class_count = max_label + 1;
  return ds;
}

LabeledDataset make_multiscale(const LabeledDataset& ds, double factor) {
  require(factor > 0.0, "make_multiscale: factor must be positive");
  LabeledDataset out;
  out.count = ds.count;
  out.channels = ds.channels;
  out.class_count = ds.class_count;
  out.labels = ds.labels;
  for (Index n = 0; n < ds.count; ++n) {
    Image resized = resize_bilinear(ds.image(n), factor);
    if (n == 0) {
      out.height = resized.height;
      out.width = resized.width;
      out.images.resize(ds.count * out.channels * out.height * out.width);
    }
    for (Index i = 0; i < resized.data.size(); ++i)
      out.images[n * resized.data.size() + i] = static_cast<float>(resized.data[i]);
  }
  if (ds.count == 0) {
    out.height = ds.height;
    out.width = ds.width;
  }
  return out;
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBlobBaseRadius = 2.5;   // envelope, pixels at scale factor 1
constexpr double kCoarseWavelength = 6.0; // class-0 ripple, pixels at factor 1
constexpr double kFineWavelength = 3.0;   // class-1 ripple, pixels at factor 1
constexpr double kRippleContrast = 0.5;

}  // namespace

LabeledDataset synth_blobs(Index n, int image_size, double scale_factor,
                           std::uint64_t seed, double noise) {
  require(n >= 1, "synth_blobs: need at least one sample");
  require(image_size >= 1 && scale_factor > 0.0, "synth_blobs: bad geometry");
  require(noise >= 0.0, "synth_blobs: noise must be non-negative");

  const double radius = kBlobBaseRadius * scale_factor;
  const double margin = 2.2 * 1.35 * radius;  // covers the jittered envelope
  const double lo = margin;
  const double hi = image_size - 1 - margin;
  if (hi - lo < 1.0)
    throw std::invalid_argument("synth_blobs: blob does not fit image of size " +
                                std::to_string(image_size));

  LabeledDataset ds;
  ds.count = n;
  ds.channels = 1;
  ds.height = image_size;
  ds.width = image_size;
  ds.class_count = 2;
  ds.labels.resize(n);

  Rng rng(seed);
  FeatureMap images(n, 1, image_size, image_size);

  // The two classes share every envelope statistic — amplitude, radius,
  // placement, total mass, even ripple contrast — and differ only in the
  // wavelength of a multiplicative ripple. Telling coarse from fine texture
  // requires a band-matched filter: derivative-of-Gaussian responses to a
  // wave of length lambda peak at sigma proportional to lambda and die off
  // exponentially beyond it, while pixel noise penalizes sigma below it.
  // Since both wavelengths dilate with scale_factor and the sensor noise does
  // not, the optimal filter scale tracks the input resolution.
  for (Index i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    ds.labels[i] = label;
    const double wavelength =
        (label == 0 ? kCoarseWavelength : kFineWavelength) * scale_factor;
    const double omega = 2.0 * kPi / wavelength;
    const double cy = rng.uniform(lo, hi);
    const double cx = rng.uniform(lo, hi);
    const double amplitude = rng.uniform(0.5, 0.95);
    const double r = radius * rng.uniform(1.0, 1.35);
    const double theta = rng.uniform(0.0, kPi);  // ripple orientation
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double inv = 1.0 / (2.0 * r * r);

    auto plane = images.plane(i, 0);
    for (Index y = 0; y < image_size; ++y)
      for (Index x = 0; x < image_size; ++x) {
        const double dy = y - cy;
        const double dx = x - cx;
        const double envelope = amplitude * std::exp(-(dy * dy + dx * dx) * inv);
        const double u = dx * ct + dy * st;
        plane(y, x) = envelope *
                      (1.0 + kRippleContrast * std::cos(omega * u + phase));
      }

    // Sensor noise lives at pixel scale at every resolution; only the scene
    // dilates with scale_factor.
    for (Index y = 0; y < image_size; ++y)
      for (Index x = 0; x < image_size; ++x)
        plane(y, x) += rng.uniform(0.0, noise);
  }

  ds.images.resize(images.data.size());
  for (Index i = 0; i < images.data.size(); ++i) {
    const double v = images.data[i];
    ds.images[i] = static_cast<float>(v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v));
  }
  return ds;
}

}  // namespace njet
