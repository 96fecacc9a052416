#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "njet/common.hpp"
#include "njet/nn/feature_map.hpp"
#include "njet/resample.hpp"

namespace njet {

class IdxMagicError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class IdxTruncatedError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class IdxCountMismatchError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Images with labels; pixel values in [0, 1]. Images are stored in single
/// precision (datasets get large at 4x scale); batches are assembled in double.
struct LabeledDataset {
  Index count = 0, channels = 0, height = 0, width = 0;
  int class_count = 0;
  VectorXf images;  // [(n * C + c) * H + y] * W + x
  VectorXi labels;  // n

  Index image_size() const { return channels * height * width; }

  /// Copies samples [first, first + n) into a double-precision batch tensor.
  FeatureMap batch(Index first, Index n) const;
  /// Gathers the given sample indices into a batch tensor.
  FeatureMap gather(const std::vector<Index>& indices) const;
  /// Single sample as an Image (for export and eRF probing).
  Image image(Index n) const;
  /// Keeps samples [first, first + n).
  LabeledDataset slice(Index first, Index n) const;
};

/// Loads a dataset from big-endian IDX files (the MNIST container format).
/// Magic 0x00000803 for images, 0x00000801 for labels; bytes scaled to [0,1].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Resizes every image by `factor` with bilinear interpolation; labels unchanged.
LabeledDataset make_multiscale(const LabeledDataset& ds, double factor);

/// Self-contained two-class texture dataset: every sample is one Gaussian
/// blob envelope carrying a multiplicative ripple, and the label is the
/// ripple's wavelength — coarse (6 px at factor 1) versus fine (3 px).
/// Amplitude, radius, placement, mass, and contrast statistics are identical
/// across classes, so band-matched filtering is the only way to tell them
/// apart. Blob geometry and wavelengths scale with `scale_factor`; per-pixel
/// sensor noise (uniform in [0, noise]) stays at pixel scale regardless, so
/// the structure-to-noise scale ratio grows with the factor exactly as it
/// does when a fixed sensor images the same scene at higher resolution.
/// Deterministic under seed.
LabeledDataset synth_blobs(Index n, int image_size, double scale_factor,
                           std::uint64_t seed, double noise = 0.20);

}  // namespace njet
