#pragma once

#include <string>

#include "njet/resample.hpp"

namespace njet {

/// Reads a binary PGM (P5) or PPM (P6) file with maxval <= 255 into an Image
/// with values scaled to [0, 1]. PGM gives 1 channel, PPM gives 3.
Image read_pnm(const std::string& path);

/// Writes a 1-channel image as binary PGM, clamping values to [0, 1].
void write_pgm(const std::string& path, const Image& image);

/// Writes a 3-channel image as binary PPM, clamping values to [0, 1].
void write_ppm(const std::string& path, const Image& image);

/// Writes an arbitrary real-valued grid as a 0-centered PGM: value 0 maps to
/// gray 128 and +/- the largest magnitude map to 255 / 0.
void write_pgm_centered(const std::string& path, const ConstGridMap& grid);

}  // namespace njet
