#include "njet/image_io.hpp"

#include <cstdint>
#include <fstream>
#include <vector>

namespace njet {

namespace {

// Skips whitespace and '#' comment lines between header tokens.
int next_header_int(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  if (!in) throw std::runtime_error("malformed PNM header");
  return value;
}

void write_pnm_bytes(const std::string& path, const std::string& magic, Index h,
                     Index w, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << magic << "\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::uint8_t quantize(double v) {
  if (v <= 0.0) return 0;
  if (v >= 1.0) return 255;
  return static_cast<std::uint8_t>(v * 255.0 + 0.5);
}

}  // namespace

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  in >> magic;
  Index channels;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw std::runtime_error("unsupported PNM magic '" + magic + "' in " + path);
  }
  const Index w = next_header_int(in);
  const Index h = next_header_int(in);
  const int maxval = next_header_int(in);
  if (maxval <= 0 || maxval > 255)
    throw std::runtime_error("unsupported PNM maxval in " + path);
  in.get();  // single whitespace after maxval

  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(channels * h * w));
  in.read(reinterpret_cast<char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
    throw std::runtime_error("truncated PNM data in " + path);

  Image image;
  image.channels = channels;
  image.height = h;
  image.width = w;
  image.data.resize(channels * h * w);
  // PNM interleaves channels per pixel; Image stores planes.
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < channels; ++c)
        image.at(c, y, x) =
            bytes[static_cast<std::size_t>((y * w + x) * channels + c)] /
            static_cast<double>(maxval);
  return image;
}

void write_pgm(const std::string& path, const Image& image) {
  require(image.channels == 1, "write_pgm: expected 1 channel");
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(image.height * image.width));
  for (Index i = 0; i < image.data.size(); ++i)
    bytes[static_cast<std::size_t>(i)] = quantize(image.data[i]);
  write_pnm_bytes(path, "P5", image.height, image.width, bytes);
}

void write_ppm(const std::string& path, const Image& image) {
  require(image.channels == 3, "write_ppm: expected 3 channels");
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(3 * image.height * image.width));
  for (Index y = 0; y < image.height; ++y)
    for (Index x = 0; x < image.width; ++x)
      for (Index c = 0; c < 3; ++c)
        bytes[static_cast<std::size_t>((y * image.width + x) * 3 + c)] =
            quantize(image.at(c, y, x));
  write_pnm_bytes(path, "P6", image.height, image.width, bytes);
}

void write_pgm_centered(const std::string& path, const ConstGridMap& grid) {
  const double peak = grid.cwiseAbs().maxCoeff();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(grid.rows() * grid.cols()));
  std::size_t k = 0;
  for (Index y = 0; y < grid.rows(); ++y)
    for (Index x = 0; x < grid.cols(); ++x)
      bytes[k++] = quantize(peak > 0.0 ? 0.5 + 0.5 * grid(y, x) / peak : 0.5);
  write_pnm_bytes(path, "P5", grid.rows(), grid.cols(), bytes);
}

}  // namespace njet
