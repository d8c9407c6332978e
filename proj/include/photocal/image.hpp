#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace photocal {

/// Row-major grayscale image with intensities nominally in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct ImageSize {
  int width = 0;
  int height = 0;
};

/// 8-bit RGB buffer, used for signed difference visualizations.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel
};

/// Reads an 8/16-bit grayscale PNG or a binary PGM (P5); colour PNGs are
/// converted to luma. Intensities are mapped linearly to [0, 1].
Image read_image(const std::string& path);

/// Writes PNG or PGM according to the file extension. Values are clamped to
/// [0, 1] before quantization to `bit_depth` (8 or 16).
void write_image(const std::string& path, const Image& img, int bit_depth = 16);

void write_png(const std::string& path, const Image& img, int bit_depth);
void write_pgm(const std::string& path, const Image& img, int bit_depth);
void write_png(const std::string& path, const RgbImage& img);

}  // namespace photocal
