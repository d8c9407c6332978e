#include "photocal/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "photocal/errors.hpp"

namespace photocal {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool has_suffix(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), s.rbegin(), [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) == b;
  });
}

std::uint32_t quantize(double v, std::uint32_t max_value) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint32_t>(std::lround(c * max_value));
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode PNG " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  if (depth == 16) png_set_swap(png);  // host little-endian samples
  png_read_update_info(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buffer(row_bytes * h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(w, h);
  if (depth == 16) {
    for (int y = 0; y < h; ++y) {
      const auto* row = reinterpret_cast<const std::uint16_t*>(rows[y]);
      for (int x = 0; x < w; ++x) img.at(x, y) = row[x] / 65535.0;
    }
  } else {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) img.at(x, y) = rows[y][x] / 255.0;
  }
  return img;
}

Image read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError(path + ": only binary PGM (P5) is supported");
  auto next_int = [&]() {
    int value = 0;
    while (in >> std::ws && in.peek() == '#') {
      std::string comment;
      std::getline(in, comment);
    }
    if (!(in >> value)) throw IoError(path + ": malformed PGM header");
    return value;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  in.get();  // single whitespace before raster
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError(path + ": bad PGM header");
  Image img(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (maxval < 256) {
    std::vector<unsigned char> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (!in) throw IoError(path + ": truncated PGM");
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = raw[i] / static_cast<double>(maxval);
  } else {
    std::vector<unsigned char> raw(2 * n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(2 * n));
    if (!in) throw IoError(path + ": truncated PGM");
    for (std::size_t i = 0; i < n; ++i) {
      img.pixels[i] = ((raw[2 * i] << 8) | raw[2 * i + 1]) / static_cast<double>(maxval);
    }
  }
  return img;
}

void write_png_rows(const std::string& path, int w, int h, int depth, int color,
                    const std::vector<png_bytep>& rows) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode PNG " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_image(const std::string& path) {
  if (has_suffix(path, ".pgm")) return read_pgm(path);
  return read_png(path);
}

void write_png(const std::string& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw IoError("PNG bit depth must be 8 or 16");
  const int bpp = bit_depth / 8;
  std::vector<png_byte> buffer(static_cast<std::size_t>(img.width) * img.height * bpp);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    png_bytep row = buffer.data() + static_cast<std::size_t>(y) * img.width * bpp;
    rows[y] = row;
    for (int x = 0; x < img.width; ++x) {
      if (bit_depth == 16) {
        reinterpret_cast<std::uint16_t*>(row)[x] = static_cast<std::uint16_t>(quantize(img.at(x, y), 65535));
      } else {
        row[x] = static_cast<png_byte>(quantize(img.at(x, y), 255));
      }
    }
  }
  write_png_rows(path, img.width, img.height, bit_depth, PNG_COLOR_TYPE_GRAY, rows);
}

void write_png(const std::string& path, const RgbImage& img) {
  if (img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw IoError("RGB buffer size mismatch");
  }
  std::vector<png_bytep> rows(img.height);
  auto* base = const_cast<png_bytep>(img.rgb.data());
  for (int y = 0; y < img.height; ++y) rows[y] = base + static_cast<std::size_t>(y) * img.width * 3;
  write_png_rows(path, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

void write_pgm(const std::string& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw IoError("PGM bit depth must be 8 or 16");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const std::uint32_t maxval = bit_depth == 16 ? 65535 : 255;
  out << "P5\n" << img.width << " " << img.height << "\n" << maxval << "\n";
  for (double v : img.pixels) {
    const std::uint32_t q = quantize(v, maxval);
    if (bit_depth == 16) out.put(static_cast<char>(q >> 8));
    out.put(static_cast<char>(q & 0xff));
  }
  if (!out) throw IoError("failed writing " + path);
}

void write_image(const std::string& path, const Image& img, int bit_depth) {
  if (has_suffix(path, ".pgm")) {
    write_pgm(path, img, bit_depth);
  } else {
    write_png(path, img, bit_depth);
  }
}

}  // namespace photocal
