#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include <lcal/cloud/gray_image.hpp>
#include <lcal/error.hpp>

namespace lcal {

namespace png_detail {

struct FileCloser {
  void operator()(std::FILE* fp) const {
    if (fp) std::fclose(fp);
  }
};

using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void error_fn(png_structp png, png_const_charp message) {
  // longjmp back into the caller's setjmp
  auto* msg = static_cast<std::string*>(png_get_error_ptr(png));
  if (msg) {
    *msg = message;
  }
  png_longjmp(png, 1);
}

inline void warning_fn(png_structp, png_const_charp) {}

inline void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

inline void flush_noop(png_structp) {}

/// Encodes rows of 8- or 16-bit samples (big-endian for 16-bit, as PNG stores them).
inline std::vector<std::uint8_t> encode(int width, int height, int color_type, int bit_depth, const std::vector<std::uint8_t>& raw) {
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, error_fn, warning_fn);
  if (!png) {
    throw IoError("png_create_write_struct failed");
  }
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;

  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(height);
  for (int v = 0; v < height; v++) {
    rows[v] = const_cast<png_bytep>(raw.data() + v * row_bytes);
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + error);
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp || std::fwrite(bytes.data(), 1, bytes.size(), fp.get()) != bytes.size()) {
    throw IoError("failed to write " + path);
  }
}

}  // namespace png_detail

/// PNG encoding of a [0, 1] grayscale image with 8 or 16 bits per sample.
inline std::vector<std::uint8_t> encode_png(const GrayImage& image, int bit_depth = 8) {
  image.validate();
  if (bit_depth != 8 && bit_depth != 16) {
    throw ArgumentError("PNG bit depth must be 8 or 16");
  }
  const double max_value = bit_depth == 8 ? 255.0 : 65535.0;
  std::vector<std::uint8_t> raw(image.pixels.size() * (bit_depth / 8));
  for (std::size_t i = 0; i < image.pixels.size(); i++) {
    const double clamped = std::clamp(image.pixels[i], 0.0, 1.0);
    const auto value = static_cast<std::uint16_t>(std::lround(clamped * max_value));
    if (bit_depth == 8) {
      raw[i] = static_cast<std::uint8_t>(value);
    } else {
      raw[2 * i] = static_cast<std::uint8_t>(value >> 8);
      raw[2 * i + 1] = static_cast<std::uint8_t>(value & 0xff);
    }
  }
  return png_detail::encode(image.width, image.height, PNG_COLOR_TYPE_GRAY, bit_depth, raw);
}

inline std::vector<std::uint8_t> encode_png(const ColorImage& image) {
  std::vector<std::uint8_t> raw;
  raw.reserve(image.pixels.size() * 3);
  for (const auto& rgb : image.pixels) {
    raw.insert(raw.end(), rgb.begin(), rgb.end());
  }
  return png_detail::encode(image.width, image.height, PNG_COLOR_TYPE_RGB, 8, raw);
}

inline void write_png(const std::string& path, const GrayImage& image, int bit_depth = 8) {
  png_detail::write_bytes(path, encode_png(image, bit_depth));
}

inline void write_png(const std::string& path, const ColorImage& image) {
  png_detail::write_bytes(path, encode_png(image));
}

/// Loads a PNG of any color type and bit depth as grayscale in [0, 1].
/// Color images are converted with Rec. 601 luma weights; alpha is ignored.
inline GrayImage load_png_gray(const std::string& path) {
  png_detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) {
    throw IoError("failed to open " + path);
  }
  png_byte signature[8];
  if (std::fread(signature, 1, 8, fp.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw FormatError(path + ": not a PNG file");
  }

  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_detail::error_fn, png_detail::warning_fn);
  if (!png) {
    throw IoError("png_create_read_struct failed");
  }
  png_infop info = png_create_info_struct(png);

  GrayImage image;
  std::vector<std::uint8_t> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": " + error);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_tRNS_to_alpha(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);

  raw.resize(row_bytes * height);
  rows.resize(height);
  for (int v = 0; v < height; v++) {
    rows[v] = raw.data() + v * row_bytes;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const int bytes = depth / 8;
  const double max_value = depth == 16 ? 65535.0 : 255.0;
  const auto sample = [&](int u, int v, int c) {
    const std::uint8_t* p = raw.data() + v * row_bytes + (static_cast<std::size_t>(u) * channels + c) * bytes;
    return bytes == 2 ? static_cast<double>((p[0] << 8) | p[1]) : static_cast<double>(p[0]);
  };

  image = GrayImage(width, height);
  for (int v = 0; v < height; v++) {
    for (int u = 0; u < width; u++) {
      double value;
      if (channels >= 3) {
        value = 0.299 * sample(u, v, 0) + 0.587 * sample(u, v, 1) + 0.114 * sample(u, v, 2);
      } else {
        value = sample(u, v, 0);
      }
      image.at(u, v) = value / max_value;
    }
  }
  return image;
}

}  // namespace lcal
