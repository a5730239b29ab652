#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fusionlung/errors.hpp"

namespace fusionlung {

/// Decoded raster straight from disk. Grayscale (channels=1) or color
/// (channels=3), 8- or 16-bit intensity range, stored interleaved row-major
/// as floats so later stages never re-branch on the storage type.
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 1;
  int bit_depth = 8;  // 8 or 16
  std::vector<float> pixels;  // height*width*channels, values in [0, 2^bit_depth - 1]

  float max_value() const { return bit_depth == 16 ? 65535.0f : 255.0f; }
  float at(int y, int x, int c = 0) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  float& at(int y, int x, int c = 0) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  bool valid() const { return height >= 1 && width >= 1 && (channels == 1 || channels == 3); }
};

/// Single-channel float image, row-major. Preprocessing stages keep values
/// in [0,1] once the normalize stage has run.
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(int h, int w, float fill = 0.0f)
      : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {}

  float at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
  float& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return pixels.size(); }
};

/// Ground-truth mask; every pixel is exactly 0 or 1.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> pixels;

  BinaryMask() = default;
  BinaryMask(int h, int w, uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<size_t>(h) * w, fill) {}

  uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
  uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
};

/// Decodes a PNG/JPG file. Throws DecodeError on unreadable or malformed
/// input. 16-bit PNGs keep their full range.
RawImage read_image(const std::filesystem::path& path);

/// Decodes an 8-bit grayscale raster and binarizes with the >127 rule.
BinaryMask read_mask(const std::filesystem::path& path);

/// Reads an 8- or 16-bit grayscale PNG back into unit range ([0,1]).
GrayImage read_gray_unit(const std::filesystem::path& path);

/// Writes {0,1} mask as an 8-bit PNG with values {0,255}.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

/// Writes a unit-range image as an 8-bit grayscale PNG (round(x*255)).
void write_gray_png8(const std::filesystem::path& path, const GrayImage& img);

/// Writes a unit-range image as a 16-bit grayscale PNG (round(x*65535)).
/// This is the processed-dataset storage format: lossless enough that
/// training inputs are byte-reproducible.
void write_gray_png16(const std::filesystem::path& path, const GrayImage& img);

}  // namespace fusionlung
