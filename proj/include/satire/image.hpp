#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "satire/rng.hpp"

namespace satire {

// 8-bit sRGB raster, interleaved RGB, row-major.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  ImageBuffer() = default;
  ImageBuffer(int w, int h);
  ImageBuffer(int w, int h, std::vector<std::uint8_t> rgb);

  static ImageBuffer filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }

  bool operator==(const ImageBuffer&) const = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool operator==(const Rect&) const = default;
  bool inside(int width, int height) const {
    return w > 0 && h > 0 && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
  }
};

std::vector<std::uint8_t> encode_png(const ImageBuffer& img);
ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes);

// JPEG or PNG, chosen by file signature on read and by extension on write
// (".png" writes PNG, anything else JPEG at `jpeg_quality`).
ImageBuffer read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const ImageBuffer& img, int jpeg_quality = 95);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

// Bilinear resampling with pixel-centre alignment.
ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height);

// Seeded photograph-like texture: smooth multi-octave value noise over a
// random colour gradient, a few soft blobs, and per-pixel grain.
ImageBuffer synthetic_texture(int width, int height, Rng& rng);

}  // namespace satire
