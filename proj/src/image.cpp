#include "satire/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "satire/errors.hpp"
#include "satire/jpeg.hpp"

namespace satire {

ImageBuffer::ImageBuffer(int w, int h) : ImageBuffer(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3, 0)) {}

ImageBuffer::ImageBuffer(int w, int h, std::vector<std::uint8_t> rgb)
    : width(w), height(h), pixels(std::move(rgb)) {
  if (w <= 0 || h <= 0) throw GeometryError("image dimensions must be positive");
  if (pixels.size() != static_cast<std::size_t>(w) * h * 3) {
    throw DimensionError("image " + std::to_string(w) + "x" + std::to_string(h) + " needs " +
                         std::to_string(static_cast<std::size_t>(w) * h * 3) + " bytes, got " +
                         std::to_string(pixels.size()));
  }
}

ImageBuffer ImageBuffer::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  ImageBuffer img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

ImageBuffer decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ParseError("not a PNG stream", 0);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ParseError(std::string("PNG: ") + image.message, 0);
  }
  image.format = PNG_FORMAT_RGB;
  ImageBuffer img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw ParseError("PNG: " + msg, 8);
  }
  return img;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing " + path.string());
}

ImageBuffer read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
    return jpeg_decode(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void write_image(const std::filesystem::path& path, const ImageBuffer& img, int jpeg_quality) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  write_file(path, ext == ".png" ? encode_png(img) : jpeg_encode(img, jpeg_quality));
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height) {
  if (width <= 0 || height <= 0) throw GeometryError("resize target must be positive");
  if (width == img.width && height == img.height) return img;
  ImageBuffer out(width, height);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = img.at(x0, y0, c) * (1 - tx) + img.at(x1, y0, c) * tx;
        const double bot = img.at(x0, y1, c) * (1 - tx) + img.at(x1, y1, c) * tx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(top * (1 - ty) + bot * ty, 0.0, 255.0)));
      }
    }
  }
  return out;
}

ImageBuffer synthetic_texture(int width, int height, Rng& rng) {
  std::vector<double> lum(static_cast<std::size_t>(width) * height, 0.0);

  // Value noise: random lattice, bilinear with smoothstep, octaves halve in
  // cell size and amplitude.
  double amplitude = 1.0;
  for (int cell = 32; cell >= 4; cell /= 2) {
    const int gw = width / cell + 2, gh = height / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < height; ++y) {
      const double fy = static_cast<double>(y) / cell;
      const int iy = static_cast<int>(fy);
      double ty = fy - iy;
      ty = ty * ty * (3 - 2 * ty);
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / cell;
        const int ix = static_cast<int>(fx);
        double tx = fx - ix;
        tx = tx * tx * (3 - 2 * tx);
        const double a = lattice[iy * gw + ix], b = lattice[iy * gw + ix + 1];
        const double c = lattice[(iy + 1) * gw + ix], d = lattice[(iy + 1) * gw + ix + 1];
        lum[static_cast<std::size_t>(y) * width + x] +=
            amplitude * ((a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty);
      }
    }
    amplitude *= 0.55;
  }

  double base[3], tint_x[3], tint_y[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(70, 180);
    tint_x[c] = rng.uniform(-40, 40);
    tint_y[c] = rng.uniform(-40, 40);
  }
  const double contrast = rng.uniform(35, 60);

  struct Blob {
    double cx, cy, rx, ry, shade[3];
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(rng.range(2, 4)));
  for (auto& b : blobs) {
    b.cx = rng.uniform(0, width);
    b.cy = rng.uniform(0, height);
    b.rx = rng.uniform(width * 0.1, width * 0.35);
    b.ry = rng.uniform(height * 0.1, height * 0.35);
    for (double& s : b.shade) s = rng.uniform(-45, 45);
  }

  ImageBuffer img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / width - 0.5, v = static_cast<double>(y) / height - 0.5;
      const double n = lum[static_cast<std::size_t>(y) * width + x];
      for (int c = 0; c < 3; ++c) {
        double val = base[c] + tint_x[c] * u + tint_y[c] * v + contrast * n;
        for (const auto& b : blobs) {
          const double dx = (x - b.cx) / b.rx, dy = (y - b.cy) / b.ry;
          val += b.shade[c] * std::exp(-(dx * dx + dy * dy));
        }
        val += 3.0 * rng.normal();
        img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(val, 0.0, 255.0)));
      }
    }
  }
  return img;
}

}  // namespace satire
