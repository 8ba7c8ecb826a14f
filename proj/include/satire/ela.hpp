#pragma once

#include <cstdint>
#include <vector>

#include "satire/image.hpp"

namespace satire {

// Per-pixel, per-channel error levels |img - roundtrip(img, quality)|.
// `amplification` only affects ela_to_image.
struct ElaMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;  // interleaved RGB, like ImageBuffer
  int quality = 90;
  double amplification = 10.0;

  double mean() const;
};

// Boolean raster, row-major, one byte per pixel (0 or 1).
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> on;

  Mask() = default;
  Mask(int w, int h) : width(w), height(h), on(static_cast<std::size_t>(w) * h, 0) {}
  static Mask from_rect(int w, int h, const Rect& r);

  bool at(int x, int y) const { return on[static_cast<std::size_t>(y) * width + x] != 0; }
};

struct SpliceRecord {
  Rect rect;
  int host_quality = 95;
  int donor_quality = 60;
  Mask mask;
};

struct RegionStats {
  double mean_in = 0;
  double mean_out = 0;
  double ratio = 0;
};

ElaMap ela(const ImageBuffer& img, int quality = 90, double amplification = 10.0);

// Amplified visualisation: min(255, round(value * amplification)).
ImageBuffer ela_to_image(const ElaMap& map);

// Raw values as an image (what the CNN consumes).
ImageBuffer ela_raw_image(const ElaMap& map);

// k successive decode(encode(., quality)) passes; k >= 1.
ImageBuffer resave_chain(const ImageBuffer& img, int quality, int k);

// Host roundtripped at host_quality; donor roundtripped at donor_quality and
// the rect-sized patch taken from the same coordinates when the donor covers
// them, otherwise from the donor's top-left corner; patch pasted at rect.
std::pair<ImageBuffer, SpliceRecord> synth_splice(const ImageBuffer& host, const ImageBuffer& donor, const Rect& rect,
                                                  int host_quality, int donor_quality);

// Seeded fixture: host and donor are synthetic textures of `size` x `size`
// (donor = host when `donor_is_host`); rect sides are drawn from
// [min_side, size/2] at a uniform position.
std::pair<ImageBuffer, SpliceRecord> random_splice(Rng& rng, int size, int host_quality, int donor_quality,
                                                   bool donor_is_host = false, int min_side = 24);

// Channel-averaged means inside and outside the mask.
// ratio = mean_in / max(mean_out, 1e-6).
RegionStats ela_region_stats(const ElaMap& map, const Mask& mask);

}  // namespace satire
