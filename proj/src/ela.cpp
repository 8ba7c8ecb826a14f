#include "satire/ela.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <string>

#include "satire/errors.hpp"
#include "satire/jpeg.hpp"

namespace satire {

double ElaMap::mean() const {
  if (values.empty()) return 0.0;
  const std::uint64_t total = std::accumulate(values.begin(), values.end(), std::uint64_t{0});
  return static_cast<double>(total) / static_cast<double>(values.size());
}

Mask Mask::from_rect(int w, int h, const Rect& r) {
  Mask m(w, h);
  for (int y = std::max(r.y, 0); y < std::min(r.y + r.h, h); ++y)
    for (int x = std::max(r.x, 0); x < std::min(r.x + r.w, w); ++x) m.on[static_cast<std::size_t>(y) * w + x] = 1;
  return m;
}

ElaMap ela(const ImageBuffer& img, int quality, double amplification) {
  if (!(amplification > 0.0)) throw ConfigError("ELA amplification must be positive");
  const ImageBuffer resaved = jpeg_roundtrip(img, quality);
  ElaMap map;
  map.width = img.width;
  map.height = img.height;
  map.quality = quality;
  map.amplification = amplification;
  map.values.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    map.values[i] = static_cast<std::uint8_t>(std::abs(int{img.pixels[i]} - int{resaved.pixels[i]}));
  }
  return map;
}

ImageBuffer ela_to_image(const ElaMap& map) {
  std::vector<std::uint8_t> px(map.values.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::min(255L, std::lround(map.values[i] * map.amplification)));
  }
  return ImageBuffer(map.width, map.height, std::move(px));
}

ImageBuffer ela_raw_image(const ElaMap& map) { return ImageBuffer(map.width, map.height, map.values); }

ImageBuffer resave_chain(const ImageBuffer& img, int quality, int k) {
  if (k < 1) throw UsageError("resave_chain needs k >= 1, got " + std::to_string(k));
  ImageBuffer out = jpeg_roundtrip(img, quality);
  for (int i = 1; i < k; ++i) out = jpeg_roundtrip(out, quality);
  return out;
}

std::pair<ImageBuffer, SpliceRecord> synth_splice(const ImageBuffer& host, const ImageBuffer& donor, const Rect& rect,
                                                  int host_quality, int donor_quality) {
  if (!rect.inside(host.width, host.height)) {
    throw GeometryError("splice rect (" + std::to_string(rect.x) + "," + std::to_string(rect.y) + " " +
                        std::to_string(rect.w) + "x" + std::to_string(rect.h) + ") not inside host " +
                        std::to_string(host.width) + "x" + std::to_string(host.height));
  }
  if (donor.width < rect.w || donor.height < rect.h) {
    throw GeometryError("donor " + std::to_string(donor.width) + "x" + std::to_string(donor.height) +
                        " smaller than splice rect " + std::to_string(rect.w) + "x" + std::to_string(rect.h));
  }
  ImageBuffer out = jpeg_roundtrip(host, host_quality);
  const ImageBuffer patch_src = jpeg_roundtrip(donor, donor_quality);
  const bool same_place = rect.inside(donor.width, donor.height);
  const int ox = same_place ? rect.x : 0, oy = same_place ? rect.y : 0;
  for (int y = 0; y < rect.h; ++y)
    for (int x = 0; x < rect.w; ++x)
      for (int c = 0; c < 3; ++c) out.at(rect.x + x, rect.y + y, c) = patch_src.at(ox + x, oy + y, c);

  SpliceRecord rec;
  rec.rect = rect;
  rec.host_quality = host_quality;
  rec.donor_quality = donor_quality;
  rec.mask = Mask::from_rect(host.width, host.height, rect);
  return {std::move(out), std::move(rec)};
}

std::pair<ImageBuffer, SpliceRecord> random_splice(Rng& rng, int size, int host_quality, int donor_quality,
                                                   bool donor_is_host, int min_side) {
  if (min_side < 1 || min_side > size / 2) throw ConfigError("splice min side must be in 1..size/2");
  const ImageBuffer host = synthetic_texture(size, size, rng);
  const ImageBuffer donor = donor_is_host ? host : synthetic_texture(size, size, rng);
  Rect r;
  r.w = rng.range(min_side, size / 2);
  r.h = rng.range(min_side, size / 2);
  r.x = rng.range(0, size - r.w);
  r.y = rng.range(0, size - r.h);
  return synth_splice(host, donor, r, host_quality, donor_quality);
}

RegionStats ela_region_stats(const ElaMap& map, const Mask& mask) {
  if (mask.width != map.width || mask.height != map.height) {
    throw DimensionError("mask " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                         " does not match ELA map " + std::to_string(map.width) + "x" + std::to_string(map.height));
  }
  std::uint64_t sum_in = 0, sum_out = 0, n_in = 0, n_out = 0;
  for (std::size_t p = 0; p < mask.on.size(); ++p) {
    const std::uint64_t s = std::uint64_t{map.values[3 * p]} + map.values[3 * p + 1] + map.values[3 * p + 2];
    if (mask.on[p]) {
      sum_in += s;
      ++n_in;
    } else {
      sum_out += s;
      ++n_out;
    }
  }
  if (n_in == 0) throw DataError("ELA region stats: mask selects no pixels");
  if (n_out == 0) throw DataError("ELA region stats: mask covers the whole image, outside region is empty");
  RegionStats st;
  st.mean_in = static_cast<double>(sum_in) / (3.0 * static_cast<double>(n_in));
  st.mean_out = static_cast<double>(sum_out) / (3.0 * static_cast<double>(n_out));
  st.ratio = st.mean_in / std::max(st.mean_out, 1e-6);
  return st;
}

}  // namespace satire
