#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "satire/image.hpp"

namespace satire {

// Baseline sequential JPEG, 4:4:4, Huffman coded with the example tables of
// the JPEG standard (Annex K.3) and the Annex K.1 quantisation tables scaled
// by the IJG quality mapping. Output depends only on (pixels, quality).
std::vector<std::uint8_t> jpeg_encode(const ImageBuffer& img, int quality);

// Decodes baseline (SOF0/SOF1) streams with one or three components, all
// sampled 1x1, including restart intervals. Anything else raises ParseError
// carrying the offending byte offset.
ImageBuffer jpeg_decode(const std::vector<std::uint8_t>& bytes);

// Quantisation table for `quality` in natural (row-major) order.
// luminance == false selects the chrominance base table.
std::array<std::uint16_t, 64> quant_table(int quality, bool luminance);

// decode(encode(img, quality))
ImageBuffer jpeg_roundtrip(const ImageBuffer& img, int quality);

}  // namespace satire
