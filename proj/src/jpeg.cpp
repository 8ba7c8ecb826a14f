#include "satire/jpeg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "satire/errors.hpp"

namespace satire {

namespace {

// kZigzag[i] = natural-order index of the i-th coefficient in zigzag order.
constexpr std::uint8_t kZigzag[64] = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,  12, 19, 26, 33, 40, 48,
    41, 34, 27, 20, 13, 6,  7,  14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23,
    30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

constexpr std::uint8_t kLumaBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

constexpr std::uint8_t kChromaBase[64] = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99, 24, 26, 56, 99, 99, 99,
    99, 99, 47, 66, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

struct HuffmanSpec {
  std::uint8_t bits[16];
  std::vector<std::uint8_t> values;
};

const HuffmanSpec kDcLuma{{0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
                          {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};

const HuffmanSpec kDcChroma{{0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0},
                            {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}};

const HuffmanSpec kAcLuma{
    {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d},
    {0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61,
     0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08, 0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52,
     0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25,
     0x26, 0x27, 0x28, 0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45,
     0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63, 0x64,
     0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x83,
     0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99,
     0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6,
     0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3,
     0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8,
     0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};

const HuffmanSpec kAcChroma{
    {0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77},
    {0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61,
     0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91, 0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33,
     0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1, 0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18,
     0x19, 0x1a, 0x26, 0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44,
     0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59, 0x5a, 0x63,
     0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79, 0x7a,
     0x82, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97,
     0x98, 0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4,
     0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9, 0xca,
     0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7,
     0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa}};

// Orthonormal 8-point DCT-II basis: kBasis[u][x] = a(u) cos((2x+1) u pi / 16).
struct DctBasis {
  double m[8][8];
  DctBasis() {
    const double pi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(0.125) : 0.5;
      for (int x = 0; x < 8; ++x) m[u][x] = a * std::cos((2 * x + 1) * u * pi / 16.0);
    }
  }
};

const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

void fdct(const double in[64], double out[64]) {
  const auto& c = basis().m;
  double tmp[64];
  for (int y = 0; y < 8; ++y)
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int x = 0; x < 8; ++x) s += c[u][x] * in[y * 8 + x];
      tmp[y * 8 + u] = s;
    }
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double s = 0;
      for (int y = 0; y < 8; ++y) s += c[v][y] * tmp[y * 8 + u];
      out[v * 8 + u] = s;
    }
}

void idct(const double in[64], double out[64]) {
  const auto& c = basis().m;
  double tmp[64];
  for (int v = 0; v < 8; ++v)
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int u = 0; u < 8; ++u) s += c[u][x] * in[v * 8 + u];
      tmp[v * 8 + x] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0;
      for (int v = 0; v < 8; ++v) s += c[v][y] * tmp[v * 8 + x];
      out[y * 8 + x] = s;
    }
}

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

int magnitude_category(int v) {
  int a = v < 0 ? -v : v;
  int s = 0;
  while (a) {
    ++s;
    a >>= 1;
  }
  return s;
}

// ---------------------------------------------------------------- encoder

struct HuffmanCodes {
  std::uint16_t code[256] = {};
  std::uint8_t length[256] = {};

  explicit HuffmanCodes(const HuffmanSpec& spec) {
    std::uint16_t next = 0;
    std::size_t k = 0;
    for (int len = 1; len <= 16; ++len) {
      for (int i = 0; i < spec.bits[len - 1]; ++i, ++k) {
        code[spec.values[k]] = next++;
        length[spec.values[k]] = static_cast<std::uint8_t>(len);
      }
      next <<= 1;
    }
  }
};

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void put(std::uint32_t bits, int count) {
    for (int i = count - 1; i >= 0; --i) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((bits >> i) & 1u));
      if (++filled_ == 8) emit();
    }
  }

  void flush() {
    while (filled_ != 0) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | 1u);
      if (++filled_ == 8) emit();
    }
  }

 private:
  void emit() {
    out_.push_back(acc_);
    if (acc_ == 0xFF) out_.push_back(0x00);
    acc_ = 0;
    filled_ = 0;
  }

  std::vector<std::uint8_t>& out_;
  std::uint8_t acc_ = 0;
  int filled_ = 0;
};

void put_u16(std::vector<std::uint8_t>& out, int v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void write_dht(std::vector<std::uint8_t>& out, int table_class, int id, const HuffmanSpec& spec) {
  out.push_back(0xFF);
  out.push_back(0xC4);
  put_u16(out, static_cast<int>(2 + 1 + 16 + spec.values.size()));
  out.push_back(static_cast<std::uint8_t>((table_class << 4) | id));
  out.insert(out.end(), spec.bits, spec.bits + 16);
  out.insert(out.end(), spec.values.begin(), spec.values.end());
}

void encode_block(BitWriter& bw, const int coef[64], int& dc_pred, const HuffmanCodes& dc,
                  const HuffmanCodes& ac) {
  const int diff = coef[0] - dc_pred;
  dc_pred = coef[0];
  const int s = magnitude_category(diff);
  bw.put(dc.code[s], dc.length[s]);
  if (s) bw.put(static_cast<std::uint32_t>(diff < 0 ? diff + (1 << s) - 1 : diff), s);

  int run = 0;
  for (int k = 1; k < 64; ++k) {
    const int v = coef[kZigzag[k]];
    if (v == 0) {
      ++run;
      continue;
    }
    while (run > 15) {
      bw.put(ac.code[0xF0], ac.length[0xF0]);
      run -= 16;
    }
    const int sz = magnitude_category(v);
    const int symbol = (run << 4) | sz;
    bw.put(ac.code[symbol], ac.length[symbol]);
    bw.put(static_cast<std::uint32_t>(v < 0 ? v + (1 << sz) - 1 : v), sz);
    run = 0;
  }
  if (run > 0) bw.put(ac.code[0x00], ac.length[0x00]);
}

// ---------------------------------------------------------------- decoder

struct HuffmanDecoder {
  bool defined = false;
  int maxcode[18];
  int valptr[17];
  int mincode[17];
  std::vector<std::uint8_t> values;

  void build(const std::uint8_t bits[16], std::vector<std::uint8_t> vals) {
    values = std::move(vals);
    int code = 0, k = 0;
    for (int len = 1; len <= 16; ++len) {
      valptr[len] = k;
      mincode[len] = code;
      code += bits[len - 1];
      k += bits[len - 1];
      maxcode[len] = bits[len - 1] ? code - 1 : -1;
      code <<= 1;
    }
    maxcode[17] = 0x7FFFFFFF;
    defined = true;
  }
};

class Decoder {
 public:
  explicit Decoder(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

  ImageBuffer run();

 private:
  struct Component {
    int id = 0;
    int tq = 0;
    int td = 0;
    int ta = 0;
    int pred = 0;
    std::vector<double> plane;
  };

  [[noreturn]] void fail(const std::string& what, std::size_t at) const { throw ParseError("JPEG: " + what, at); }
  [[noreturn]] void fail(const std::string& what) const { fail(what, pos_); }

  std::uint8_t byte() {
    if (pos_ >= b_.size()) fail("unexpected end of stream");
    return b_[pos_++];
  }
  int u16() {
    const int hi = byte();
    return (hi << 8) | byte();
  }

  void read_dqt(std::size_t end);
  void read_dht(std::size_t end);
  void read_sof(std::size_t end);
  void read_sos(std::size_t end);
  void decode_scan(const std::vector<int>& scan_components);

  // entropy-coded segment reader
  int bit();
  int bits(int n);
  int decode_symbol(const HuffmanDecoder& h);
  void reset_bits() {
    bit_count_ = 0;
    bit_acc_ = 0;
  }

  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
  std::uint16_t qt_[4][64] = {};
  bool qt_defined_[4] = {};
  HuffmanDecoder dc_[4], ac_[4];
  std::vector<Component> comps_;
  int width_ = 0, height_ = 0;
  int blocks_x_ = 0, blocks_y_ = 0;
  int restart_interval_ = 0;
  bool frame_seen_ = false;
  int scans_done_ = 0;
  std::uint32_t bit_acc_ = 0;
  int bit_count_ = 0;
};

int Decoder::bit() {
  if (bit_count_ == 0) {
    if (pos_ >= b_.size()) fail("entropy-coded data truncated");
    std::uint8_t v = b_[pos_];
    if (v == 0xFF) {
      if (pos_ + 1 >= b_.size()) fail("entropy-coded data truncated");
      if (b_[pos_ + 1] != 0x00) fail("marker inside entropy-coded data");
      pos_ += 2;
    } else {
      ++pos_;
    }
    bit_acc_ = v;
    bit_count_ = 8;
  }
  --bit_count_;
  return static_cast<int>((bit_acc_ >> bit_count_) & 1u);
}

int Decoder::bits(int n) {
  int v = 0;
  for (int i = 0; i < n; ++i) v = (v << 1) | bit();
  return v;
}

int Decoder::decode_symbol(const HuffmanDecoder& h) {
  int code = bit();
  int len = 1;
  while (len <= 16 && code > h.maxcode[len]) {
    code = (code << 1) | bit();
    ++len;
  }
  if (len > 16) fail("invalid Huffman code");
  const int idx = h.valptr[len] + code - h.mincode[len];
  if (idx < 0 || static_cast<std::size_t>(idx) >= h.values.size()) fail("invalid Huffman code");
  return h.values[idx];
}

int extend(int v, int s) { return v < (1 << (s - 1)) ? v - (1 << s) + 1 : v; }

void Decoder::read_dqt(std::size_t end) {
  while (pos_ < end) {
    const int pq_tq = byte();
    const int precision = pq_tq >> 4, id = pq_tq & 15;
    if (id > 3 || precision > 1) fail("bad quantisation table header", pos_ - 1);
    for (int k = 0; k < 64; ++k) {
      const int v = precision ? u16() : byte();
      if (v == 0) fail("zero quantisation step");
      qt_[id][kZigzag[k]] = static_cast<std::uint16_t>(v);
    }
    qt_defined_[id] = true;
  }
}

void Decoder::read_dht(std::size_t end) {
  while (pos_ < end) {
    const std::size_t at = pos_;
    const int tc_th = byte();
    const int cls = tc_th >> 4, id = tc_th & 15;
    if (cls > 1 || id > 3) fail("bad Huffman table header", at);
    std::uint8_t counts[16];
    int total = 0;
    for (auto& c : counts) {
      c = byte();
      total += c;
    }
    if (total > 256) fail("Huffman table too large", at);
    std::vector<std::uint8_t> vals(static_cast<std::size_t>(total));
    for (auto& v : vals) v = byte();
    (cls == 0 ? dc_[id] : ac_[id]).build(counts, std::move(vals));
  }
}

void Decoder::read_sof(std::size_t end) {
  const std::size_t at = pos_;
  if (frame_seen_) fail("multiple frames", at);
  if (byte() != 8) fail("only 8-bit sample precision is supported", at);
  height_ = u16();
  width_ = u16();
  if (height_ == 0 || width_ == 0) fail("zero image dimension (DNL not supported)", at);
  const int n = byte();
  if (n != 1 && n != 3) fail("unsupported component count " + std::to_string(n), at);
  for (int i = 0; i < n; ++i) {
    Component c;
    c.id = byte();
    const int hv = byte();
    if (hv != 0x11) fail("chroma subsampling is not supported (4:4:4 only)", pos_ - 1);
    c.tq = byte();
    if (c.tq > 3) fail("bad quantisation table id", pos_ - 1);
    comps_.push_back(std::move(c));
  }
  if (pos_ != end) fail("frame header length mismatch", at);
  blocks_x_ = (width_ + 7) / 8;
  blocks_y_ = (height_ + 7) / 8;
  for (auto& c : comps_) c.plane.assign(static_cast<std::size_t>(blocks_x_) * blocks_y_ * 64, 0.0);
  frame_seen_ = true;
}

void Decoder::read_sos(std::size_t end) {
  const std::size_t at = pos_;
  if (!frame_seen_) fail("scan before frame header", at);
  const int ns = byte();
  if (ns < 1 || ns > static_cast<int>(comps_.size())) fail("bad scan component count", at);
  std::vector<int> scan;
  for (int i = 0; i < ns; ++i) {
    const int id = byte();
    const int tables = byte();
    auto it = std::find_if(comps_.begin(), comps_.end(), [&](const Component& c) { return c.id == id; });
    if (it == comps_.end()) fail("scan references unknown component", pos_ - 2);
    it->td = tables >> 4;
    it->ta = tables & 15;
    if (it->td > 3 || it->ta > 3 || !dc_[it->td].defined || !ac_[it->ta].defined) {
      fail("scan references undefined Huffman table", pos_ - 1);
    }
    if (!qt_defined_[it->tq]) fail("component uses undefined quantisation table", pos_ - 1);
    scan.push_back(static_cast<int>(it - comps_.begin()));
  }
  const int ss = byte(), se = byte(), a = byte();
  if (ss != 0 || se != 63 || a != 0) fail("progressive scans are not supported", pos_ - 3);
  if (pos_ != end) fail("scan header length mismatch", at);
  decode_scan(scan);
}

void Decoder::decode_scan(const std::vector<int>& scan) {
  for (int ci : scan) comps_[ci].pred = 0;
  reset_bits();
  const int total = blocks_x_ * blocks_y_;
  int expected_rst = 0;
  double coef[64], pixels[64];
  for (int mcu = 0; mcu < total; ++mcu) {
    if (restart_interval_ && mcu > 0 && mcu % restart_interval_ == 0) {
      reset_bits();
      if (pos_ + 1 >= b_.size() || b_[pos_] != 0xFF || b_[pos_ + 1] != 0xD0 + expected_rst) {
        fail("expected restart marker");
      }
      pos_ += 2;
      expected_rst = (expected_rst + 1) & 7;
      for (int ci : scan) comps_[ci].pred = 0;
    }
    for (int ci : scan) {
      Component& c = comps_[ci];
      std::fill(coef, coef + 64, 0.0);
      const int s = decode_symbol(dc_[c.td]);
      if (s > 11) fail("DC magnitude out of range");
      c.pred += s ? extend(bits(s), s) : 0;
      coef[0] = static_cast<double>(c.pred) * qt_[c.tq][0];
      for (int k = 1; k < 64;) {
        const int rs = decode_symbol(ac_[c.ta]);
        const int r = rs >> 4, sz = rs & 15;
        if (sz == 0) {
          if (r == 15) {
            k += 16;
            continue;
          }
          break;
        }
        k += r;
        if (k > 63) fail("AC coefficient index out of range");
        const int z = kZigzag[k];
        coef[z] = static_cast<double>(extend(bits(sz), sz)) * qt_[c.tq][z];
        ++k;
      }
      idct(coef, pixels);
      const int bx = mcu % blocks_x_, by = mcu / blocks_x_;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          c.plane[(static_cast<std::size_t>(by) * 8 + y) * blocks_x_ * 8 + bx * 8 + x] =
              std::clamp(static_cast<double>(std::lround(pixels[y * 8 + x] + 128.0)), 0.0, 255.0);
        }
    }
  }
  reset_bits();
  ++scans_done_;
}

ImageBuffer Decoder::run() {
  if (b_.size() < 2 || b_[0] != 0xFF || b_[1] != 0xD8) fail("missing SOI marker", 0);
  pos_ = 2;
  for (;;) {
    const std::size_t at = pos_;
    if (byte() != 0xFF) fail("expected marker", at);
    int marker = byte();
    while (marker == 0xFF) marker = byte();  // fill bytes
    if (marker == 0xD9) break;
    if (marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) continue;
    const std::size_t seg = pos_;
    const int len = u16();
    if (len < 2 || seg + static_cast<std::size_t>(len) > b_.size()) fail("segment length exceeds stream", seg);
    const std::size_t end = seg + static_cast<std::size_t>(len);
    switch (marker) {
      case 0xDB: read_dqt(end); break;
      case 0xC4: read_dht(end); break;
      case 0xC0:
      case 0xC1: read_sof(end); break;
      case 0xDD:
        restart_interval_ = u16();
        break;
      case 0xDA: read_sos(end); continue;  // pos_ now follows entropy data
      default:
        if ((marker >= 0xC2 && marker <= 0xCF) && marker != 0xC4 && marker != 0xC8 && marker != 0xCC) {
          fail("unsupported JPEG process (SOF" + std::to_string(marker - 0xC0) + ")", at);
        }
        break;  // APPn, COM and others are skipped
    }
    if (pos_ > end) fail("segment overran its length", seg);
    pos_ = end;
  }
  if (!frame_seen_ || scans_done_ == 0) fail("no image data before EOI");

  ImageBuffer img(width_, height_);
  const std::size_t stride = static_cast<std::size_t>(blocks_x_) * 8;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * stride + x;
      if (comps_.size() == 1) {
        const auto v = static_cast<std::uint8_t>(comps_[0].plane[i]);
        img.at(x, y, 0) = img.at(x, y, 1) = img.at(x, y, 2) = v;
        continue;
      }
      const double Y = comps_[0].plane[i], cb = comps_[1].plane[i] - 128.0, cr = comps_[2].plane[i] - 128.0;
      img.at(x, y, 0) = clamp_byte(Y + 1.402 * cr);
      img.at(x, y, 1) = clamp_byte(Y - 0.344136 * cb - 0.714136 * cr);
      img.at(x, y, 2) = clamp_byte(Y + 1.772 * cb);
    }
  }
  return img;
}

}  // namespace

std::array<std::uint16_t, 64> quant_table(int quality, bool luminance) {
  if (quality < 1 || quality > 100) {
    throw ConfigError("JPEG quality must be in 1..100, got " + std::to_string(quality));
  }
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  const std::uint8_t* base = luminance ? kLumaBase : kChromaBase;
  std::array<std::uint16_t, 64> t{};
  for (int i = 0; i < 64; ++i) t[i] = static_cast<std::uint16_t>(std::clamp((base[i] * scale + 50) / 100, 1, 255));
  return t;
}

std::vector<std::uint8_t> jpeg_encode(const ImageBuffer& img, int quality) {
  const auto qluma = quant_table(quality, true);
  const auto qchroma = quant_table(quality, false);
  if (img.width > 65535 || img.height > 65535) throw GeometryError("image too large for baseline JPEG");

  std::vector<std::uint8_t> out = {0xFF, 0xD8};
  // APP0 / JFIF 1.01, no thumbnail
  const std::uint8_t app0[] = {0xFF, 0xE0, 0x00, 0x10, 'J', 'F', 'I', 'F', 0x00, 0x01,
                               0x01, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00};
  out.insert(out.end(), std::begin(app0), std::end(app0));
  for (int t = 0; t < 2; ++t) {
    const auto& q = t == 0 ? qluma : qchroma;
    out.push_back(0xFF);
    out.push_back(0xDB);
    put_u16(out, 67);
    out.push_back(static_cast<std::uint8_t>(t));
    for (int k = 0; k < 64; ++k) out.push_back(static_cast<std::uint8_t>(q[kZigzag[k]]));
  }
  out.push_back(0xFF);
  out.push_back(0xC0);
  put_u16(out, 17);
  out.push_back(8);
  put_u16(out, img.height);
  put_u16(out, img.width);
  out.push_back(3);
  for (int c = 0; c < 3; ++c) {
    out.push_back(static_cast<std::uint8_t>(c + 1));
    out.push_back(0x11);
    out.push_back(c == 0 ? 0 : 1);
  }
  write_dht(out, 0, 0, kDcLuma);
  write_dht(out, 1, 0, kAcLuma);
  write_dht(out, 0, 1, kDcChroma);
  write_dht(out, 1, 1, kAcChroma);
  const std::uint8_t sos[] = {0xFF, 0xDA, 0x00, 0x0C, 0x03, 0x01, 0x00, 0x02,
                              0x11, 0x03, 0x11, 0x00, 0x3F, 0x00};
  out.insert(out.end(), std::begin(sos), std::end(sos));

  static const HuffmanCodes dc_luma(kDcLuma), ac_luma(kAcLuma), dc_chroma(kDcChroma), ac_chroma(kAcChroma);
  BitWriter bw(out);
  int pred[3] = {0, 0, 0};
  const int bx_count = (img.width + 7) / 8, by_count = (img.height + 7) / 8;
  double block[3][64], freq[64];
  int coef[64];
  for (int by = 0; by < by_count; ++by) {
    for (int bx = 0; bx < bx_count; ++bx) {
      for (int y = 0; y < 8; ++y) {
        const int sy = std::min(by * 8 + y, img.height - 1);  // edge replication
        for (int x = 0; x < 8; ++x) {
          const int sx = std::min(bx * 8 + x, img.width - 1);
          const double r = img.at(sx, sy, 0), g = img.at(sx, sy, 1), b = img.at(sx, sy, 2);
          block[0][y * 8 + x] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
          block[1][y * 8 + x] = -0.168736 * r - 0.331264 * g + 0.5 * b;
          block[2][y * 8 + x] = 0.5 * r - 0.418688 * g - 0.081312 * b;
        }
      }
      for (int c = 0; c < 3; ++c) {
        const auto& q = c == 0 ? qluma : qchroma;
        fdct(block[c], freq);
        for (int i = 0; i < 64; ++i) {
          const long v = std::lround(freq[i] / q[i]);
          coef[i] = static_cast<int>(std::clamp(v, i == 0 ? -2047L : -1023L, i == 0 ? 2047L : 1023L));
        }
        encode_block(bw, coef, pred[c], c == 0 ? dc_luma : dc_chroma, c == 0 ? ac_luma : ac_chroma);
      }
    }
  }
  bw.flush();
  out.push_back(0xFF);
  out.push_back(0xD9);
  return out;
}

ImageBuffer jpeg_decode(const std::vector<std::uint8_t>& bytes) { return Decoder(bytes).run(); }

ImageBuffer jpeg_roundtrip(const ImageBuffer& img, int quality) { return jpeg_decode(jpeg_encode(img, quality)); }

}  // namespace satire
