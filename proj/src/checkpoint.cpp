#include "satire/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace satire {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ParseError("checkpoint truncated", pos_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::string& metadata,
                                            const ParameterSet<float>& params) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(metadata.size()));
  out.insert(out.end(), metadata.begin(), metadata.end());
  put_u32(out, static_cast<std::uint32_t>(params.tensors().size()));
  for (const auto& [name, t] : params.tensors()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.data) put_f32(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(8) != std::string(kCheckpointMagic, 8)) throw ParseError("not a checkpoint (bad magic)", 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
  }
  Checkpoint ckpt;
  ckpt.metadata = r.str(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::size_t at = r.pos();
    std::string name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw ParseError("entry " + name + " has invalid rank", at);
    Shape shape;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(r.u32());
      if (shape.back() == 0) throw ParseError("entry " + name + " has a zero dimension", at);
      n *= shape.back();
    }
    r.need(n * 4);
    std::vector<float> data(n);
    for (auto& v : data) v = std::bit_cast<float>(r.u32());
    if (!ckpt.tensors.emplace(name, Tensor<float>(shape, std::move(data), true)).second) {
      throw ParseError("duplicate entry " + name, at);
    }
  }
  if (!r.done()) throw ParseError("trailing bytes after last entry", r.pos());
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const std::string& metadata,
                      const ParameterSet<float>& params) {
  const auto bytes = encode_checkpoint(metadata, params);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_parameters(const Checkpoint& ckpt, ParameterSet<float>& params) {
  if (ckpt.tensors.size() != params.tensors().size()) {
    throw ConfigError("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                      " tensors, model expects " + std::to_string(params.tensors().size()));
  }
  for (auto& [name, t] : params.tensors()) {
    auto it = ckpt.tensors.find(name);
    if (it == ckpt.tensors.end()) throw ConfigError("checkpoint lacks parameter " + name);
    if (it->second.shape != t.shape) {
      throw ConfigError("checkpoint parameter " + name + " has shape " + shape_str(it->second.shape) +
                        ", model expects " + shape_str(t.shape));
    }
    t.data = it->second.data;
    t.zero_grad();
  }
}

}  // namespace satire
