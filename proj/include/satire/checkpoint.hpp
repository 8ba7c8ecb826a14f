#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "satire/params.hpp"

namespace satire {

// Binary checkpoint container, all integers little-endian:
//
//   magic      8 bytes  "SATCKPT\0"
//   version    u32      = kCheckpointVersion
//   meta_len   u32      followed by meta_len bytes of UTF-8 metadata text
//   count      u32      number of tensor entries
//   entry*     u32 name_len, name bytes, u32 rank, u32 dims[rank],
//              product(dims) IEEE-754 binary32 values
//
// Entries are written in name order, so identical parameters give identical
// files.
inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'T', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string metadata;
  std::map<std::string, Tensor<float>> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const std::string& metadata,
                                            const ParameterSet<float>& params);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const std::string& metadata,
                      const ParameterSet<float>& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Copies checkpoint values into `params`. The name set and every shape must
// match exactly; anything else is a ConfigError.
void load_parameters(const Checkpoint& ckpt, ParameterSet<float>& params);

}  // namespace satire
