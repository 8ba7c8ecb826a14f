#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace satire {

// Plain-text configuration: one "key = value" per line, '#' starts a comment,
// blank lines ignored. Malformed lines and repeated keys are ConfigErrors.
struct KeyValues {
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<int> lines;  // source line of each entry

  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::string& path);
};

int kv_int(const std::string& key, const std::string& value);
std::uint64_t kv_u64(const std::string& key, const std::string& value);
double kv_double(const std::string& key, const std::string& value);
bool kv_bool(const std::string& key, const std::string& value);  // true/false/1/0

// Shortest round-trippable decimal form.
std::string kv_format(double v);

}  // namespace satire
