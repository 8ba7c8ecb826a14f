#include "satire/kvconfig.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "satire/errors.hpp"

namespace satire {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  const char* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || v.empty()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError("config line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    kv.entries.emplace_back(std::move(key), trim(line.substr(eq + 1)));
    kv.lines.push_back(lineno);
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

int kv_int(const std::string& key, const std::string& value) { return parse_number<int>(key, value); }
std::uint64_t kv_u64(const std::string& key, const std::string& value) { return parse_number<std::uint64_t>(key, value); }
double kv_double(const std::string& key, const std::string& value) { return parse_number<double>(key, value); }

bool kv_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string kv_format(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace satire
