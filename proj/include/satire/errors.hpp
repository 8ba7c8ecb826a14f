#pragma once

#include <stdexcept>
#include <string>

namespace satire {

// Error taxonomy shared by every module. The CLI maps each family to an exit
// code: usage/config -> 1, data/parse/geometry/io -> 2, numeric -> 3.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct UsageError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct GeometryError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

// JPEG/PNG/checkpoint stream failures carry the byte offset where parsing
// stopped.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace satire
