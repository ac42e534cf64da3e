#pragma once

#include <stdexcept>
#include <string>

namespace purm {

// Bad configuration or bad usage: maps to process exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable, corrupt, or version-incompatible input: maps to exit code 1.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace purm
