#pragma once

#include <stdexcept>
#include <string>

namespace ec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Shapes that do not agree (matrix/vector sizes, checkpoint vs config).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or version-mismatched files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Wire protocol violations and transport failures.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace ec
