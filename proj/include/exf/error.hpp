#pragma once

#include <stdexcept>
#include <string>

namespace exf {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape mismatches, out-of-range parameters, empty inputs.
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& msg) : Error(msg) {}
};

// Inputs that are structurally valid but numerically degenerate:
// zero rows, coincident batches (mu_i = 0), all-identical embeddings.
class DegenerateInput : public Error {
 public:
  explicit DegenerateInput(const std::string& msg) : Error(msg) {}
};

// Configuration and file-format problems; the CLI maps these to exit 1.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class ParseError : public ConfigError {
 public:
  explicit ParseError(const std::string& msg) : ConfigError(msg) {}
};

}  // namespace exf
