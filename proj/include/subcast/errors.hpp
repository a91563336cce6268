#pragma once

#include <stdexcept>
#include <string>

namespace subcast {

// Bad configuration, bad arguments, malformed files. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Divergence, non-finite values, degenerate decompositions. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Some work items failed but usable output was produced. CLI exit code 4.
class PartialResult : public std::runtime_error {
 public:
  explicit PartialResult(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace subcast
