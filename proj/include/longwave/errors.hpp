#pragma once

#include <stdexcept>
#include <string>

namespace longwave {

/// Bad configuration: unsupported parameters, malformed config files.
/// CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad input data: malformed CSV, out-of-range observations, density bound
/// violations. CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical breakdown: non-finite estimates, failed diagnostics.
/// CLI exit code 4.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace longwave
