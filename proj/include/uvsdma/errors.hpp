#pragma once

#include <stdexcept>
#include <string>

namespace uvsdma {

/// Caller violated a documented precondition (bad sizes, out-of-range
/// values, malformed inputs). These indicate a bug at the call site.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

/// Inputs are well formed but lie outside the domain where the requested
/// quantity exists (e.g. a closed form evaluated where it diverges).
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// A linear system or decision problem is singular or degenerate, so no
/// unique answer exists.
class SingularError : public std::runtime_error {
 public:
  explicit SingularError(const std::string& what) : std::runtime_error(what) {}
};

/// The request is valid but exceeds a documented size or feature limit.
class UnsupportedError : public std::runtime_error {
 public:
  explicit UnsupportedError(const std::string& what) : std::runtime_error(what) {}
};

/// A run configuration or input/output file is invalid. The command line
/// maps this to exit code 2; compute errors above map to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace uvsdma
