#pragma once

#include <stdexcept>
#include <string>

namespace protofaith {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad caller-supplied values (out-of-range fractions, empty sets, ...).
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

/// Inconsistent model/layer configuration (shape mismatches, unknown rules).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// File parsing / serialization failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Broken internal invariant; indicates a bug, maps to exit code 2 in the CLI.
class InternalError : public Error {
 public:
  explicit InternalError(const std::string& msg) : Error(msg) {}
};

/// Similarity ratio requested against a zero maximum similarity score.
class DegenerateTargetError : public ArgumentError {
 public:
  explicit DegenerateTargetError(const std::string& msg) : ArgumentError(msg) {}
};

}  // namespace protofaith
