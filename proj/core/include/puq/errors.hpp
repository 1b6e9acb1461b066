#pragma once

#include <stdexcept>
#include <string>

namespace puq {

/// Violated precondition or malformed argument (bad shapes, non-finite
/// inputs, empty batches, out-of-range labels).
class InvalidInput : public std::runtime_error {
 public:
  explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem trouble: unreadable inputs, unwritable outputs.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally broken data file (wrong magic, truncated payload,
/// unknown checkpoint version).
class FormatError : public IoError {
 public:
  explicit FormatError(const std::string& msg) : IoError(msg) {}
};

/// Rejected configuration: bad field values, impossible architecture
/// geometry, mismatched checkpoint.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Broken internal invariant. Indicates a bug, not bad user input.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace puq
