#pragma once

#include <stdexcept>
#include <string>

namespace lpld {

// Bad or inconsistent configuration values. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A required input file (manifest, checkpoint) is absent. Exit code 3.
struct MissingInputError : std::runtime_error {
  explicit MissingInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// An internal invariant was violated. Exit code 4.
struct InternalError : std::runtime_error {
  explicit InternalError(const std::string& msg) : std::runtime_error(msg) {}
};

// amplify() was called on a score vector whose background slot is exactly 1.
struct ZeroForegroundMass : std::runtime_error {
  ZeroForegroundMass() : std::runtime_error("score vector has zero foreground mass") {}
};

}  // namespace lpld
