#pragma once

#include <stdexcept>
#include <string>

namespace vat {

/// Frustum corner ray is parallel to or diverging from the ground plane.
class InvalidViewpoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BehindCamera : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepAfterDone : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised by the PPO loss when any term evaluates to NaN or infinity.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file or flag problem. `line` is 0 when not tied to a file line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string key = {})
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        key_(std::move(key)) {}

  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

}  // namespace vat
