#pragma once

#include <stdexcept>
#include <string>

namespace twincount {

// Bad user input: malformed config, manifest row out of range, unknown key.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Rejection sampling could not place a cell under the overlap policy.
class PlacementError : public std::runtime_error {
 public:
  explicit PlacementError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss or gradients during training.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint container problems: bad magic, version, truncation, shape.
class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace twincount
