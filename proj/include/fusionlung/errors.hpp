#pragma once

#include <stdexcept>
#include <string>

namespace fusionlung {

/// Base class for all library failures. CLI maps these to exit code 1
/// (runtime) or 2 (config/usage) depending on the concrete type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& what) : Error("decode error: " + what) {}
};

class MissingMask : public Error {
 public:
  explicit MissingMask(const std::string& id) : Error("image '" + id + "' has no mask"), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class EmptyDataset : public Error {
 public:
  explicit EmptyDataset(const std::string& root)
      : Error("no image/mask pairs found under '" + root + "'") {}
};

class InvalidSplit : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Thrown when two maps that must be pixel-aligned disagree in shape.
class ShapeMismatch : public ShapeError {
 public:
  using ShapeError::ShapeError;
};

class Diverged : public Error {
 public:
  using Error::Error;
};

}  // namespace fusionlung
