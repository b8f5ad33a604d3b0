#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oclb {

/// Root of every error thrown by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed container bytes, bad magic/version/dtype, or a missing tensor file.
class FormatError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class NumericsError : public Error {
public:
  using Error::Error;
};

class MatchError : public Error {
public:
  using Error::Error;
};

class ShiftError : public Error {
public:
  using Error::Error;
};

/// A loaded dataset violates an invariant. Carries the offending scene when known.
class ValidationError : public Error {
public:
  static constexpr std::ptrdiff_t kNoScene = -1;

  explicit ValidationError(const std::string& what, std::ptrdiff_t scene = kNoScene)
      : Error(scene == kNoScene ? what : "scene " + std::to_string(scene) + ": " + what),
        scene_(scene) {}

  std::ptrdiff_t scene() const noexcept { return scene_; }

private:
  std::ptrdiff_t scene_;
};

}  // namespace oclb
