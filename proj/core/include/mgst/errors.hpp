#pragma once

#include <stdexcept>
#include <string>

namespace mgst {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad argument value (negative threshold, p outside (0,1], ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Incompatible grid shapes or sizes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent configuration (unknown key, missing weights).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A stored tensor does not have the expected shape.
class ShapeError : public FormatError {
 public:
  ShapeError(std::string tensor, const std::string& what)
      : FormatError(what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

/// File system failure (missing file, unwritable directory).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Required external facility is unavailable (e.g. a codec hook).
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  NumericError(int component, const std::string& what)
      : Error(what), component_(component) {}
  int component() const noexcept { return component_; }

 private:
  int component_;
};

/// The kernel estimate collapsed to all zeros after clamping.
class DegenerateKernelError : public Error {
 public:
  DegenerateKernelError(int stage, const std::string& what)
      : Error(what), stage_(stage) {}
  /// 1-based stage index, or 0 when raised outside a staged run.
  int stage() const noexcept { return stage_; }

 private:
  int stage_;
};

}  // namespace mgst
