#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deepsep {

// Base of every error raised by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Requested combination is outside what the library supports
// (e.g. SURE loss on Deep RLS).
class UnsupportedError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 protected:
  struct Verbatim {};
  // Takes the message as-is (no step suffix appended).
  NumericalError(Verbatim, const std::string& what, std::size_t step)
      : Error(what), step_(step) {}

 private:
  std::size_t step_;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

class DegenerateSignalError : public Error {
 public:
  using Error::Error;
};

}  // namespace deepsep
