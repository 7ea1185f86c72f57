#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace usbcf {

/// Dense 0-based position of a user or item inside a RatingMatrix.
using Index = std::int32_t;

/// External identifier as it appears in the rating files.
using EntityId = std::int64_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, unknown names, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing files, unreadable streams, network failures, checksum mismatch.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data. Carries the 1-based line number
/// when the problem is tied to one record (0 otherwise).
class DataError : public IoError {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : IoError(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  double span() const { return max - min; }
  bool contains(double r) const { return r >= min && r <= max; }
  double clamp(double r) const { return r < min ? min : (r > max ? max : r); }
};

}  // namespace usbcf
