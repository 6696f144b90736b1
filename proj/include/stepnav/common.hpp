#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stepnav {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Simulation time is kept on an integer millisecond grid so that aiding
// epochs, step-size switches and ground-truth lookups never depend on
// floating-point modulo arithmetic.
using TimeMs = std::int64_t;

constexpr double kMsToS = 1e-3;

inline double to_seconds(TimeMs t) { return static_cast<double>(t) * kMsToS; }

/// Converts seconds to the millisecond grid; throws if `s` is not on it.
TimeMs to_ms(double s, const char* what = "time");

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

/// A latitude at (or numerically at) a pole where cos(lat) divides.
class SingularLatitudeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "singular_latitude"; }
};

class FilterDivergenceError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "filter_divergence"; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "validation"; }
};

class ParseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parse"; }
};

}  // namespace stepnav
