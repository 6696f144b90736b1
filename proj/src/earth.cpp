#include "stepnav/earth.hpp"

#include <cmath>
#include <numbers>

namespace stepnav {

namespace {

constexpr double kLatitudeSlack = 1e-12;

void check_latitude(double latitude) {
  if (!std::isfinite(latitude) || std::abs(latitude) > std::numbers::pi / 2 + kLatitudeSlack) {
    throw DomainError("latitude out of range [-pi/2, pi/2]: " + std::to_string(latitude));
  }
}

}  // namespace

TimeMs to_ms(double s, const char* what) {
  if (!std::isfinite(s)) throw ValidationError(std::string(what) + " is not finite");
  const double ms = s * 1000.0;
  const double rounded = std::round(ms);
  if (std::abs(ms - rounded) > 1e-6) {
    throw ValidationError(std::string(what) + " must be a multiple of 1 ms, got " +
                          std::to_string(s) + " s");
  }
  return static_cast<TimeMs>(rounded);
}

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

PrincipalRadii principal_radii(double latitude, const EarthParams& p) {
  check_latitude(latitude);
  const double s = std::sin(latitude);
  const double den = 1.0 - p.eccentricity_sq * s * s;
  const double sq = std::sqrt(den);
  return {p.semi_major_axis * (1.0 - p.eccentricity_sq) / (den * sq), p.semi_major_axis / sq};
}

double mean_radius(double latitude, const EarthParams& p) {
  const auto r = principal_radii(latitude, p);
  return std::sqrt(r.meridian * r.normal);
}

Vec3 gravity_ned(double latitude, double altitude, const EarthParams& p) {
  check_latitude(latitude);
  const double s2 = std::pow(std::sin(latitude), 2);
  const double g0 = p.gravity_equator * (1.0 + p.somigliana_k * s2) /
                    std::sqrt(1.0 - p.eccentricity_sq * s2);
  const double a = p.semi_major_axis;
  const double scale = 1.0 - 2.0 / a * (1.0 + p.flattening + p.gravity_m - 2.0 * p.flattening * s2) * altitude +
                       3.0 / (a * a) * altitude * altitude;
  return {0.0, 0.0, g0 * scale};
}

Vec3 earth_rate_n(double latitude, const EarthParams& p) {
  return {p.earth_rate * std::cos(latitude), 0.0, -p.earth_rate * std::sin(latitude)};
}

Vec3 transport_rate_n(const Vec3& velocity, const GeodeticPosition& pos, const EarthParams& p) {
  const auto r = principal_radii(pos.latitude, p);
  const double c = std::cos(pos.latitude);
  if (std::abs(c) < 1e-12 && velocity.y() != 0.0) {
    throw SingularLatitudeError("transport rate undefined at the pole with nonzero east velocity");
  }
  const double rn = r.normal + pos.altitude;
  const double rm = r.meridian + pos.altitude;
  const double tan_term = velocity.y() == 0.0 ? 0.0 : velocity.y() * std::tan(pos.latitude) / rn;
  return {velocity.y() / rn, -velocity.x() / rm, -tan_term};
}

}  // namespace stepnav
