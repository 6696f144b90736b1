#pragma once

#include "stepnav/common.hpp"

namespace stepnav {

/// WGS-84 ellipsoid and normal-gravity constants.
struct EarthParams {
  double semi_major_axis = 6378137.0;             // m
  double eccentricity_sq = 6.69437999014e-3;
  double earth_rate = 7.292115e-5;                 // rad/s
  double flattening = 1.0 / 298.257223563;
  double gravity_equator = 9.7803253359;           // m/s^2
  double somigliana_k = 0.00193185265241;
  double gravity_m = 0.00344978650684;             // w^2 a^2 b / GM
};

inline constexpr EarthParams kWgs84{};

struct GeodeticPosition {
  double latitude = 0.0;   // rad
  double longitude = 0.0;  // rad, wrapped to (-pi, pi]
  double altitude = 0.0;   // m, positive up
};

struct PrincipalRadii {
  double meridian;  // R_M
  double normal;    // R_N
};

PrincipalRadii principal_radii(double latitude, const EarthParams& p = kWgs84);

/// Geometric mean sqrt(R_M R_N); used as the single Earth radius of F_vv.
double mean_radius(double latitude, const EarthParams& p = kWgs84);

/// Somigliana normal gravity with the second-order free-air correction,
/// resolved along NED (north/east components are zero).
Vec3 gravity_ned(double latitude, double altitude, const EarthParams& p = kWgs84);

Vec3 earth_rate_n(double latitude, const EarthParams& p = kWgs84);

/// Rotation of the navigation frame relative to ECEF (craft rate).
Vec3 transport_rate_n(const Vec3& velocity, const GeodeticPosition& pos,
                      const EarthParams& p = kWgs84);

double wrap_angle(double a);

}  // namespace stepnav
