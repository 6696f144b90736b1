#include <doctest.h>

#include <cmath>
#include <numbers>

#include "stepnav/earth.hpp"

using namespace stepnav;

namespace {

constexpr double kPi = std::numbers::pi;

// Composite Simpson rule; the quarter meridian is the integral of R_M.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("principal radii at the equator and the pole") {
  const double a = kWgs84.semi_major_axis, e2 = kWgs84.eccentricity_sq;
  const auto eq = principal_radii(0.0);
  CHECK(eq.normal == doctest::Approx(a).epsilon(1e-15));
  CHECK(eq.meridian == doctest::Approx(a * (1.0 - e2)).epsilon(1e-15));
  const auto pole = principal_radii(kPi / 2);
  CHECK(pole.meridian == doctest::Approx(a / std::sqrt(1.0 - e2)).epsilon(1e-12));
  CHECK(pole.normal == doctest::Approx(pole.meridian).epsilon(1e-12));
}

TEST_CASE("meridian radius integrates to the quarter meridian") {
  const double q = simpson([](double phi) { return principal_radii(phi).meridian; }, 0.0, kPi / 2, 2000);
  // Published WGS-84 quarter meridian length.
  CHECK(q == doctest::Approx(10001965.7293).epsilon(1e-10));
}

TEST_CASE("normal radius is never below the meridian radius") {
  for (double deg = 0.0; deg < 90.0; deg += 7.5) {
    const auto r = principal_radii(deg * kPi / 180.0);
    CHECK(r.normal >= r.meridian);
    CHECK(mean_radius(deg * kPi / 180.0) == doctest::Approx(std::sqrt(r.normal * r.meridian)));
  }
}

TEST_CASE("latitude outside [-90, 90] deg is a domain error") {
  CHECK_THROWS_AS(principal_radii(2.0), DomainError);
  CHECK_THROWS_AS(gravity_ned(-1.6, 0.0), DomainError);
}

TEST_CASE("normal gravity matches the closed-form values") {
  CHECK(gravity_ned(0.0, 0.0).z() == doctest::Approx(9.7803253359).epsilon(1e-10));
  CHECK(gravity_ned(kPi / 2, 0.0).z() == doctest::Approx(9.8321849378).epsilon(1e-9));
  const Vec3 g = gravity_ned(0.5, 100.0);
  CHECK(g.x() == 0.0);
  CHECK(g.y() == 0.0);
  // Free-air gradient is about 3.086e-6 s^-2.
  CHECK(gravity_ned(0.5, 0.0).z() - g.z() == doctest::Approx(3.086e-4).epsilon(0.01));
}

TEST_CASE("earth rate in NED") {
  const double phi = 32.0 * kPi / 180.0;
  const Vec3 w = earth_rate_n(phi);
  CHECK(w.x() == doctest::Approx(kWgs84.earth_rate * std::cos(phi)));
  CHECK(w.y() == 0.0);
  CHECK(w.z() == doctest::Approx(-kWgs84.earth_rate * std::sin(phi)));
}

TEST_CASE("transport rate of eastward motion") {
  GeodeticPosition p{0.3, 0.0, 10.0};
  const auto r = principal_radii(p.latitude);
  const Vec3 w = transport_rate_n(Vec3(0.0, 10.0, 0.0), p);
  CHECK(w.x() == doctest::Approx(10.0 / (r.normal + 10.0)));
  CHECK(w.y() == doctest::Approx(0.0));
  CHECK(w.z() == doctest::Approx(-10.0 * std::tan(0.3) / (r.normal + 10.0)));
}

TEST_CASE("wrap_angle lands in (-pi, pi]") {
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(0.25) == doctest::Approx(0.25));
}
