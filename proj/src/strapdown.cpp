#include "stepnav/strapdown.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stepnav {

Vec3 position_rate(const GeodeticPosition& pos, const Vec3& velocity) {
  const auto r = principal_radii(pos.latitude);
  const double c = std::cos(pos.latitude);
  if (std::abs(c) < 1e-12) {
    throw SingularLatitudeError("position rate undefined at the pole");
  }
  return {velocity.x() / (r.meridian + pos.altitude),
          velocity.y() / (c * (r.normal + pos.altitude)),
          -velocity.z()};
}

Vec3 nav_frame_rate(const GeodeticPosition& pos, const Vec3& velocity) {
  return earth_rate_n(pos.latitude) + transport_rate_n(velocity, pos);
}

Vec3 velocity_rate(const NavState& state, const Vec3& specific_force_body) {
  const Vec3 w_ie = earth_rate_n(state.position.latitude);
  const Vec3 w_en = transport_rate_n(state.velocity, state.position);
  const Vec3 coriolis = (w_en + 2.0 * w_ie).cross(state.velocity);
  return state.attitude * specific_force_body +
         gravity_ned(state.position.latitude, state.position.altitude) - coriolis;
}

Mat3 orthonormalize(const Mat3& dcm) {
  Eigen::JacobiSVD<Mat3> svd(dcm, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Mat3 attitude_step(const Mat3& dcm, const Vec3& omega_ib_b, const Vec3& omega_in_n, double dt) {
  if (dt == 0.0) return dcm;
  const Vec3 omega_in_b = dcm.transpose() * omega_in_n;
  const Mat3 next = dcm + dcm * skew(omega_ib_b - omega_in_b) * dt;
  return orthonormalize(next);
}

Mat3 dcm_from_euler(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  Mat3 m;
  m << cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy,
       cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy,
       -sp,     sr * cp,                cr * cp;
  return m;
}

EulerAngles euler_from_dcm(const Mat3& dcm) {
  EulerAngles e;
  const double s = std::clamp(-dcm(2, 0), -1.0, 1.0);
  e.pitch = std::asin(s);
  if (std::abs(std::abs(e.pitch) - std::numbers::pi / 2) < 1e-6) {
    // Roll and yaw are not separable; yaw is pinned to zero.
    e.gimbal_lock = true;
    e.yaw = 0.0;
    e.roll = std::atan2(e.pitch > 0 ? dcm(0, 1) : -dcm(0, 1), dcm(1, 1));
    return e;
  }
  e.roll = std::atan2(dcm(2, 1), dcm(2, 2));
  e.yaw = std::atan2(dcm(1, 0), dcm(0, 0));
  return e;
}

NavState propagate_nav(const NavState& state, const ImuSample& imu, double dt) {
  if (!(dt > 0.0)) throw DomainError("propagate_nav requires dt > 0");
  const Vec3 f = imu.specific_force - state.accel_bias;
  const Vec3 w = imu.angular_rate - state.gyro_bias;

  const Vec3 p_dot = position_rate(state.position, state.velocity);
  const Vec3 v_dot = velocity_rate(state, f);
  const Vec3 w_in = nav_frame_rate(state.position, state.velocity);

  NavState next = state;
  next.position.latitude += p_dot.x() * dt;
  next.position.longitude = wrap_angle(state.position.longitude + p_dot.y() * dt);
  next.position.altitude += p_dot.z() * dt;
  next.velocity += v_dot * dt;
  next.attitude = attitude_step(state.attitude, w, w_in, dt);
  return next;
}

double orthonormality_error(const Mat3& dcm) {
  return (dcm.transpose() * dcm - Mat3::Identity()).norm();
}

}  // namespace stepnav
