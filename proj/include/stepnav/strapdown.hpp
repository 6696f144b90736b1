#pragma once

#include "stepnav/common.hpp"
#include "stepnav/earth.hpp"

namespace stepnav {

struct EulerAngles {
  double roll = 0.0;
  double pitch = 0.0;
  double yaw = 0.0;
  bool gimbal_lock = false;
};

struct ImuSample {
  Vec3 specific_force = Vec3::Zero();  // f^b, m/s^2
  Vec3 angular_rate = Vec3::Zero();    // w_ib^b, rad/s
  double time = 0.0;                   // s, start of the interval the sample covers
};

/// Full navigation solution. `attitude` is T_b^n (body to NED).
struct NavState {
  GeodeticPosition position;
  Vec3 velocity = Vec3::Zero();
  Mat3 attitude = Mat3::Identity();
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
};

/// d/dt of (lat, lon, alt).
Vec3 position_rate(const GeodeticPosition& pos, const Vec3& velocity);

/// d/dt of NED velocity given body specific force.
Vec3 velocity_rate(const NavState& state, const Vec3& specific_force_body);

/// Angular rate of the navigation frame w.r.t. inertial space, in NED.
Vec3 nav_frame_rate(const GeodeticPosition& pos, const Vec3& velocity);

/// First-order DCM update followed by symmetric orthogonalization.
Mat3 attitude_step(const Mat3& dcm, const Vec3& omega_ib_b, const Vec3& omega_in_n, double dt);

/// Nearest rotation in the Frobenius sense: T (T^T T)^{-1/2}.
Mat3 orthonormalize(const Mat3& dcm);

/// Aerospace 3-2-1 (yaw, pitch, roll) DCM, body to NED.
Mat3 dcm_from_euler(double roll, double pitch, double yaw);

EulerAngles euler_from_dcm(const Mat3& dcm);

/// One forward-Euler mechanization step with bias-corrected IMU.
NavState propagate_nav(const NavState& state, const ImuSample& imu, double dt);

/// Frobenius norm of T^T T - I.
double orthonormality_error(const Mat3& dcm);

}  // namespace stepnav
