#include "stepnav/es_ekf.hpp"

#include <cmath>

namespace stepnav {

Vec12 ProcessNoiseConfig::diagonal() const {
  Vec12 d;
  d << accel_var, gyro_var, accel_bias_rw_var, gyro_bias_rw_var;
  return d;
}

void ProcessNoiseConfig::validate() const {
  const Vec12 d = diagonal();
  for (int i = 0; i < 12; ++i) {
    if (!std::isfinite(d(i)) || d(i) < 0.0) {
      throw ValidationError("process noise variances must be finite and >= 0");
    }
  }
}

void MeasurementNoiseConfig::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(variance(i)) || variance(i) <= 0.0) {
      throw ValidationError("measurement noise variances must be finite and > 0");
    }
  }
}

std::string_view to_string(AidingKind k) { return k == AidingKind::Dvl ? "dvl" : "gnss"; }

AidingKind aiding_kind_from_string(std::string_view s) {
  if (s == "dvl" || s == "DVL") return AidingKind::Dvl;
  if (s == "gnss" || s == "GNSS") return AidingKind::Gnss;
  throw ValidationError("unknown aiding kind: " + std::string(s));
}

Mat12 build_F(const NavState& state, const Vec3& f_n) {
  const auto& pos = state.position;
  const Vec3& v = state.velocity;
  const auto radii = principal_radii(pos.latitude);
  const double rm_h = radii.meridian + pos.altitude;
  const double rn_h = radii.normal + pos.altitude;
  const double re = mean_radius(pos.latitude);
  const double w_ie = kWgs84.earth_rate;
  const double sin_lat = std::sin(pos.latitude);
  const double cos_lat = std::cos(pos.latitude);
  const double tan_lat = std::tan(pos.latitude);

  const Vec3 p_dot = position_rate(pos, v);
  const double lat_dot = p_dot.x();
  const double lon_dot = p_dot.y();
  const Vec3 w_in((lon_dot + w_ie) * cos_lat, -lat_dot, -(lon_dot + w_ie) * sin_lat);
  const double wn = w_in.x(), wd = w_in.z();

  Mat3 f_vv;
  f_vv.col(0) << v.z() / re, -(wd - w_ie * sin_lat), 2.0 * v.x() / re;
  f_vv.col(1) << 2.0 * wd, v.z() / re + v.x() / re * tan_lat, -2.0 * wn;
  f_vv.col(2) << -v.x() / re, wn + w_ie * cos_lat, 0.0;

  Mat3 f_ev = Mat3::Zero();
  f_ev(0, 1) = -1.0 / rn_h;
  f_ev(1, 0) = 1.0 / rm_h;
  f_ev(2, 1) = tan_lat / rn_h;

  Mat12 F = Mat12::Zero();
  F.block<3, 3>(0, 0) = f_vv;
  F.block<3, 3>(0, 3) = -skew(f_n);
  F.block<3, 3>(0, 6) = state.attitude;
  F.block<3, 3>(3, 0) = f_ev;
  F.block<3, 3>(3, 3) = -skew(w_in);
  F.block<3, 3>(3, 9) = state.attitude;
  return F;
}

Mat12 build_G(const Mat3& dcm) {
  Mat12 G = Mat12::Zero();
  G.block<3, 3>(0, 0) = dcm;
  G.block<3, 3>(3, 3) = dcm;
  G.block<3, 3>(6, 6) = Mat3::Identity();
  G.block<3, 3>(9, 9) = Mat3::Identity();
  return G;
}

Mat12 transition(const Mat12& F, double dt) {
  if (dt < 0.0) throw DomainError("transition requires dt >= 0");
  return Mat12::Identity() + F * dt;
}

Mat12 discrete_Q(const Mat12& G, const Vec12& qc, double dt) {
  if (dt < 0.0) throw DomainError("discrete_Q requires dt >= 0");
  return G * qc.asDiagonal() * G.transpose() * dt;
}

MeasurementModel measurement_model(const AidingMeasurement& meas, const NavState& state) {
  MeasurementModel m;
  switch (meas.frame) {
    case AidingKind::Gnss:
      m.H.block<3, 3>(0, 0) = Mat3::Identity();
      m.residual = state.velocity - meas.velocity;
      return m;
    case AidingKind::Dvl: {
      const Mat3 nb = state.attitude.transpose();
      m.H.block<3, 3>(0, 0) = nb;
      // With the estimate equal to (I + [eps x]) T_true the body velocity
      // error is T_n^b dv + T_n^b [v x] eps.
      m.H.block<3, 3>(0, 3) = nb * skew(state.velocity);
      m.residual = nb * state.velocity - meas.velocity;
      return m;
    }
  }
  throw ValidationError("unknown aiding frame");
}

InjectionResult inject_errors(const NavState& state, const ErrorState& dx) {
  InjectionResult r{state, false};
  const Vec3 eps = dx.misalignment();
  r.large_angle = eps.norm() >= 0.5;
  r.state.velocity -= dx.velocity();
  r.state.attitude = orthonormalize((Mat3::Identity() - skew(eps)) * state.attitude);
  r.state.accel_bias += dx.accel_bias();
  r.state.gyro_bias += dx.gyro_bias();
  return r;
}

FilterInit init_filter(const Mat12& Qd) { return {ErrorState{}, Qd}; }

double symmetry_error(const Mat12& P) {
  const double n = P.norm();
  if (n == 0.0) return 0.0;
  return (P - P.transpose()).norm() / n;
}

double min_eigenvalue(const Mat12& P) {
  Eigen::SelfAdjointEigenSolver<Mat12> es(P, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

EsEkf::EsEkf(ProcessNoiseConfig process, MeasurementNoiseConfig measurement, FilterOptions options)
    : process_(process), measurement_(measurement), options_(options), qc_(process.diagonal()) {
  process_.validate();
  measurement_.validate();
}

void EsEkf::initialize(const NavState& state, double dt) {
  P_ = init_filter(discrete_Q(build_G(state.attitude), qc_, dt)).P;
}

void EsEkf::predict(const NavState& state, const Vec3& specific_force_b, double dt) {
  const Mat12 F = build_F(state, state.attitude * specific_force_b);
  const Mat12 Phi = transition(F, dt);
  const Mat12 Qd = discrete_Q(build_G(state.attitude), qc_, dt);
  P_ = stepnav::predict<12>(P_, Phi, Qd);
}

FilterUpdate EsEkf::update(NavState& state, const AidingMeasurement& meas) {
  const MeasurementModel mm = measurement_model(meas, state);
  const Mat3 R = measurement_.variance.asDiagonal();
  const Mat12x3 K = gain<12, 3>(P_, mm.H, R);
  const auto out = stepnav::update<12, 3>(mm.residual, K, P_, mm.H, options_.joseph_form ? &R : nullptr);
  P_ = out.P;
  FilterUpdate u;
  u.dx.x = out.dx;
  auto injected = inject_errors(state, u.dx);
  state = injected.state;
  u.large_angle = injected.large_angle;
  return u;
}

}  // namespace stepnav
