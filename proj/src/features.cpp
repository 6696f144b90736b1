#include "stepnav/features.hpp"

#include <algorithm>
#include <cmath>

namespace stepnav {

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (int i = 1; i <= 10; ++i) n.push_back("x_hi_" + std::to_string(i));
    for (int i = 1; i <= 6; ++i) n.push_back("x_lo_" + std::to_string(i));
    return n;
  }();
  return names;
}

void FeatureWindow::push(const NavState& state) {
  const EulerAngles e = euler_from_dcm(state.attitude);
  push(Sample{state.velocity, e.roll, e.pitch, e.yaw});
}

void FeatureWindow::push(const Sample& s) {
  samples_.push_back(s);
  while (samples_.size() > capacity_) samples_.pop_front();
}

FeatureVector extract_features(const FeatureWindow& window, const NoiseDescriptor& noise) {
  if (window.size() == 0) throw ValidationError("feature window is empty");
  if (noise.gyro_var < 0.0 || noise.accel_var < 0.0 || noise.aiding_var < 0.0) {
    throw ValidationError("noise variances must be >= 0");
  }
  FeatureVector out;
  out.warmup = !window.full();
  Features& x = out.values;

  x[0] = std::sqrt(noise.gyro_var);
  x[1] = std::sqrt(noise.accel_var);
  x[2] = std::sqrt(noise.aiding_var);
  x[3] = noise.dtau;

  double m[6] = {0, 0, 0, 0, 0, 0};
  for (const auto& s : window.samples()) {
    m[0] += s.velocity.x() * s.velocity.x();
    m[1] += s.velocity.y() * s.velocity.y();
    m[2] += s.velocity.z() * s.velocity.z();
    m[3] += s.roll * s.roll;
    m[4] += s.pitch * s.pitch;
    m[5] += s.yaw * s.yaw;
  }
  const double n = static_cast<double>(window.size());
  for (int i = 0; i < 6; ++i) x[4 + i] = m[i] / n;

  const double qg = std::max(noise.gyro_var, kFeatureVarianceFloor);
  const double qa = std::max(noise.accel_var, kFeatureVarianceFloor);
  const double r = std::max(noise.aiding_var, kFeatureVarianceFloor);
  out.floored = qg != noise.gyro_var || qa != noise.accel_var || r != noise.aiding_var;

  x[10] = std::sqrt(noise.gyro_var + noise.accel_var + noise.aiding_var);
  x[11] = std::sqrt(1.0 / qg + 1.0 / qa + 1.0 / r);
  x[12] = (std::sqrt(noise.gyro_var) + std::sqrt(noise.accel_var)) / std::sqrt(r);
  x[13] = noise.aiding_var * noise.dtau;
  x[14] = window.samples().back().velocity.norm();
  x[15] = x[12] * x[14];
  return out;
}

}  // namespace stepnav
