#pragma once

#include <array>
#include <deque>
#include <string>
#include <vector>

#include "stepnav/es_ekf.hpp"

namespace stepnav {

inline constexpr int kFeatureCount = 16;
inline constexpr int kFeatureWindow = 50;
inline constexpr double kFeatureVarianceFloor = 1e-12;

/// Ten high-level features followed by six low-level ones:
///  0..3   sqrt(Qg11), sqrt(Qa11), sqrt(R11), dtau
///  4..9   E[vN^2], E[vE^2], E[vD^2], E[roll^2], E[pitch^2], E[yaw^2]
///  10     sqrt(Qg + Qa + R)
///  11     sqrt(1/Qg + 1/Qa + 1/R)
///  12     (sqrt(Qg) + sqrt(Qa)) / sqrt(R)
///  13     R dtau
///  14     |v| of the newest sample
///  15     feature 12 times feature 14
using Features = std::array<double, kFeatureCount>;

struct FeatureVector {
  Features values{};
  bool floored = false;  // a zero variance was floored to compute 11/12
  bool warmup = false;   // window held fewer than kFeatureWindow samples
};

/// Column names used in dataset files.
const std::vector<std::string>& feature_names();

/// The last kFeatureWindow navigation samples (velocity and Euler angles).
class FeatureWindow {
 public:
  struct Sample {
    Vec3 velocity;
    double roll, pitch, yaw;
  };

  explicit FeatureWindow(std::size_t capacity = kFeatureWindow) : capacity_(capacity) {}

  void push(const NavState& state);
  void push(const Sample& s);
  void clear() { samples_.clear(); }

  std::size_t size() const { return samples_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return samples_.size() >= capacity_; }
  const std::deque<Sample>& samples() const { return samples_; }

 private:
  std::size_t capacity_;
  std::deque<Sample> samples_;
};

/// Noise scalars the features read: the first diagonal entries of the gyro,
/// accelerometer and aiding variances and the aiding interval.
struct NoiseDescriptor {
  double gyro_var = 0.0;
  double accel_var = 0.0;
  double aiding_var = 0.0;
  double dtau = 1.0;
};

FeatureVector extract_features(const FeatureWindow& window, const NoiseDescriptor& noise);

}  // namespace stepnav
