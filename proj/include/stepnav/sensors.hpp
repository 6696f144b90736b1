#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "stepnav/es_ekf.hpp"
#include "stepnav/trajectory.hpp"

namespace stepnav {

/// Counter-based seed splitting (splitmix64 finalizer over the mixed
/// triple). Independent of evaluation order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

/// Seed of Monte-Carlo run `index` under a master seed. A single run uses
/// index 0.
std::uint64_t run_seed(std::uint64_t master, std::uint64_t index);

enum NoiseStream : std::uint64_t { kImuNoiseStream = 1, kAidingNoiseStream = 2 };

/// Per-axis zero-mean white Gaussian noise. Components with zero variance
/// draw nothing and stay exactly zero.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : rng_(seed) {}

  Vec3 sample(const Vec3& variance);

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_{0.0, 1.0};
};

/// Adds white noise to an exact IMU stream: f + w_a, w + w_g, one draw per
/// axis and tick.
std::vector<ImuSample> synth_imu(const std::vector<ImuSample>& exact, const ProcessNoiseConfig& noise,
                                 std::uint64_t seed);

/// Velocity measurements at t = j * dtau for j = 1 .. floor(T / dtau).
/// GNSS reports NED velocity, DVL the body-frame velocity.
std::vector<AidingMeasurement> synth_aiding(const GroundTruth& gt, AidingKind kind, const Vec3& variance,
                                            TimeMs dtau, std::uint64_t seed);

/// Where the navigation loop gets its inputs from.
class SensorSource {
 public:
  virtual ~SensorSource() = default;

  virtual TimeMs duration() const = 0;
  virtual NavState initial_state() const = 0;

  /// IMU sample covering [t, t + step).
  virtual ImuSample imu(TimeMs t, TimeMs step) = 0;

  /// Aiding measurement stamped exactly at `t`, if one exists.
  virtual std::optional<AidingMeasurement> aiding(TimeMs t) = 0;

  virtual Vec3 truth_velocity(TimeMs t) const = 0;
};

/// Exact IMU from ground truth plus noise drawn tick by tick, so the noise
/// realization follows whatever step sequence the caller requests.
class SimulatedSource final : public SensorSource {
 public:
  SimulatedSource(std::shared_ptr<const GroundTruth> gt, AidingKind kind, TimeMs dtau,
                  const ProcessNoiseConfig& imu_noise, const Vec3& aiding_variance, std::uint64_t seed);

  TimeMs duration() const override { return gt_->duration(); }
  NavState initial_state() const override { return gt_->at(0); }
  ImuSample imu(TimeMs t, TimeMs step) override;
  std::optional<AidingMeasurement> aiding(TimeMs t) override;
  Vec3 truth_velocity(TimeMs t) const override { return gt_->at(t).velocity; }

 private:
  std::shared_ptr<const GroundTruth> gt_;
  TimeMs dtau_;
  ProcessNoiseConfig imu_noise_;
  GaussianNoise noise_;
  std::vector<AidingMeasurement> aiding_;
};

}  // namespace stepnav
