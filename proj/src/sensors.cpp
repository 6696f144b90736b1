#include "stepnav/sensors.hpp"

#include <cmath>

namespace stepnav {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

std::uint64_t run_seed(std::uint64_t master, std::uint64_t index) { return derive_seed(master, 0, index); }

Vec3 GaussianNoise::sample(const Vec3& variance) {
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    if (variance(i) > 0.0) out(i) = std::sqrt(variance(i)) * unit_(rng_);
  }
  return out;
}

std::vector<ImuSample> synth_imu(const std::vector<ImuSample>& exact, const ProcessNoiseConfig& noise,
                                 std::uint64_t seed) {
  noise.validate();
  GaussianNoise gen(seed);
  std::vector<ImuSample> out = exact;
  for (auto& s : out) {
    if (noise.accel_var.any()) s.specific_force += gen.sample(noise.accel_var);
    if (noise.gyro_var.any()) s.angular_rate += gen.sample(noise.gyro_var);
  }
  return out;
}

std::vector<AidingMeasurement> synth_aiding(const GroundTruth& gt, AidingKind kind, const Vec3& variance,
                                            TimeMs dtau, std::uint64_t seed) {
  if (dtau <= 0) throw ValidationError("aiding interval must be > 0");
  if ((variance.array() < 0.0).any()) throw ValidationError("aiding variance must be >= 0");
  GaussianNoise gen(seed);
  std::vector<AidingMeasurement> out;
  for (TimeMs t = dtau; t <= gt.duration(); t += dtau) {
    const NavState& s = gt.at(t);
    AidingMeasurement m;
    m.frame = kind;
    m.time = to_seconds(t);
    m.velocity = kind == AidingKind::Gnss ? s.velocity : Vec3(s.attitude.transpose() * s.velocity);
    if (variance.any()) m.velocity += gen.sample(variance);
    out.push_back(m);
  }
  return out;
}

SimulatedSource::SimulatedSource(std::shared_ptr<const GroundTruth> gt, AidingKind kind, TimeMs dtau,
                                 const ProcessNoiseConfig& imu_noise, const Vec3& aiding_variance,
                                 std::uint64_t seed)
    : gt_(std::move(gt)),
      dtau_(dtau),
      imu_noise_(imu_noise),
      noise_(derive_seed(seed, kImuNoiseStream, 0)),
      aiding_(synth_aiding(*gt_, kind, aiding_variance, dtau, derive_seed(seed, kAidingNoiseStream, 0))) {
  imu_noise_.validate();
}

ImuSample SimulatedSource::imu(TimeMs t, TimeMs step) {
  ImuSample s = exact_imu(*gt_, t, t + step);
  if (imu_noise_.accel_var.any()) s.specific_force += noise_.sample(imu_noise_.accel_var);
  if (imu_noise_.gyro_var.any()) s.angular_rate += noise_.sample(imu_noise_.gyro_var);
  return s;
}

std::optional<AidingMeasurement> SimulatedSource::aiding(TimeMs t) {
  if (t <= 0 || t % dtau_ != 0) return std::nullopt;
  const auto j = static_cast<std::size_t>(t / dtau_) - 1;
  if (j >= aiding_.size()) return std::nullopt;
  return aiding_[j];
}

}  // namespace stepnav
