#include "stepnav/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace stepnav {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct ProfilePoint {
  double start;
  double heading;
  double speed;
};

/// Piecewise constant-rate course/speed profile.
class SegmentProfile {
 public:
  SegmentProfile(std::vector<TrajectorySegment> segs, double heading0, double speed0)
      : segs_(std::move(segs)) {
    double t = 0.0, h = heading0, v = speed0;
    starts_.reserve(segs_.size());
    for (const auto& s : segs_) {
      starts_.push_back({t, h, v});
      t += s.duration;
      h += s.turn_rate * s.duration;
      v += s.accel * s.duration;
    }
  }

  /// Course and speed at time t (seconds).
  std::pair<double, double> evaluate(double t) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), t,
                               [](double x, const ProfilePoint& p) { return x < p.start; });
    const std::size_t i = it == starts_.begin() ? 0 : static_cast<std::size_t>(it - starts_.begin()) - 1;
    const double tau = t - starts_[i].start;
    return {starts_[i].heading + segs_[i].turn_rate * tau, starts_[i].speed + segs_[i].accel * tau};
  }

 private:
  std::vector<TrajectorySegment> segs_;
  std::vector<ProfilePoint> starts_;
};

void append_hold(std::vector<TrajectorySegment>& segs, double duration) {
  double total = 0.0;
  for (const auto& s : segs) total += s.duration;
  if (total < duration) segs.push_back({duration - total, 0.0, 0.0});
}

double bearing(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::atan2(b[1] - a[1], b[0] - a[0]);
}

double distance(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  return std::hypot(b[0] - a[0], b[1] - a[1]);
}

}  // namespace

std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::StraightLine: return "straight-line";
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::Rectangle: return "rectangle";
    case TrajectoryKind::FigureEight: return "figure-8";
    case TrajectoryKind::WaypointSpline: return "waypoint-spline";
    case TrajectoryKind::Segments: return "segments";
  }
  return "unknown";
}

TrajectoryKind trajectory_kind_from_string(std::string_view s) {
  for (auto k : {TrajectoryKind::StraightLine, TrajectoryKind::Circle, TrajectoryKind::Rectangle,
                 TrajectoryKind::FigureEight, TrajectoryKind::WaypointSpline, TrajectoryKind::Segments}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown trajectory kind: " + std::string(s));
}

void TrajectorySpec::validate() const {
  if (!(duration > 0.0)) throw ValidationError("trajectory duration must be > 0");
  if (!(speed >= 0.0)) throw ValidationError("trajectory speed must be >= 0");
  if (std::abs(origin.latitude) >= std::numbers::pi / 2) {
    throw ValidationError("trajectory origin latitude must be strictly inside (-90, 90) deg");
  }
  switch (kind) {
    case TrajectoryKind::Circle:
    case TrajectoryKind::FigureEight:
    case TrajectoryKind::Rectangle:
    case TrajectoryKind::WaypointSpline:
      if (!(radius > 0.0)) throw ValidationError("curved trajectories need radius > 0");
      if (!(speed > 0.0)) throw ValidationError("curved trajectories need speed > 0");
      break;
    default:
      break;
  }
  if (kind == TrajectoryKind::Rectangle && (leg_north <= 2 * radius || leg_east <= 2 * radius)) {
    throw ValidationError("rectangle legs must exceed twice the corner radius");
  }
  if (kind == TrajectoryKind::WaypointSpline && waypoints.empty()) {
    throw ValidationError("waypoint-spline needs at least one waypoint");
  }
  if (kind == TrajectoryKind::Segments) {
    double v = speed;
    for (const auto& s : segments) {
      if (!(s.duration > 0.0)) throw ValidationError("segment durations must be > 0");
      v += s.accel * s.duration;
      if (v < -1e-12) throw ValidationError("segment program drives speed negative");
    }
  }
}

std::vector<TrajectorySegment> compile_segments(const TrajectorySpec& spec) {
  spec.validate();
  std::vector<TrajectorySegment> segs;
  const double v = spec.speed;
  const double r = spec.radius;
  switch (spec.kind) {
    case TrajectoryKind::StraightLine:
      break;
    case TrajectoryKind::Circle:
      segs.push_back({spec.duration, 0.0, v / r});
      break;
    case TrajectoryKind::FigureEight: {
      const double lap = 2.0 * std::numbers::pi * r / v;
      for (double t = 0.0, sign = 1.0; t < spec.duration; t += lap, sign = -sign) {
        segs.push_back({lap, 0.0, sign * v / r});
      }
      break;
    }
    case TrajectoryKind::Rectangle: {
      const double corner = 0.5 * std::numbers::pi * r / v;
      const double legs[2] = {(spec.leg_north - 2 * r) / v, (spec.leg_east - 2 * r) / v};
      for (double t = 0.0; t < spec.duration;) {
        for (int i = 0; i < 4; ++i) {
          segs.push_back({legs[i % 2], 0.0, 0.0});
          segs.push_back({corner, 0.0, v / r});
          t += legs[i % 2] + corner;
        }
      }
      break;
    }
    case TrajectoryKind::WaypointSpline: {
      std::vector<std::array<double, 2>> pts{{0.0, 0.0}};
      pts.insert(pts.end(), spec.waypoints.begin(), spec.waypoints.end());
      const std::size_t n_legs = pts.size() - 1;
      std::vector<double> turn(n_legs + 1, 0.0), tangent(n_legs + 1, 0.0);
      for (std::size_t i = 1; i < n_legs; ++i) {
        turn[i] = wrap_angle(bearing(pts[i], pts[i + 1]) - bearing(pts[i - 1], pts[i]));
        tangent[i] = r * std::tan(std::abs(turn[i]) / 2.0);
      }
      for (std::size_t i = 0; i < n_legs; ++i) {
        const double straight = distance(pts[i], pts[i + 1]) - tangent[i] - tangent[i + 1];
        if (straight < -1e-9) {
          throw ValidationError("waypoint legs too short for the requested turn radius");
        }
        if (straight > 1e-9) segs.push_back({straight / v, 0.0, 0.0});
        if (i + 1 < n_legs && turn[i + 1] != 0.0) {
          segs.push_back({std::abs(turn[i + 1]) * r / v, 0.0, std::copysign(v / r, turn[i + 1])});
        }
      }
      break;
    }
    case TrajectoryKind::Segments:
      segs = spec.segments;
      break;
  }
  append_hold(segs, spec.duration);
  return segs;
}

GroundTruth::GroundTruth(TimeMs step, std::vector<NavState> states)
    : step_(step), states_(std::move(states)) {
  if (step_ <= 0 || states_.empty()) throw ValidationError("ground truth needs a positive step and states");
}

const NavState& GroundTruth::at(TimeMs t) const {
  if (t < 0 || t % step_ != 0 || t > duration()) {
    throw DomainError("time " + std::to_string(t) + " ms is not on the ground-truth grid");
  }
  return states_[static_cast<std::size_t>(t / step_)];
}

GroundTruth gen_trajectory(const TrajectorySpec& spec, double dt_gt) {
  const TimeMs step = to_ms(dt_gt, "ground-truth step");
  const TimeMs total = to_ms(spec.duration, "trajectory duration");
  if (step <= 0 || total % step != 0) {
    throw ValidationError("trajectory duration must be a multiple of the ground-truth step");
  }
  double heading0 = spec.heading;
  if (spec.kind == TrajectoryKind::WaypointSpline) {
    heading0 = bearing({0.0, 0.0}, spec.waypoints.front());
  }
  const SegmentProfile profile(compile_segments(spec), heading0, spec.speed);

  const auto n = static_cast<std::size_t>(total / step);
  std::vector<NavState> states(n + 1);
  const double dt = to_seconds(step);
  for (std::size_t k = 0; k <= n; ++k) {
    const auto [course, speed] = profile.evaluate(to_seconds(static_cast<TimeMs>(k) * step));
    NavState& s = states[k];
    s.velocity = Vec3(speed * std::cos(course), speed * std::sin(course), 0.0);
    s.attitude = dcm_from_euler(0.0, 0.0, course);
    if (k == 0) {
      s.position = spec.origin;
    } else {
      const NavState& prev = states[k - 1];
      const Vec3 p_dot = position_rate(prev.position, prev.velocity);
      s.position.latitude = prev.position.latitude + p_dot.x() * dt;
      s.position.longitude = wrap_angle(prev.position.longitude + p_dot.y() * dt);
      s.position.altitude = prev.position.altitude + p_dot.z() * dt;
    }
  }
  return GroundTruth(step, std::move(states));
}

ImuSample exact_imu(const GroundTruth& gt, TimeMs t0, TimeMs t1) {
  if (t1 <= t0) throw DomainError("exact_imu needs t1 > t0");
  const NavState& s0 = gt.at(t0);
  const NavState& s1 = gt.at(t1);
  const double dt = to_seconds(t1 - t0);

  const Vec3 w_ie = earth_rate_n(s0.position.latitude);
  const Vec3 w_en = transport_rate_n(s0.velocity, s0.position);
  const Vec3 accel_n = (s1.velocity - s0.velocity) / dt;
  const Vec3 f_n = accel_n - gravity_ned(s0.position.latitude, s0.position.altitude) +
                   (w_en + 2.0 * w_ie).cross(s0.velocity);

  // The orthogonalized first-order step rotates by atan(|s| dt) about s,
  // so invert that to hit the next attitude exactly.
  const Eigen::AngleAxisd rot(s0.attitude.transpose() * s1.attitude);
  Vec3 body_rate = Vec3::Zero();
  if (rot.angle() != 0.0) body_rate = rot.axis() * (std::tan(rot.angle()) / dt);

  ImuSample imu;
  imu.time = to_seconds(t0);
  imu.specific_force = s0.attitude.transpose() * f_n;
  imu.angular_rate = body_rate + s0.attitude.transpose() * (w_ie + w_en);
  return imu;
}

std::vector<ImuSample> exact_imu_stream(const GroundTruth& gt, TimeMs step) {
  if (step <= 0 || step % gt.step() != 0) throw DomainError("IMU step must be a multiple of the ground-truth step");
  std::vector<ImuSample> out;
  for (TimeMs t = 0; t + step <= gt.duration(); t += step) out.push_back(exact_imu(gt, t, t + step));
  return out;
}

TrajectorySpec lines_and_curves_preset(double duration) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::Segments;
  s.speed = 5.0;
  s.duration = duration;
  s.origin = {32.0 * kDeg, 34.0 * kDeg, 5.0};
  s.segments = {
      {30.0, 0.0, 0.0},   {15.0, 0.0, 0.1},   {30.0, 0.1, 0.0},
      {20.0, 0.0, -0.08}, {30.0, -0.1, 0.0},  {40.0, 0.0, 0.125},
      {30.0, 0.0, 0.0},   {20.0, 0.0, -0.1},  {25.0, 0.0, 0.0},
  };
  return s;
}

TrajectorySpec auv_rectangle_preset(double duration) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::Rectangle;
  s.speed = 1.0;
  s.radius = 1.5;
  s.leg_north = 12.0;
  s.leg_east = 6.0;
  s.duration = duration;
  s.origin = {32.0 * kDeg, 34.0 * kDeg, -5.0};
  return s;
}

}  // namespace stepnav
