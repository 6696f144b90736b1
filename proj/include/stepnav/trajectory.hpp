#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "stepnav/common.hpp"
#include "stepnav/strapdown.hpp"

namespace stepnav {

enum class TrajectoryKind { StraightLine, Circle, Rectangle, FigureEight, WaypointSpline, Segments };

std::string_view to_string(TrajectoryKind k);
TrajectoryKind trajectory_kind_from_string(std::string_view s);

/// A constant-rate piece of a level trajectory: speed changes at `accel`
/// and course at `turn_rate` (positive turns right, i.e. clockwise seen
/// from above) for `duration` seconds.
struct TrajectorySegment {
  double duration = 0.0;
  double accel = 0.0;
  double turn_rate = 0.0;
};

/// Kinematic description of a level ground-truth trajectory.
struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::StraightLine;
  double speed = 5.0;     // m/s, initial speed
  double radius = 0.0;    // m; circle / figure-8 radius, corner radius otherwise
  double duration = 240.0;
  double heading = 0.0;   // rad, initial course from north
  double leg_north = 0.0; // m, rectangle side along the initial course
  double leg_east = 0.0;  // m, rectangle side across it
  std::vector<std::array<double, 2>> waypoints;  // local north/east offsets, m
  std::vector<TrajectorySegment> segments;       // explicit program for kind Segments
  GeodeticPosition origin{32.0 * 0.017453292519943295, 34.0 * 0.017453292519943295, 5.0};

  void validate() const;
};

/// The segment program a spec expands to; it covers at least `duration`.
std::vector<TrajectorySegment> compile_segments(const TrajectorySpec& spec);

/// Ground truth sampled on a fine millisecond grid. States carry zero bias.
class GroundTruth {
 public:
  GroundTruth(TimeMs step, std::vector<NavState> states);

  TimeMs step() const { return step_; }
  TimeMs duration() const { return step_ * static_cast<TimeMs>(states_.size() - 1); }
  const std::vector<NavState>& states() const { return states_; }

  /// State at `t`, which must lie on the grid.
  const NavState& at(TimeMs t) const;

 private:
  TimeMs step_;
  std::vector<NavState> states_;
};

/// Generates a kinematically consistent level trajectory. Course and speed
/// are analytic in time; position is integrated with the same forward-Euler
/// position rate the mechanization uses.
GroundTruth gen_trajectory(const TrajectorySpec& spec, double dt_gt = 0.001);

/// Exact IMU for one mechanization step: the specific force and angular
/// rate that make `propagate_nav` map the ground-truth state at `t0` onto
/// the one at `t1` (up to the position integration grid).
ImuSample exact_imu(const GroundTruth& gt, TimeMs t0, TimeMs t1);

/// Exact IMU for every tick of a uniform grid with spacing `step`.
std::vector<ImuSample> exact_imu_stream(const GroundTruth& gt, TimeMs step);

/// Preset shaped like the lines-and-curves vehicle path used for the
/// INS/GNSS studies: 240 s at 5 m/s initial speed from (32 deg, 34 deg, 5 m).
TrajectorySpec lines_and_curves_preset(double duration = 240.0);

/// Rectangle at constant depth for the AUV studies (1 m/s, 40 s).
TrajectorySpec auv_rectangle_preset(double duration = 40.0);

}  // namespace stepnav
