#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stepnav/es_ekf.hpp"
#include "stepnav/sensors.hpp"
#include "stepnav/trajectory.hpp"

namespace stepnav {

class SvmModel;

/// Everything needed to reproduce one simulated run.
struct ScenarioConfig {
  TrajectorySpec trajectory;
  AidingKind aiding = AidingKind::Gnss;
  double dt = 0.01;    // s, mechanization step of the fixed policy
  double dtau = 1.0;   // s, aiding interval
  ProcessNoiseConfig imu_noise;
  Vec3 aiding_var = Vec3::Zero();  // (m/s)^2, per axis
  std::uint64_t seed = 0;
  int mc_n = 1;
  bool joseph_form = false;

  void validate() const;

  /// Noise the filter is tuned with: the simulated IMU noise (bias random
  /// walks taken from the config) and the aiding variance floored so that
  /// noise-free runs keep an invertible innovation covariance.
  ProcessNoiseConfig filter_process() const { return imu_noise; }
  MeasurementNoiseConfig filter_measurement() const;
};

inline constexpr double kMinMeasurementVariance = 1e-12;

/// INS/GNSS step-size sensitivity setup on the lines-and-curves path.
ScenarioConfig gnss_sensitivity_config();
/// INS/GNSS adaptive-step scenario (GNSS 0.02 (m/s)^2, accel 0.04, gyro 0.003 std).
ScenarioConfig gnss_adaptive_config();
/// INS/DVL adaptive-step scenario on the AUV rectangle.
ScenarioConfig dvl_adaptive_config();

/// State the navigation loop hands to step controllers and observers.
struct TickInfo {
  TimeMs t_start = 0;
  TimeMs step = 0;           // length of the step just taken
  const ImuSample* imu = nullptr;
  const AidingMeasurement* aiding = nullptr;  // set when an update ran
  const NavState* state = nullptr;            // after propagation and update
  const Mat12* covariance = nullptr;
  Vec3 truth_velocity = Vec3::Zero();
  double speed_error = 0.0;
  std::int64_t iteration = 0;

  TimeMs t_end() const { return t_start + step; }
};

/// Chooses the mechanization step. `next_step` is consulted after every
/// tick; the value it returns is used from the next tick on.
class StepController {
 public:
  virtual ~StepController() = default;
  virtual TimeMs initial_step(const NavState& initial) = 0;
  virtual TimeMs next_step(const TickInfo& tick) = 0;
};

struct FixedStep {
  double dt = 0.01;
};

/// Speed-threshold rule: dt_min above the threshold, dt_max at or below it.
struct SpeedThreshold {
  double threshold = 5.0;
  double dt_min = 0.002;
  double dt_max = 0.04;
};

struct AdaptiveOptions {
  double dt0 = 0.002;
  double tuning_rate = 0.0;  // s; 0 means one aiding interval
  bool hysteresis = true;
  int history = 20;
  int warmup_samples = 50;
};

struct Learned {
  std::shared_ptr<const SvmModel> model;
  AdaptiveOptions options;
};

using StepSizePolicy = std::variant<FixedStep, SpeedThreshold, Learned>;

std::string policy_name(const StepSizePolicy& p);

/// Parses "fixed:<dt>", "speed:<threshold>" or "learned:<path>"; the
/// learned form only records the path, loading is up to the caller.
struct PolicySpec {
  StepSizePolicy policy;
  std::string model_path;
};
PolicySpec parse_policy(const std::string& text);

struct HealthStats {
  double max_symmetry_error = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double max_orthonormality_error = 0.0;
  std::int64_t checks = 0;
  std::int64_t violations = 0;

  bool ok() const { return violations == 0; }
  void merge(const HealthStats& o);
};

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kEigenvalueTolerance = -1e-12;
inline constexpr double kOrthonormalityTolerance = 1e-9;

struct TraceRow {
  double time_s;
  double step_size_s;
  double speed_error_mps;
  double p_trace_vel;
  bool updated;
};

/// Contiguous interval run at one step size.
struct TimelineSegment {
  double t_start_s;
  double t_end_s;
  double dt_s;
};

struct RunMetrics {
  double mean_speed_error = 0.0;  // time average of |dv|
  double rmse_speed_error = 0.0;  // sqrt of the time average of |dv|^2
  double max_speed_error = 0.0;
  std::int64_t iterations = 0;
  std::int64_t updates = 0;
  std::int64_t large_angle_updates = 0;
  bool diverged = false;
  std::string divergence_message;
  HealthStats health;
  std::vector<TraceRow> trace;
  std::vector<TimelineSegment> timeline;
};

struct RunOptions {
  bool check_health = false;
  bool record_trace = false;
  std::function<void(const TickInfo&)> observer;
};

/// Algorithm loop: propagate at the controller's step, run an es-EKF update
/// at every aiding epoch, score the speed error against truth after every
/// tick. A step never straddles an aiding epoch or the end of the run; it is
/// shortened to land on it. Filter divergence ends the run with partial
/// metrics and `diverged` set.
RunMetrics run_loop(SensorSource& source, StepController& controller, const ScenarioConfig& config,
                    const RunOptions& options = {});

std::unique_ptr<StepController> make_controller(const StepSizePolicy& policy, const ScenarioConfig& config);

/// Ground truth for a config; cached by callers that run many seeds.
std::shared_ptr<const GroundTruth> make_ground_truth(const ScenarioConfig& config);

RunMetrics run_scenario(const ScenarioConfig& config, const StepSizePolicy& policy,
                        const RunOptions& options = {});
RunMetrics run_scenario(const ScenarioConfig& config, const StepSizePolicy& policy,
                        std::shared_ptr<const GroundTruth> gt, std::uint64_t seed,
                        const RunOptions& options = {});

struct MonteCarloResult {
  RunMetrics mean;                 // field-wise average; health merged
  std::vector<double> run_mean;    // per-run mean speed error
  std::vector<double> run_rmse;    // per-run speed RMSE
};

/// N independently seeded runs (run i uses run_seed(config.seed, i)).
/// `jobs` > 1 spreads runs over threads; results do not depend on it.
MonteCarloResult monte_carlo(const ScenarioConfig& config, const StepSizePolicy& policy, int n,
                             int jobs = 1, std::shared_ptr<const GroundTruth> gt = nullptr,
                             bool check_health = false);

/// Time average of |est - truth| for equally spaced samples.
double speed_error(const std::vector<Vec3>& estimated, const std::vector<Vec3>& truth);

/// Step sizes of the sensitivity study, seconds.
std::vector<double> default_step_candidates();

struct SweepRow {
  double dt;
  double mean_speed_error;
  double rmse_speed_error;
  double max_speed_error;
  std::int64_t iterations;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double best_dt = 0.0;        // largest candidate with error <= bound
  bool out_of_bound = false;   // no candidate met the bound
};

/// Evaluates every candidate with `mc_n` runs each. The criterion uses the
/// Monte-Carlo mean speed error.
SweepResult sweep_step_sizes(const ScenarioConfig& config, std::vector<double> candidates, double bound,
                             int mc_n, int jobs = 1);

/// Largest candidate whose error is within the bound.
SweepResult select_step(std::vector<SweepRow> rows, double bound);

/// Sum over segments of duration / step. Throws if the segments do not
/// tile [0, T] or a segment is not a whole number of steps.
std::int64_t count_iterations(const std::vector<TimelineSegment>& timeline, double duration);

}  // namespace stepnav
