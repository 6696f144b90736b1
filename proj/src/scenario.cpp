#include "stepnav/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "stepnav/adaptive.hpp"
#include "stepnav/baseline.hpp"

namespace stepnav {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

class FixedController final : public StepController {
 public:
  explicit FixedController(TimeMs step) : step_(step) {}
  TimeMs initial_step(const NavState&) override { return step_; }
  TimeMs next_step(const TickInfo&) override { return step_; }

 private:
  TimeMs step_;
};

class SpeedController final : public StepController {
 public:
  explicit SpeedController(const SpeedThreshold& p) : p_(p) {
    to_ms(p.dt_min, "dt_min");
    to_ms(p.dt_max, "dt_max");
  }
  TimeMs initial_step(const NavState& s) override { return pick(s.velocity.norm()); }
  TimeMs next_step(const TickInfo& tick) override { return pick(tick.state->velocity.norm()); }

 private:
  TimeMs pick(double speed) const { return to_ms(baseline_policy(speed, p_.threshold, p_.dt_min, p_.dt_max)); }
  SpeedThreshold p_;
};

class HealthMonitor {
 public:
  explicit HealthMonitor(bool enabled) : enabled_(enabled) {}

  void covariance(const Mat12& P) {
    if (!enabled_) return;
    const double sym = symmetry_error(P);
    const double eig = min_eigenvalue(P);
    stats_.max_symmetry_error = std::max(stats_.max_symmetry_error, sym);
    stats_.min_eigenvalue = std::min(stats_.min_eigenvalue, eig);
    ++stats_.checks;
    if (!(sym <= kSymmetryTolerance) || !(eig >= kEigenvalueTolerance)) ++stats_.violations;
  }

  void attitude(const Mat3& T) {
    if (!enabled_) return;
    const double e = orthonormality_error(T);
    stats_.max_orthonormality_error = std::max(stats_.max_orthonormality_error, e);
    ++stats_.checks;
    if (!(e <= kOrthonormalityTolerance)) ++stats_.violations;
  }

  const HealthStats& stats() const { return stats_; }

 private:
  bool enabled_;
  HealthStats stats_;
};

double parse_number(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("malformed " + what + ": '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void ScenarioConfig::validate() const {
  trajectory.validate();
  imu_noise.validate();
  if ((aiding_var.array() < 0.0).any() || !aiding_var.allFinite()) {
    throw ValidationError("aiding variance must be finite and >= 0");
  }
  const TimeMs step = to_ms(dt, "dt");
  const TimeMs interval = to_ms(dtau, "dtau");
  to_ms(trajectory.duration, "duration");
  if (step <= 0) throw ValidationError("dt must be > 0");
  if (interval < step) throw ValidationError("dtau must be >= dt");
  if (mc_n < 1) throw ValidationError("mc_n must be >= 1");
}

MeasurementNoiseConfig ScenarioConfig::filter_measurement() const {
  MeasurementNoiseConfig m;
  m.variance = aiding_var.cwiseMax(kMinMeasurementVariance);
  return m;
}

ScenarioConfig gnss_sensitivity_config() {
  ScenarioConfig c;
  c.trajectory = lines_and_curves_preset(240.0);
  c.aiding = AidingKind::Gnss;
  c.dt = 0.01;
  c.dtau = 1.0;
  c.aiding_var = Vec3::Constant(0.004 * 0.004);
  c.imu_noise.accel_var = Vec3::Constant(0.02 * 0.02);
  c.imu_noise.gyro_var = Vec3::Constant(0.002 * 0.002);
  c.mc_n = 100;
  c.seed = 1;
  return c;
}

ScenarioConfig gnss_adaptive_config() {
  ScenarioConfig c = gnss_sensitivity_config();
  c.dt = 0.002;
  c.aiding_var = Vec3::Constant(0.02);
  c.imu_noise.accel_var = Vec3::Constant(0.04 * 0.04);
  c.imu_noise.gyro_var = Vec3::Constant(0.003 * 0.003);
  c.mc_n = 1;
  return c;
}

ScenarioConfig dvl_adaptive_config() {
  ScenarioConfig c;
  c.trajectory = auv_rectangle_preset(40.0);
  c.trajectory.origin = {32.0 * kDeg, 34.0 * kDeg, -5.0};
  c.aiding = AidingKind::Dvl;
  c.dt = 0.002;
  c.dtau = 1.0;
  c.aiding_var = Vec3::Constant(0.004);
  c.imu_noise.accel_var = Vec3::Constant(0.02 * 0.02);
  c.imu_noise.gyro_var = Vec3::Constant(0.002 * 0.002);
  c.seed = 1;
  return c;
}

std::string policy_name(const StepSizePolicy& p) {
  std::ostringstream os;
  if (const auto* f = std::get_if<FixedStep>(&p)) {
    os << "fixed:" << f->dt;
  } else if (const auto* s = std::get_if<SpeedThreshold>(&p)) {
    os << "speed:" << s->threshold;
  } else {
    os << "learned";
  }
  return os.str();
}

PolicySpec parse_policy(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ParseError("policy must look like kind:value, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string value = text.substr(colon + 1);
  if (kind == "fixed") return {FixedStep{parse_number(value, "fixed step")}, {}};
  if (kind == "speed") {
    SpeedThreshold s;
    s.threshold = parse_number(value, "speed threshold");
    return {s, {}};
  }
  if (kind == "learned") {
    if (value.empty()) throw ParseError("learned policy needs a model path");
    return {Learned{}, value};
  }
  throw ParseError("unknown policy kind '" + kind + "'");
}

void HealthStats::merge(const HealthStats& o) {
  max_symmetry_error = std::max(max_symmetry_error, o.max_symmetry_error);
  min_eigenvalue = std::min(min_eigenvalue, o.min_eigenvalue);
  max_orthonormality_error = std::max(max_orthonormality_error, o.max_orthonormality_error);
  checks += o.checks;
  violations += o.violations;
}

RunMetrics run_loop(SensorSource& source, StepController& controller, const ScenarioConfig& config,
                    const RunOptions& options) {
  const TimeMs total = source.duration();
  const TimeMs interval = to_ms(config.dtau, "dtau");
  if (interval <= 0) throw ValidationError("dtau must be > 0");

  NavState state = source.initial_state();
  TimeMs step = controller.initial_step(state);
  if (step <= 0) throw ValidationError("step controller returned a non-positive step");

  EsEkf filter(config.filter_process(), config.filter_measurement(), FilterOptions{config.joseph_form});
  filter.initialize(state, to_seconds(step));

  HealthMonitor health(options.check_health);
  health.covariance(filter.covariance());
  health.attitude(state.attitude);

  RunMetrics m;
  double sum_e = 0.0, sum_e2 = 0.0, elapsed = 0.0;
  TimeMs t = 0;
  TimeMs next_epoch = interval;
  TimeMs segment_start = 0;

  try {
    while (t < total) {
      const TimeMs h = std::min({step, next_epoch - t, total - t});
      const double dt = to_seconds(h);
      const ImuSample imu = source.imu(t, h);

      filter.predict(state, imu.specific_force - state.accel_bias, dt);
      health.covariance(filter.covariance());
      state = propagate_nav(state, imu, dt);
      ++m.iterations;

      const TimeMs t_end = t + h;
      std::optional<AidingMeasurement> meas;
      if (t_end == next_epoch) {
        meas = source.aiding(t_end);
        next_epoch += interval;
        if (meas) {
          const FilterUpdate u = filter.update(state, *meas);
          ++m.updates;
          if (u.large_angle) ++m.large_angle_updates;
          health.covariance(filter.covariance());
        }
      }
      if (!state.velocity.allFinite() || !state.attitude.allFinite()) {
        throw FilterDivergenceError("navigation state became non-finite");
      }
      health.attitude(state.attitude);

      const Vec3 truth = source.truth_velocity(t_end);
      const double e = (state.velocity - truth).norm();
      sum_e += e * dt;
      sum_e2 += e * e * dt;
      elapsed += dt;
      m.max_speed_error = std::max(m.max_speed_error, e);

      TickInfo tick;
      tick.t_start = t;
      tick.step = h;
      tick.imu = &imu;
      tick.aiding = meas ? &*meas : nullptr;
      tick.state = &state;
      tick.covariance = &filter.covariance();
      tick.truth_velocity = truth;
      tick.speed_error = e;
      tick.iteration = m.iterations;
      if (options.observer) options.observer(tick);
      if (options.record_trace) {
        m.trace.push_back({to_seconds(t_end), dt, e, filter.covariance().block<3, 3>(0, 0).trace(),
                           meas.has_value()});
      }

      t = t_end;
      const TimeMs next = controller.next_step(tick);
      if (next <= 0) throw ValidationError("step controller returned a non-positive step");
      if (next != step) {
        if (t > segment_start) m.timeline.push_back({to_seconds(segment_start), to_seconds(t), to_seconds(step)});
        segment_start = t;
        step = next;
      }
    }
  } catch (const FilterDivergenceError& e) {
    m.diverged = true;
    m.divergence_message = e.what();
  }
  if (t > segment_start) m.timeline.push_back({to_seconds(segment_start), to_seconds(t), to_seconds(step)});

  if (elapsed > 0.0) {
    m.mean_speed_error = sum_e / elapsed;
    m.rmse_speed_error = std::sqrt(sum_e2 / elapsed);
  }
  m.health = health.stats();
  return m;
}

std::unique_ptr<StepController> make_controller(const StepSizePolicy& policy, const ScenarioConfig& config) {
  if (const auto* f = std::get_if<FixedStep>(&policy)) {
    return std::make_unique<FixedController>(to_ms(f->dt, "fixed step"));
  }
  if (const auto* s = std::get_if<SpeedThreshold>(&policy)) return std::make_unique<SpeedController>(*s);
  return make_adaptive_controller(std::get<Learned>(policy), config);
}

std::shared_ptr<const GroundTruth> make_ground_truth(const ScenarioConfig& config) {
  return std::make_shared<const GroundTruth>(gen_trajectory(config.trajectory, 0.001));
}

RunMetrics run_scenario(const ScenarioConfig& config, const StepSizePolicy& policy, const RunOptions& options) {
  config.validate();
  return run_scenario(config, policy, make_ground_truth(config), run_seed(config.seed, 0), options);
}

RunMetrics run_scenario(const ScenarioConfig& config, const StepSizePolicy& policy,
                        std::shared_ptr<const GroundTruth> gt, std::uint64_t seed, const RunOptions& options) {
  SimulatedSource source(std::move(gt), config.aiding, to_ms(config.dtau, "dtau"), config.imu_noise,
                         config.aiding_var, seed);
  auto controller = make_controller(policy, config);
  return run_loop(source, *controller, config, options);
}

MonteCarloResult monte_carlo(const ScenarioConfig& config, const StepSizePolicy& policy, int n, int jobs,
                             std::shared_ptr<const GroundTruth> gt, bool check_health) {
  config.validate();
  if (n < 1) throw ValidationError("Monte-Carlo count must be >= 1");
  if (!gt) gt = make_ground_truth(config);

  std::vector<RunMetrics> runs(static_cast<std::size_t>(n));
  RunOptions options;
  options.check_health = check_health;
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      runs[static_cast<std::size_t>(i)] =
          run_scenario(config, policy, gt, run_seed(config.seed, static_cast<std::uint64_t>(i)), options);
    }
  };
  const int threads = std::clamp(jobs, 1, n);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  MonteCarloResult r;
  RunMetrics& avg = r.mean;
  for (const auto& run : runs) {
    avg.mean_speed_error += run.mean_speed_error;
    avg.rmse_speed_error += run.rmse_speed_error;
    avg.max_speed_error += run.max_speed_error;
    avg.iterations += run.iterations;
    avg.updates += run.updates;
    avg.large_angle_updates += run.large_angle_updates;
    avg.diverged = avg.diverged || run.diverged;
    if (avg.divergence_message.empty()) avg.divergence_message = run.divergence_message;
    avg.health.merge(run.health);
    r.run_mean.push_back(run.mean_speed_error);
    r.run_rmse.push_back(run.rmse_speed_error);
  }
  avg.mean_speed_error /= n;
  avg.rmse_speed_error /= n;
  avg.max_speed_error /= n;
  avg.iterations = static_cast<std::int64_t>(std::llround(static_cast<double>(avg.iterations) / n));
  avg.updates = static_cast<std::int64_t>(std::llround(static_cast<double>(avg.updates) / n));
  if (n == 1) r.mean = runs.front();
  return r;
}

double speed_error(const std::vector<Vec3>& estimated, const std::vector<Vec3>& truth) {
  if (estimated.size() != truth.size()) throw ValidationError("speed_error: stream lengths differ");
  if (estimated.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) sum += (estimated[i] - truth[i]).norm();
  return sum / static_cast<double>(estimated.size());
}

std::vector<double> default_step_candidates() {
  return {0.002, 0.004, 0.008, 0.01, 0.016, 0.02, 0.032, 0.04, 0.05, 0.1};
}

SweepResult select_step(std::vector<SweepRow> rows, double bound) {
  if (rows.empty()) throw ValidationError("sweep needs at least one candidate");
  if (!(bound > 0.0)) throw ValidationError("error bound must be > 0");
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.dt < b.dt; });
  SweepResult r;
  r.out_of_bound = true;
  r.best_dt = rows.front().dt;
  for (const auto& row : rows) {
    if (row.mean_speed_error <= bound) {
      r.best_dt = row.dt;
      r.out_of_bound = false;
    }
  }
  r.rows = std::move(rows);
  return r;
}

SweepResult sweep_step_sizes(const ScenarioConfig& config, std::vector<double> candidates, double bound,
                             int mc_n, int jobs) {
  config.validate();
  const auto gt = make_ground_truth(config);
  std::vector<SweepRow> rows;
  for (double dt : candidates) {
    ScenarioConfig c = config;
    c.dt = dt;
    const auto mc = monte_carlo(c, FixedStep{dt}, mc_n, jobs, gt);
    rows.push_back({dt, mc.mean.mean_speed_error, mc.mean.rmse_speed_error, mc.mean.max_speed_error,
                    mc.mean.iterations});
  }
  return select_step(std::move(rows), bound);
}

std::int64_t count_iterations(const std::vector<TimelineSegment>& timeline, double duration) {
  const TimeMs total = to_ms(duration, "duration");
  TimeMs cursor = 0;
  std::int64_t count = 0;
  for (const auto& seg : timeline) {
    const TimeMs a = to_ms(seg.t_start_s, "segment start");
    const TimeMs b = to_ms(seg.t_end_s, "segment end");
    const TimeMs step = to_ms(seg.dt_s, "segment step");
    if (a != cursor || b <= a || step <= 0) throw ValidationError("timeline segments must tile [0, T]");
    if ((b - a) % step != 0) throw ValidationError("timeline segment is not a whole number of steps");
    count += (b - a) / step;
    cursor = b;
  }
  if (cursor != total) throw ValidationError("timeline does not cover [0, T]");
  return count;
}

}  // namespace stepnav
