#pragma once

// File formats: JSON configs, models and reports; CSV datasets, timelines,
// traces and sensor logs. Every writer is deterministic so reruns compare
// byte for byte.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stepnav/dataset.hpp"
#include "stepnav/evaluation.hpp"
#include "stepnav/mrmr.hpp"
#include "stepnav/scenario.hpp"
#include "stepnav/sensors.hpp"
#include "stepnav/svm.hpp"

namespace stepnav {

using Json = nlohmann::json;

/// Shortest text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s, std::string_view what);

std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t v);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);
Json read_json(const std::filesystem::path& path);
/// Two-space indented, trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

// ---- scenario configs -----------------------------------------------------

/// Builds a config from JSON. A "preset" key (gnss_sensitivity, gnss_adaptive,
/// dvl_adaptive) supplies defaults; the remaining keys override them.
ScenarioConfig config_from_json(const Json& j);
Json config_to_json(const ScenarioConfig& c);
TrajectorySpec trajectory_from_json(const Json& j);
Json trajectory_to_json(const TrajectorySpec& s);

Json grid_to_json(const GenerationGrid& g);
/// "preset": desk | full, then per-field overrides.
GenerationGrid grid_from_json(const Json& j);

AdaptiveOptions adaptive_options_from_json(const Json& j, AdaptiveOptions base = {});

// ---- results --------------------------------------------------------------

Json metrics_to_json(const RunMetrics& m);
Json health_to_json(const HealthStats& h);
void write_timeline_csv(const std::filesystem::path& path, const std::vector<TimelineSegment>& timeline);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);
void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep);
void write_roc_csv(const std::filesystem::path& path, const std::vector<RocPoint>& roc);
void write_ranking_csv(const std::filesystem::path& path, const std::vector<MrmrEntry>& ranking);

// ---- datasets -------------------------------------------------------------

std::string dataset_csv(const Dataset& d);
/// Writes `path` and its sidecar `path` + ".json" (grid, bound, seed).
void write_dataset(const std::filesystem::path& path, const Dataset& d);
/// Reads the CSV; the sidecar is used when present.
Dataset read_dataset(const std::filesystem::path& path);

// ---- models ---------------------------------------------------------------

Json model_to_json(const SvmModel& m);
SvmModel model_from_json(const Json& j);
void save_model(const std::filesystem::path& path, const SvmModel& m);
std::shared_ptr<const SvmModel> load_model(const std::filesystem::path& path);

// ---- sensor logs ------------------------------------------------------------

/// One processed IMU interval. `aiding` is the measurement stamped at the
/// interval's end, and `truth` the reference velocity there (NaN if unknown).
struct LogRow {
  TimeMs t = 0;
  TimeMs step = 0;
  ImuSample imu;
  bool has_aiding = false;
  Vec3 aiding = Vec3::Zero();
  Vec3 truth = Vec3::Zero();
};

struct SensorLog {
  NavState initial;
  AidingKind aiding = AidingKind::Gnss;
  double dtau = 1.0;
  std::vector<LogRow> rows;

  TimeMs duration() const { return rows.empty() ? 0 : rows.back().t + rows.back().step; }
};

/// Records what a simulated run at fixed step `dt` feeds the filter, using
/// the same step shortening at aiding epochs as the navigation loop.
SensorLog export_log(const ScenarioConfig& config, double dt);

std::string log_csv(const SensorLog& log);
void write_log(const std::filesystem::path& path, const SensorLog& log);
SensorLog parse_log(std::string_view text);
SensorLog read_log(const std::filesystem::path& path);

/// Plays a log back. Requested steps must tile whole log rows; longer steps
/// average the rows they cover, which reproduces the logged sample exactly
/// when the step matches the log.
class ReplaySource final : public SensorSource {
 public:
  explicit ReplaySource(std::shared_ptr<const SensorLog> log);

  TimeMs duration() const override { return log_->duration(); }
  NavState initial_state() const override { return log_->initial; }
  ImuSample imu(TimeMs t, TimeMs step) override;
  std::optional<AidingMeasurement> aiding(TimeMs t) override;
  Vec3 truth_velocity(TimeMs t) const override;

 private:
  std::size_t row_starting_at(TimeMs t) const;
  std::size_t row_ending_at(TimeMs t) const;

  std::shared_ptr<const SensorLog> log_;
};

}  // namespace stepnav
