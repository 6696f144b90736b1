#include "stepnav/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "stepnav/features.hpp"

namespace stepnav {

namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr const char* kLogMagic = "# stepnav sensor log v1";

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    std::string_view line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  return lines;
}

std::string row(std::initializer_list<double> values) {
  std::string s;
  bool first = true;
  for (double v : values) {
    if (!first) s += ',';
    s += format_double(v);
    first = false;
  }
  s += '\n';
  return s;
}

// Scalars apply to all three axes.
Vec3 vec3_from(const Json& j, const char* what) {
  if (j.is_number()) return Vec3::Constant(j.get<double>());
  if (j.is_array() && j.size() == 3) return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  throw ParseError(std::string(what) + " must be a number or a 3-array");
}

Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json vector_json(const VectorX& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorX vector_from(const Json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be an array");
  VectorX v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

template <class T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json axis_json(const GridAxis& a) { return {{"lo", a.lo}, {"hi", a.hi}, {"count", a.count}}; }

void axis_from(const Json& j, const char* key, GridAxis& a) {
  if (!j.contains(key)) return;
  const Json& x = j.at(key);
  maybe(x, "lo", a.lo);
  maybe(x, "hi", a.hi);
  maybe(x, "count", a.count);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw ParseError(std::string(what) + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  auto out = open_out(path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw ValidationError("failed writing " + path.string());
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ---- configs ----------------------------------------------------------------

namespace {

void apply_trajectory_fields(const Json& j, TrajectorySpec& s) {
  if (j.contains("kind")) s.kind = trajectory_kind_from_string(j.at("kind").get<std::string>());
  maybe(j, "speed", s.speed);
  maybe(j, "v0", s.speed);
  maybe(j, "radius", s.radius);
  maybe(j, "duration_s", s.duration);
  if (j.contains("heading_deg")) s.heading = j.at("heading_deg").get<double>() * kDeg;
  maybe(j, "heading_rad", s.heading);
  maybe(j, "leg_north", s.leg_north);
  maybe(j, "leg_east", s.leg_east);
  if (j.contains("waypoints")) {
    s.waypoints.clear();
    for (const auto& w : j.at("waypoints")) s.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
  }
  if (j.contains("segments")) {
    s.segments.clear();
    for (const auto& g : j.at("segments")) {
      s.segments.push_back({g.at("duration_s").get<double>(), g.value("accel", 0.0), g.value("turn_rate", 0.0)});
    }
  }
  if (j.contains("p0")) {
    const auto& p = j.at("p0");
    if (!p.is_array() || p.size() != 3) throw ParseError("p0 must be [lat_deg, lon_deg, alt_m]");
    s.origin = {p[0].get<double>() * kDeg, p[1].get<double>() * kDeg, p[2].get<double>()};
  }
}

}  // namespace

TrajectorySpec trajectory_from_json(const Json& j) {
  TrajectorySpec s;
  if (j.contains("preset")) {
    const auto p = j.at("preset").get<std::string>();
    const double T = j.value("duration_s", p == "auv_rectangle" ? 40.0 : 240.0);
    if (p == "lines_and_curves") s = lines_and_curves_preset(T);
    else if (p == "auv_rectangle") s = auv_rectangle_preset(T);
    else throw ParseError("unknown trajectory preset: " + p);
  }
  apply_trajectory_fields(j, s);
  return s;
}

Json trajectory_to_json(const TrajectorySpec& s) {
  Json j;
  j["kind"] = std::string(to_string(s.kind));
  j["speed"] = s.speed;
  j["radius"] = s.radius;
  j["duration_s"] = s.duration;
  j["heading_rad"] = s.heading;
  j["leg_north"] = s.leg_north;
  j["leg_east"] = s.leg_east;
  Json w = Json::array();
  for (const auto& p : s.waypoints) w.push_back({p[0], p[1]});
  j["waypoints"] = w;
  Json g = Json::array();
  for (const auto& seg : s.segments) {
    g.push_back({{"duration_s", seg.duration}, {"accel", seg.accel}, {"turn_rate", seg.turn_rate}});
  }
  j["segments"] = g;
  j["p0"] = {s.origin.latitude / kDeg, s.origin.longitude / kDeg, s.origin.altitude};
  return j;
}

ScenarioConfig config_from_json(const Json& root) {
  if (!root.is_object()) throw ParseError("config must be a JSON object");
  ScenarioConfig c;
  if (root.contains("preset")) {
    const auto p = root.at("preset").get<std::string>();
    if (p == "gnss_sensitivity") c = gnss_sensitivity_config();
    else if (p == "gnss_adaptive") c = gnss_adaptive_config();
    else if (p == "dvl_adaptive") c = dvl_adaptive_config();
    else throw ParseError("unknown config preset: " + p);
  }
  try {
    if (root.contains("trajectory")) {
      const Json& t = root.at("trajectory");
      // Overrides apply on top of the preset's trajectory.
      if (t.contains("preset") || t.contains("kind")) c.trajectory = trajectory_from_json(t);
      else apply_trajectory_fields(t, c.trajectory);
    }
    const Json& n = root.contains("noise") ? root.at("noise") : root;
    if (root.contains("aiding")) c.aiding = aiding_kind_from_string(root.at("aiding").get<std::string>());
    if (n.contains("gnss_vel_var")) {
      c.aiding = AidingKind::Gnss;
      c.aiding_var = vec3_from(n.at("gnss_vel_var"), "gnss_vel_var");
    }
    if (n.contains("dvl_vel_var")) {
      c.aiding = AidingKind::Dvl;
      c.aiding_var = vec3_from(n.at("dvl_vel_var"), "dvl_vel_var");
    }
    if (n.contains("accel_var")) c.imu_noise.accel_var = vec3_from(n.at("accel_var"), "accel_var");
    if (n.contains("gyro_var")) c.imu_noise.gyro_var = vec3_from(n.at("gyro_var"), "gyro_var");
    if (n.contains("accel_bias_rw_var")) {
      c.imu_noise.accel_bias_rw_var = vec3_from(n.at("accel_bias_rw_var"), "accel_bias_rw_var");
    }
    if (n.contains("gyro_bias_rw_var")) {
      c.imu_noise.gyro_bias_rw_var = vec3_from(n.at("gyro_bias_rw_var"), "gyro_bias_rw_var");
    }
    maybe(root, "dt", c.dt);
    maybe(root, "dtau", c.dtau);
    maybe(root, "duration_s", c.trajectory.duration);
    maybe(root, "v0", c.trajectory.speed);
    if (root.contains("p0")) {
      const auto& p = root.at("p0");
      if (!p.is_array() || p.size() != 3) throw ParseError("p0 must be [lat_deg, lon_deg, alt_m]");
      c.trajectory.origin = {p[0].get<double>() * kDeg, p[1].get<double>() * kDeg, p[2].get<double>()};
    }
    maybe(root, "seed", c.seed);
    maybe(root, "mc_n", c.mc_n);
    maybe(root, "joseph_form", c.joseph_form);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

Json config_to_json(const ScenarioConfig& c) {
  Json j;
  j["trajectory"] = trajectory_to_json(c.trajectory);
  j["aiding"] = std::string(to_string(c.aiding));
  j[c.aiding == AidingKind::Gnss ? "gnss_vel_var" : "dvl_vel_var"] = vec3_json(c.aiding_var);
  j["accel_var"] = vec3_json(c.imu_noise.accel_var);
  j["gyro_var"] = vec3_json(c.imu_noise.gyro_var);
  j["accel_bias_rw_var"] = vec3_json(c.imu_noise.accel_bias_rw_var);
  j["gyro_bias_rw_var"] = vec3_json(c.imu_noise.gyro_bias_rw_var);
  j["dt"] = c.dt;
  j["dtau"] = c.dtau;
  j["seed"] = c.seed;
  j["mc_n"] = c.mc_n;
  j["joseph_form"] = c.joseph_form;
  return j;
}

Json grid_to_json(const GenerationGrid& g) {
  Json j;
  j["aiding_std"] = axis_json(g.aiding_std);
  j["dtau"] = axis_json(g.dtau);
  j["accel_std"] = axis_json(g.accel_std);
  j["gyro_std"] = axis_json(g.gyro_std);
  Json t = Json::array();
  for (const auto& tr : g.trajectories) {
    t.push_back({{"aiding", std::string(to_string(tr.aiding))}, {"trajectory", trajectory_to_json(tr.spec)}});
  }
  j["trajectories"] = t;
  j["windows_per_scenario"] = g.windows_per_scenario;
  j["bound"] = g.bound;
  j["fine_step"] = g.fine_step;
  j["coarse_step"] = g.coarse_step;
  return j;
}

GenerationGrid grid_from_json(const Json& j) {
  GenerationGrid g = GenerationGrid::desk();
  try {
    if (j.contains("preset")) {
      const auto p = j.at("preset").get<std::string>();
      if (p == "desk") g = GenerationGrid::desk();
      else if (p == "full") g = GenerationGrid::full();
      else throw ParseError("unknown grid preset: " + p);
    }
    axis_from(j, "aiding_std", g.aiding_std);
    axis_from(j, "dtau", g.dtau);
    axis_from(j, "accel_std", g.accel_std);
    axis_from(j, "gyro_std", g.gyro_std);
    if (j.contains("trajectories")) {
      g.trajectories.clear();
      for (const auto& t : j.at("trajectories")) {
        g.trajectories.push_back({trajectory_from_json(t.at("trajectory")),
                                  aiding_kind_from_string(t.at("aiding").get<std::string>())});
      }
    }
    maybe(j, "windows_per_scenario", g.windows_per_scenario);
    maybe(j, "bound", g.bound);
    maybe(j, "fine_step", g.fine_step);
    maybe(j, "coarse_step", g.coarse_step);
  } catch (const Json::exception& e) {
    throw ParseError(std::string("grid: ") + e.what());
  }
  g.validate();
  return g;
}

AdaptiveOptions adaptive_options_from_json(const Json& j, AdaptiveOptions o) {
  maybe(j, "dt0", o.dt0);
  maybe(j, "tuning_rate", o.tuning_rate);
  maybe(j, "hysteresis", o.hysteresis);
  maybe(j, "history", o.history);
  maybe(j, "warmup_samples", o.warmup_samples);
  return o;
}

// ---- results ----------------------------------------------------------------

Json health_to_json(const HealthStats& h) {
  Json j;
  j["max_symmetry_error"] = h.max_symmetry_error;
  j["min_eigenvalue"] = std::isfinite(h.min_eigenvalue) ? Json(h.min_eigenvalue) : Json(nullptr);
  j["max_orthonormality_error"] = h.max_orthonormality_error;
  j["checks"] = h.checks;
  j["violations"] = h.violations;
  return j;
}

Json metrics_to_json(const RunMetrics& m) {
  Json j;
  j["mean_speed_error_mps"] = m.mean_speed_error;
  j["rmse_speed_error_mps"] = m.rmse_speed_error;
  j["max_speed_error_mps"] = m.max_speed_error;
  j["iterations"] = m.iterations;
  j["updates"] = m.updates;
  j["large_angle_updates"] = m.large_angle_updates;
  j["diverged"] = m.diverged;
  if (m.diverged) j["divergence_message"] = m.divergence_message;
  j["health"] = health_to_json(m.health);
  return j;
}

void write_timeline_csv(const fs::path& path, const std::vector<TimelineSegment>& timeline) {
  std::string s = "t_start_s,t_end_s,dt_s\n";
  for (const auto& t : timeline) s += row({t.t_start_s, t.t_end_s, t.dt_s});
  write_text(path, s);
}

void write_trace_csv(const fs::path& path, const std::vector<TraceRow>& trace) {
  std::string s = "time_s,dt_s,speed_error_mps,p_vel_trace,updated\n";
  for (const auto& r : trace) {
    s += format_double(r.time_s) + ',' + format_double(r.step_size_s) + ',' + format_double(r.speed_error_mps) +
         ',' + format_double(r.p_trace_vel) + ',' + (r.updated ? "1" : "0") + '\n';
  }
  write_text(path, s);
}

void write_sweep_csv(const fs::path& path, const SweepResult& sweep) {
  std::string s = "dt_s,mean_speed_error_mps,rmse_speed_error_mps,max_speed_error_mps\n";
  for (const auto& r : sweep.rows) s += row({r.dt, r.mean_speed_error, r.rmse_speed_error, r.max_speed_error});
  write_text(path, s);
}

void write_roc_csv(const fs::path& path, const std::vector<RocPoint>& roc) {
  std::string s = "fpr,tpr,threshold\n";
  for (const auto& p : roc) s += row({p.fpr, p.tpr, p.threshold});
  write_text(path, s);
}

void write_ranking_csv(const fs::path& path, const std::vector<MrmrEntry>& ranking) {
  const auto names = feature_names();
  std::string s = "rank,feature,name,relevance_nats,score\n";
  int rank = 1;
  for (const auto& e : ranking) {
    const std::string name = e.feature >= 0 && e.feature < static_cast<int>(names.size())
                                 ? std::string(names[static_cast<std::size_t>(e.feature)])
                                 : "f" + std::to_string(e.feature);
    s += std::to_string(rank++) + ',' + std::to_string(e.feature) + ',' + name + ',' + format_double(e.relevance) +
         ',' + format_double(e.score) + '\n';
  }
  write_text(path, s);
}

// ---- datasets ---------------------------------------------------------------

std::string dataset_csv(const Dataset& d) {
  std::string s;
  for (const auto& n : feature_names()) s += std::string(n) + ',';
  s += "label_dt_s,scenario_id,window_idx,out_of_bound,warmup,floored,coarse_error_mps,fine_error_mps\n";
  for (const auto& e : d.examples) {
    for (double v : e.x) s += format_double(v) + ',';
    s += format_double(e.label_dt) + ',' + std::to_string(e.scenario_id) + ',' + std::to_string(e.window_idx) + ',' +
         (e.out_of_bound ? "1" : "0") + ',' + (e.warmup ? "1" : "0") + ',' + (e.floored ? "1" : "0") + ',' +
         format_double(e.coarse_error) + ',' + format_double(e.fine_error) + '\n';
  }
  return s;
}

void write_dataset(const fs::path& path, const Dataset& d) {
  write_text(path, dataset_csv(d));
  Json side;
  side["grid"] = grid_to_json(d.grid);
  side["bound"] = d.grid.bound;
  side["seed"] = d.seed;
  side["examples"] = d.examples.size();
  write_json(fs::path(path.string() + ".json"), side);
}

Dataset read_dataset(const fs::path& path) {
  const std::string text = read_text(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(path.string() + ": empty dataset");
  const auto header = split_fields(lines[0]);
  const auto names = feature_names();
  if (header.size() < kFeatureCount + 4) throw ParseError(path.string() + ": too few columns");
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (header[k] != names[k]) throw ParseError(path.string() + ": column " + std::to_string(k + 1) + " is not " + std::string(names[k]));
  }
  auto column = [&](std::string_view name) -> int {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return static_cast<int>(k);
    }
    return -1;
  };
  const int c_label = column("label_dt_s"), c_id = column("scenario_id"), c_win = column("window_idx"),
            c_oob = column("out_of_bound"), c_warm = column("warmup"), c_floor = column("floored"),
            c_ce = column("coarse_error_mps"), c_fe = column("fine_error_mps");
  if (c_label < 0 || c_id < 0 || c_win < 0 || c_oob < 0) {
    throw ParseError(path.string() + ": missing label_dt_s, scenario_id, window_idx or out_of_bound column");
  }

  Dataset d;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto f = split_fields(lines[ln]);
    const std::string where = path.string() + ":" + std::to_string(ln + 1);
    if (f.size() != header.size()) throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields");
    LabeledExample e;
    for (std::size_t k = 0; k < kFeatureCount; ++k) e.x[k] = parse_double(f[k], where);
    auto num = [&](int c) { return parse_double(f[static_cast<std::size_t>(c)], where); };
    e.label_dt = num(c_label);
    label_from_step(e.label_dt);
    e.scenario_id = static_cast<std::int64_t>(num(c_id));
    e.window_idx = static_cast<int>(num(c_win));
    e.out_of_bound = num(c_oob) != 0.0;
    if (c_warm >= 0) e.warmup = num(c_warm) != 0.0;
    if (c_floor >= 0) e.floored = num(c_floor) != 0.0;
    if (c_ce >= 0) e.coarse_error = num(c_ce);
    if (c_fe >= 0) e.fine_error = num(c_fe);
    d.examples.push_back(e);
  }
  const fs::path side = path.string() + ".json";
  if (fs::exists(side)) {
    const Json j = read_json(side);
    d.grid = grid_from_json(j.at("grid"));
    d.seed = j.value("seed", std::uint64_t{0});
  }
  return d;
}

// ---- models -----------------------------------------------------------------

Json model_to_json(const SvmModel& m) {
  Json j;
  j["format"] = "stepnav-svm";
  j["version"] = 1;
  j["kernel"] = std::string(to_string(m.kernel));
  j["C"] = m.C;
  j["bias"] = m.bias;
  j["class_map"] = {{"+1", kFineStep}, {"-1", kCoarseStep}};
  j["standardizer"] = {{"mean", vector_json(m.standardizer.mean)}, {"scale", vector_json(m.standardizer.scale)}};
  Json sv = Json::array();
  for (Eigen::Index i = 0; i < m.support.rows(); ++i) sv.push_back(vector_json(m.support.row(i).transpose()));
  j["support"] = sv;
  j["coef"] = vector_json(m.coef);
  j["weights"] = vector_json(m.weights);
  j["training"] = {{"iterations", m.info.iterations},
                   {"final_gap", m.info.final_gap},
                   {"converged", m.info.converged},
                   {"support_vectors", m.info.support_vectors},
                   {"seed", m.seed},
                   {"dataset_hash", m.dataset_hash}};
  return j;
}

SvmModel model_from_json(const Json& j) {
  SvmModel m;
  try {
    if (j.value("format", std::string()) != "stepnav-svm") throw ParseError("not a stepnav model file");
    m.kernel = kernel_from_string(j.at("kernel").get<std::string>());
    m.C = j.at("C").get<double>();
    m.bias = j.at("bias").get<double>();
    m.standardizer.mean = vector_from(j.at("standardizer").at("mean"), "standardizer.mean");
    m.standardizer.scale = vector_from(j.at("standardizer").at("scale"), "standardizer.scale");
    const Eigen::Index dim = m.standardizer.mean.size();
    if (m.standardizer.scale.size() != dim) throw ParseError("standardizer mean and scale differ in length");
    const Json& sv = j.at("support");
    m.support.resize(static_cast<Eigen::Index>(sv.size()), dim);
    for (std::size_t i = 0; i < sv.size(); ++i) {
      const VectorX r = vector_from(sv[i], "support row");
      if (r.size() != dim) throw ParseError("support vector dimension mismatch");
      m.support.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    m.coef = vector_from(j.at("coef"), "coef");
    if (m.coef.size() != m.support.rows()) throw ParseError("coef and support counts differ");
    m.weights = vector_from(j.value("weights", Json::array()), "weights");
    if (const auto it = j.find("training"); it != j.end()) {
      m.info.iterations = it->value("iterations", std::int64_t{0});
      m.info.final_gap = it->value("final_gap", 0.0);
      m.info.converged = it->value("converged", false);
      m.info.support_vectors = it->value("support_vectors", std::size_t{0});
      m.seed = it->value("seed", std::uint64_t{0});
      m.dataset_hash = it->value("dataset_hash", std::string());
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("model: ") + e.what());
  }
  return m;
}

void save_model(const fs::path& path, const SvmModel& m) { write_json(path, model_to_json(m)); }

std::shared_ptr<const SvmModel> load_model(const fs::path& path) {
  return std::make_shared<const SvmModel>(model_from_json(read_json(path)));
}

// ---- sensor logs ------------------------------------------------------------

SensorLog export_log(const ScenarioConfig& config, double dt) {
  config.validate();
  const TimeMs step = to_ms(dt, "dt");
  const TimeMs interval = to_ms(config.dtau, "dtau");
  if (step <= 0) throw ValidationError("dt must be > 0");
  SimulatedSource source(make_ground_truth(config), config.aiding, interval, config.imu_noise, config.aiding_var,
                         run_seed(config.seed, 0));
  SensorLog log;
  log.initial = source.initial_state();
  log.aiding = config.aiding;
  log.dtau = config.dtau;
  const TimeMs total = source.duration();
  TimeMs t = 0, next_epoch = interval;
  while (t < total) {
    const TimeMs h = std::min({step, next_epoch - t, total - t});
    LogRow r;
    r.t = t;
    r.step = h;
    r.imu = source.imu(t, h);
    const TimeMs t_end = t + h;
    if (t_end == next_epoch) {
      if (const auto m = source.aiding(t_end)) {
        r.has_aiding = true;
        r.aiding = m->velocity;
      }
      next_epoch += interval;
    }
    r.truth = source.truth_velocity(t_end);
    log.rows.push_back(r);
    t = t_end;
  }
  return log;
}

std::string log_csv(const SensorLog& log) {
  const NavState& s = log.initial;
  const Mat3& A = s.attitude;
  std::string out = std::string(kLogMagic) + "\n";
  out += "# aiding," + std::string(to_string(log.aiding)) + "\n";
  out += "# dtau_s," + format_double(log.dtau) + "\n";
  out += "# initial_position," + format_double(s.position.latitude) + ',' + format_double(s.position.longitude) +
         ',' + format_double(s.position.altitude) + "\n";
  out += "# initial_velocity," + row({s.velocity.x(), s.velocity.y(), s.velocity.z()});
  out += "# initial_attitude," + row({A(0, 0), A(0, 1), A(0, 2), A(1, 0), A(1, 1), A(1, 2), A(2, 0), A(2, 1), A(2, 2)});
  out += "# initial_accel_bias," + row({s.accel_bias.x(), s.accel_bias.y(), s.accel_bias.z()});
  out += "# initial_gyro_bias," + row({s.gyro_bias.x(), s.gyro_bias.y(), s.gyro_bias.z()});
  out += "time_s,dt_s,fx,fy,fz,wx,wy,wz,aid_vx,aid_vy,aid_vz,gt_vn,gt_ve,gt_vd\n";
  for (const auto& r : log.rows) {
    out += format_double(to_seconds(r.t)) + ',' + format_double(to_seconds(r.step));
    for (int k = 0; k < 3; ++k) out += ',' + format_double(r.imu.specific_force(k));
    for (int k = 0; k < 3; ++k) out += ',' + format_double(r.imu.angular_rate(k));
    for (int k = 0; k < 3; ++k) out += ',' + (r.has_aiding ? format_double(r.aiding(k)) : std::string());
    for (int k = 0; k < 3; ++k) out += ',' + format_double(r.truth(k));
    out += '\n';
  }
  return out;
}

void write_log(const fs::path& path, const SensorLog& log) { write_text(path, log_csv(log)); }

SensorLog parse_log(std::string_view text) {
  static const std::vector<std::string_view> kColumns = {"time_s", "dt_s",   "fx",     "fy",     "fz",
                                                         "wx",     "wy",     "wz",     "aid_vx", "aid_vy",
                                                         "aid_vz", "gt_vn",  "gt_ve",  "gt_vd"};
  SensorLog log;
  const auto lines = split_lines(text);
  bool have_header = false, have_dtau = false, have_aiding = false;
  TimeMs expected_t = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string where = "log line " + std::to_string(ln + 1);
    const std::string_view line = lines[ln];
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind("# ", 0) != 0) continue;
      const auto f = split_fields(line.substr(2));
      auto nums = [&](std::size_t n) {
        if (f.size() != n + 1) throw ParseError(where + ": " + std::string(f[0]) + " needs " + std::to_string(n) + " values");
        std::vector<double> v;
        for (std::size_t k = 1; k <= n; ++k) v.push_back(parse_double(f[k], where));
        return v;
      };
      if (f[0] == "aiding") {
        if (f.size() != 2) throw ParseError(where + ": aiding needs one value");
        log.aiding = aiding_kind_from_string(f[1]);
        have_aiding = true;
      } else if (f[0] == "dtau_s") {
        log.dtau = nums(1)[0];
        have_dtau = true;
      } else if (f[0] == "initial_position") {
        const auto v = nums(3);
        log.initial.position = {v[0], v[1], v[2]};
      } else if (f[0] == "initial_velocity") {
        const auto v = nums(3);
        log.initial.velocity = {v[0], v[1], v[2]};
      } else if (f[0] == "initial_attitude") {
        const auto v = nums(9);
        log.initial.attitude << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
      } else if (f[0] == "initial_accel_bias") {
        const auto v = nums(3);
        log.initial.accel_bias = {v[0], v[1], v[2]};
      } else if (f[0] == "initial_gyro_bias") {
        const auto v = nums(3);
        log.initial.gyro_bias = {v[0], v[1], v[2]};
      }
      continue;
    }
    const auto f = split_fields(line);
    if (!have_header) {
      if (f.size() != kColumns.size()) {
        throw ParseError(where + ": header must have " + std::to_string(kColumns.size()) + " columns");
      }
      for (std::size_t k = 0; k < kColumns.size(); ++k) {
        if (f[k] != kColumns[k]) {
          throw ParseError(where + ": column " + std::to_string(k + 1) + " must be " + std::string(kColumns[k]));
        }
      }
      have_header = true;
      continue;
    }
    if (f.size() != kColumns.size()) {
      throw ParseError(where + ": expected " + std::to_string(kColumns.size()) + " fields, got " +
                       std::to_string(f.size()));
    }
    LogRow r;
    try {
      r.t = to_ms(parse_double(f[0], where), "time_s");
      r.step = to_ms(parse_double(f[1], where), "dt_s");
    } catch (const ValidationError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (r.step <= 0) throw ParseError(where + ": dt_s must be > 0");
    if (r.t != expected_t) throw ParseError(where + ": rows must be contiguous in time");
    expected_t = r.t + r.step;
    r.imu.time = to_seconds(r.t);
    for (int k = 0; k < 3; ++k) r.imu.specific_force(k) = parse_double(f[2 + k], where);
    for (int k = 0; k < 3; ++k) r.imu.angular_rate(k) = parse_double(f[5 + k], where);
    const int empty = static_cast<int>(f[8].empty()) + static_cast<int>(f[9].empty()) + static_cast<int>(f[10].empty());
    if (empty != 0 && empty != 3) throw ParseError(where + ": aiding must have all three components or none");
    r.has_aiding = empty == 0;
    if (r.has_aiding) {
      for (int k = 0; k < 3; ++k) r.aiding(k) = parse_double(f[8 + k], where);
    }
    for (int k = 0; k < 3; ++k) {
      r.truth(k) = f[11 + k].empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(f[11 + k], where);
    }
    log.rows.push_back(r);
  }
  if (!have_header) throw ParseError("log has no column header");
  if (!have_aiding || !have_dtau) throw ParseError("log lacks the aiding or dtau_s metadata line");
  if (log.rows.empty()) throw ParseError("log has no data rows");
  const TimeMs interval = to_ms(log.dtau, "dtau_s");
  for (const auto& r : log.rows) {
    if (r.has_aiding && (r.t + r.step) % interval != 0) {
      throw ParseError("aiding at " + format_double(to_seconds(r.t + r.step)) + " s is off the dtau grid");
    }
  }
  return log;
}

SensorLog read_log(const fs::path& path) {
  try {
    return parse_log(read_text(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

ReplaySource::ReplaySource(std::shared_ptr<const SensorLog> log) : log_(std::move(log)) {
  if (!log_ || log_->rows.empty()) throw ValidationError("replay needs a non-empty log");
}

std::size_t ReplaySource::row_starting_at(TimeMs t) const {
  const auto& rows = log_->rows;
  const auto it = std::lower_bound(rows.begin(), rows.end(), t, [](const LogRow& r, TimeMs v) { return r.t < v; });
  if (it == rows.end() || it->t != t) {
    throw ValidationError("no log row starts at " + format_double(to_seconds(t)) + " s");
  }
  return static_cast<std::size_t>(it - rows.begin());
}

std::size_t ReplaySource::row_ending_at(TimeMs t) const {
  const auto& rows = log_->rows;
  const auto it = std::lower_bound(rows.begin(), rows.end(), t,
                                   [](const LogRow& r, TimeMs v) { return r.t + r.step < v; });
  if (it == rows.end() || it->t + it->step != t) {
    throw ValidationError("no log row ends at " + format_double(to_seconds(t)) + " s");
  }
  return static_cast<std::size_t>(it - rows.begin());
}

ImuSample ReplaySource::imu(TimeMs t, TimeMs step) {
  const auto& rows = log_->rows;
  std::size_t i = row_starting_at(t);
  if (rows[i].step == step) {
    ImuSample s = rows[i].imu;
    s.time = to_seconds(t);
    return s;
  }
  Vec3 f = Vec3::Zero(), w = Vec3::Zero();
  TimeMs covered = 0;
  for (; i < rows.size() && covered < step; ++i) {
    const double h = static_cast<double>(rows[i].step);
    f += rows[i].imu.specific_force * h;
    w += rows[i].imu.angular_rate * h;
    covered += rows[i].step;
  }
  if (covered != step) {
    throw ValidationError("step of " + format_double(to_seconds(step)) + " s at " + format_double(to_seconds(t)) +
                          " s does not tile the log rows");
  }
  ImuSample s;
  s.specific_force = f / static_cast<double>(step);
  s.angular_rate = w / static_cast<double>(step);
  s.time = to_seconds(t);
  return s;
}

std::optional<AidingMeasurement> ReplaySource::aiding(TimeMs t) {
  const LogRow& r = log_->rows[row_ending_at(t)];
  if (!r.has_aiding) return std::nullopt;
  AidingMeasurement m;
  m.velocity = r.aiding;
  m.frame = log_->aiding;
  m.time = to_seconds(t);
  return m;
}

Vec3 ReplaySource::truth_velocity(TimeMs t) const {
  if (t == 0) return log_->initial.velocity;
  return log_->rows[row_ending_at(t)].truth;
}

}  // namespace stepnav
