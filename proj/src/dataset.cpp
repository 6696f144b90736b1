#include "stepnav/dataset.hpp"

#include "stepnav/adaptive.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

namespace stepnav {

namespace {

constexpr std::uint64_t kScenarioSeedStream = 3;
constexpr std::uint64_t kSplitSeedStream = 4;
constexpr double kDatasetDuration = 40.0;

TrajectorySpec base_spec(TrajectoryKind kind, double speed, double duration) {
  TrajectorySpec s;
  s.kind = kind;
  s.speed = speed;
  s.duration = duration;
  return s;
}

}  // namespace

std::vector<double> GridAxis::values() const {
  if (count < 1 || !(lo > 0.0) || hi < lo) throw ValidationError("grid axis needs 0 < lo <= hi and count >= 1");
  if (count == 1) return {std::sqrt(lo * hi)};
  std::vector<double> v;
  for (int i = 0; i < count; ++i) {
    v.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
  }
  return v;
}

GenerationGrid GenerationGrid::desk() {
  GenerationGrid g;
  g.aiding_std.count = 5;
  g.dtau.count = 4;
  g.accel_std.count = 5;
  g.gyro_std.count = 5;
  g.windows_per_scenario = 1;

  const double T = kDatasetDuration;
  TrajectorySpec straight = base_spec(TrajectoryKind::StraightLine, 5.0, T);
  TrajectorySpec circle = base_spec(TrajectoryKind::Circle, 4.0, T);
  circle.radius = 25.0;
  TrajectorySpec eight = base_spec(TrajectoryKind::FigureEight, 6.0, T);
  eight.radius = 40.0;
  TrajectorySpec rect = base_spec(TrajectoryKind::Rectangle, 1.5, T);
  rect.radius = 2.0;
  rect.leg_north = 20.0;
  rect.leg_east = 10.0;
  rect.origin.altitude = -5.0;
  g.trajectories = {{straight, AidingKind::Gnss},
                    {circle, AidingKind::Gnss},
                    {eight, AidingKind::Gnss},
                    {rect, AidingKind::Dvl}};
  return g;
}

GenerationGrid GenerationGrid::full() {
  GenerationGrid g;
  g.windows_per_scenario = 1;
  const double T = kDatasetDuration;
  TrajectorySpec straight = base_spec(TrajectoryKind::StraightLine, 5.0, T);
  TrajectorySpec circle = base_spec(TrajectoryKind::Circle, 4.0, T);
  circle.radius = 25.0;
  TrajectorySpec curve = base_spec(TrajectoryKind::WaypointSpline, 1.5, T);
  curve.radius = 3.0;
  curve.waypoints = {{15.0, 0.0}, {25.0, 12.0}, {20.0, 30.0}, {40.0, 40.0}};
  curve.origin.altitude = -5.0;
  g.trajectories = {{straight, AidingKind::Gnss}, {circle, AidingKind::Gnss}, {curve, AidingKind::Dvl}};
  return g;
}

void GenerationGrid::validate() const {
  aiding_std.values();
  dtau.values();
  accel_std.values();
  gyro_std.values();
  if (trajectories.empty()) throw ValidationError("generation grid needs at least one trajectory");
  if (windows_per_scenario < 0) throw ValidationError("windows_per_scenario must be >= 0");
  if (!(bound > 0.0)) throw ValidationError("error bound must be > 0");
  to_ms(fine_step, "fine step");
  to_ms(coarse_step, "coarse step");
  if (!(fine_step < coarse_step)) throw ValidationError("fine step must be smaller than the coarse step");
  for (const auto& t : trajectories) t.spec.validate();
}

std::int64_t GenerationGrid::scenario_count() const {
  return static_cast<std::int64_t>(trajectories.size()) * aiding_std.count * dtau.count * accel_std.count *
         gyro_std.count;
}

std::vector<double> GenerationGrid::dtau_values() const {
  const TimeMs q = to_ms(coarse_step, "coarse step");
  const TimeMs lo = to_ms(std::ceil(dtau.lo * 1000.0 - 1e-9) / 1000.0, "dtau");
  const TimeMs hi = to_ms(std::floor(dtau.hi * 1000.0 + 1e-9) / 1000.0, "dtau");
  std::vector<double> out;
  for (double v : dtau.values()) {
    TimeMs ms = static_cast<TimeMs>(std::llround(v * 1000.0 / static_cast<double>(q))) * q;
    while (ms < lo) ms += q;
    while (ms > hi && ms - q >= lo) ms -= q;
    out.push_back(to_seconds(std::max(ms, q)));
  }
  return out;
}

ScenarioPoint grid_point(const GenerationGrid& grid, std::int64_t id) {
  if (id < 0 || id >= grid.scenario_count()) throw ValidationError("scenario id out of range");
  ScenarioPoint p;
  p.id = id;
  std::int64_t r = id;
  const auto ig = static_cast<std::size_t>(r % grid.gyro_std.count);
  r /= grid.gyro_std.count;
  const auto ia = static_cast<std::size_t>(r % grid.accel_std.count);
  r /= grid.accel_std.count;
  const auto it = static_cast<std::size_t>(r % grid.dtau.count);
  r /= grid.dtau.count;
  const auto ir = static_cast<std::size_t>(r % grid.aiding_std.count);
  r /= grid.aiding_std.count;
  p.trajectory = static_cast<int>(r);
  const double g = grid.gyro_std.values()[ig];
  const double a = grid.accel_std.values()[ia];
  const double s = grid.aiding_std.values()[ir];
  p.gyro_var = g * g;
  p.accel_var = a * a;
  p.aiding_var = s * s;
  p.dtau = grid.dtau_values()[it];
  return p;
}

ScenarioConfig scenario_for_id(const GenerationGrid& grid, std::int64_t id, std::uint64_t master_seed) {
  const ScenarioPoint p = grid_point(grid, id);
  const auto& traj = grid.trajectories[static_cast<std::size_t>(p.trajectory)];
  ScenarioConfig c;
  c.trajectory = traj.spec;
  c.aiding = traj.aiding;
  c.dt = grid.coarse_step;
  c.dtau = p.dtau;
  c.imu_noise.accel_var = Vec3::Constant(p.accel_var);
  c.imu_noise.gyro_var = Vec3::Constant(p.gyro_var);
  c.aiding_var = Vec3::Constant(p.aiding_var);
  c.seed = derive_seed(master_seed, kScenarioSeedStream, static_cast<std::uint64_t>(id));
  c.mc_n = 1;
  return c;
}

std::vector<std::shared_ptr<const GroundTruth>> grid_ground_truths(const GenerationGrid& grid) {
  std::vector<std::shared_ptr<const GroundTruth>> out;
  for (const auto& t : grid.trajectories) {
    out.push_back(std::make_shared<const GroundTruth>(gen_trajectory(t.spec, 0.001)));
  }
  return out;
}

std::vector<LabeledExample> label_scenario(const GenerationGrid& grid, std::int64_t id, std::uint64_t seed,
                                           const std::vector<std::shared_ptr<const GroundTruth>>& truths) {
  const ScenarioPoint p = grid_point(grid, id);
  const ScenarioConfig config = scenario_for_id(grid, id, seed);
  const auto& gt = truths.at(static_cast<std::size_t>(p.trajectory));
  const TimeMs interval = to_ms(config.dtau, "dtau");
  const std::int64_t epochs = gt->duration() / interval;
  if (epochs < 1) throw ValidationError("scenario shorter than one aiding interval");

  std::vector<std::int64_t> wanted;
  if (grid.windows_per_scenario == 0) {
    for (std::int64_t j = 1; j <= epochs; ++j) wanted.push_back(j);
  } else {
    const std::int64_t n = grid.windows_per_scenario;
    for (std::int64_t i = 0; i < n; ++i) wanted.push_back(std::max<std::int64_t>(1, (i + 1) * epochs / (n + 1)));
  }

  const NoiseDescriptor noise = noise_descriptor(config);
  FeatureWindow window;
  std::vector<std::optional<FeatureVector>> captured(wanted.size());
  RunOptions options;
  options.observer = [&](const TickInfo& tick) {
    window.push(*tick.state);
    if (!tick.aiding) return;
    const std::int64_t j = tick.t_end() / interval;
    for (std::size_t w = 0; w < wanted.size(); ++w) {
      if (wanted[w] == j && !captured[w]) captured[w] = extract_features(window, noise);
    }
  };
  const RunMetrics coarse = run_scenario(config, FixedStep{grid.coarse_step}, gt, run_seed(config.seed, 0), options);

  double label = grid.coarse_step;
  bool out_of_bound = false;
  double fine_error = 0.0;
  if (coarse.diverged || !(coarse.mean_speed_error <= grid.bound)) {
    label = grid.fine_step;
    ScenarioConfig fine_config = config;
    fine_config.dt = grid.fine_step;
    const RunMetrics fine = run_scenario(fine_config, FixedStep{grid.fine_step}, gt, run_seed(config.seed, 0));
    fine_error = fine.mean_speed_error;
    out_of_bound = fine.diverged || !(fine.mean_speed_error <= grid.bound);
  }

  std::vector<LabeledExample> out;
  for (std::size_t w = 0; w < wanted.size(); ++w) {
    // A run that diverged before this epoch still yields a row, built from
    // the last samples it produced and flagged.
    const bool missing = !captured[w].has_value();
    const FeatureVector f = missing ? extract_features(window, noise) : *captured[w];
    LabeledExample e;
    e.x = f.values;
    e.label_dt = label;
    e.scenario_id = id;
    e.window_idx = static_cast<int>(w);
    e.out_of_bound = out_of_bound || missing;
    e.warmup = f.warmup;
    e.floored = f.floored;
    e.coarse_error = coarse.mean_speed_error;
    e.fine_error = fine_error;
    out.push_back(e);
  }
  return out;
}

Dataset generate_dataset(const GenerationGrid& grid, std::uint64_t seed, int jobs,
                         const std::function<void(std::int64_t, std::int64_t)>& progress) {
  grid.validate();
  const std::int64_t total = grid.scenario_count();
  const auto truths = grid_ground_truths(grid);
  std::vector<std::vector<LabeledExample>> per(static_cast<std::size_t>(total));

  std::atomic<std::int64_t> next{0}, done{0};
  auto worker = [&] {
    for (std::int64_t id = next++; id < total; id = next++) {
      per[static_cast<std::size_t>(id)] = label_scenario(grid, id, seed, truths);
      const std::int64_t d = ++done;
      if (progress && jobs <= 1) progress(d, total);
    }
  };
  const int threads = static_cast<int>(std::clamp<std::int64_t>(jobs, 1, total));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  }

  Dataset ds;
  ds.grid = grid;
  ds.seed = seed;
  for (auto& v : per) ds.examples.insert(ds.examples.end(), v.begin(), v.end());
  return ds;
}

MatrixX feature_matrix(const std::vector<LabeledExample>& examples) {
  MatrixX X(static_cast<Eigen::Index>(examples.size()), kFeatureCount);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    for (int j = 0; j < kFeatureCount; ++j) X(static_cast<Eigen::Index>(i), j) = examples[i].x[static_cast<std::size_t>(j)];
  }
  return X;
}

MatrixX take_rows(const MatrixX& X, const std::vector<std::size_t>& idx) {
  MatrixX out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(static_cast<Eigen::Index>(idx[k]));
  return out;
}

std::vector<int> label_vector(const std::vector<LabeledExample>& examples) {
  std::vector<int> y;
  y.reserve(examples.size());
  for (const auto& e : examples) y.push_back(label_from_step(e.label_dt));
  return y;
}

SplitIndices split(const std::vector<int>& labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("split ratio must be in (0, 1)");
  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<std::vector<std::size_t>> members(classes.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
    members[c].push_back(i);
  }

  // Largest-remainder allocation of the training quota over classes.
  const auto quota = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(labels.size())));
  std::vector<std::size_t> take_n(classes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const double exact = ratio * static_cast<double>(members[c].size());
    take_n[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += take_n[c];
    remainders.push_back({exact - std::floor(exact), c});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](auto a, auto b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < quota && k < remainders.size(); ++k, ++assigned) ++take_n[remainders[k].second];

  std::mt19937_64 rng(derive_seed(seed, kSplitSeedStream, 0));
  SplitIndices out;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::shuffle(members[c].begin(), members[c].end(), rng);
    out.train.insert(out.train.end(), members[c].begin(), members[c].begin() + static_cast<std::ptrdiff_t>(take_n[c]));
    out.test.insert(out.test.end(), members[c].begin() + static_cast<std::ptrdiff_t>(take_n[c]), members[c].end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<std::vector<std::size_t>> kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  if (labels.size() < static_cast<std::size_t>(k)) throw ValidationError("fewer examples than folds");
  std::vector<int> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::mt19937_64 rng(derive_seed(seed, kSplitSeedStream, 1));
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  std::size_t deal = 0;
  for (int c : classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i : members) folds[deal++ % folds.size()].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace stepnav
