#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stepnav/features.hpp"
#include "stepnav/scenario.hpp"
#include "stepnav/svm.hpp"

namespace stepnav {

/// Log-spaced axis of `count` values between lo and hi inclusive.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int count = 1;

  std::vector<double> values() const;
};

struct DatasetTrajectory {
  TrajectorySpec spec;
  AidingKind aiding = AidingKind::Gnss;
};

/// Parameter grid of the labeled-example generator. Noise axes are standard
/// deviations; dtau values are snapped to multiples of the coarse step.
struct GenerationGrid {
  GridAxis aiding_std{0.0001, 0.1, 10};  // m/s
  GridAxis dtau{0.1, 2.0, 6};            // s
  GridAxis accel_std{0.0005, 0.5, 10};   // m/s^2
  GridAxis gyro_std{0.0001, 0.1, 10};    // rad/s
  std::vector<DatasetTrajectory> trajectories;
  int windows_per_scenario = 0;  // 0: one window per aiding interval
  double bound = 0.1;            // m/s
  double fine_step = kFineStep;
  double coarse_step = kCoarseStep;

  /// 2,000 examples: 5 x 4 x 5 x 5 points on four 40 s trajectories, one
  /// window each.
  static GenerationGrid desk();
  /// 18,000 examples: the full 10 x 6 x 10 x 10 grid on three trajectories.
  static GenerationGrid full();

  void validate() const;
  std::int64_t scenario_count() const;
  std::vector<double> dtau_values() const;
};

struct ScenarioPoint {
  std::int64_t id = 0;
  int trajectory = 0;
  double aiding_var = 0.0;
  double dtau = 0.0;
  double accel_var = 0.0;
  double gyro_var = 0.0;
};

ScenarioPoint grid_point(const GenerationGrid& grid, std::int64_t id);

/// Scenario `id` of the grid, seeded from the master seed. Re-running it
/// reproduces the run the label came from.
ScenarioConfig scenario_for_id(const GenerationGrid& grid, std::int64_t id, std::uint64_t master_seed);

struct LabeledExample {
  Features x{};
  double label_dt = kCoarseStep;
  std::int64_t scenario_id = 0;
  int window_idx = 0;
  bool out_of_bound = false;
  bool warmup = false;
  bool floored = false;
  double coarse_error = 0.0;  // mean speed error of the coarse run
  double fine_error = 0.0;    // of the fine run; 0 when not needed
};

struct Dataset {
  GenerationGrid grid;
  std::uint64_t seed = 0;
  std::vector<LabeledExample> examples;
};

/// Coarse run first; the label stays coarse if its mean speed error is
/// within the bound, otherwise the scenario is rerun at the fine step and
/// labeled fine (flagged when even that misses the bound). Feature windows
/// come from the coarse run at the selected aiding epochs. Output is sorted
/// by scenario id and window index regardless of `jobs`.
Dataset generate_dataset(const GenerationGrid& grid, std::uint64_t seed, int jobs = 1,
                         const std::function<void(std::int64_t done, std::int64_t total)>& progress = {});

/// Labels one grid point; exposed for tests and spot checks.
std::vector<LabeledExample> label_scenario(const GenerationGrid& grid, std::int64_t id, std::uint64_t seed,
                                           const std::vector<std::shared_ptr<const GroundTruth>>& truths);

std::vector<std::shared_ptr<const GroundTruth>> grid_ground_truths(const GenerationGrid& grid);

MatrixX feature_matrix(const std::vector<LabeledExample>& examples);
std::vector<int> label_vector(const std::vector<LabeledExample>& examples);

template <class T>
std::vector<T> take(const std::vector<T>& all, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(all.at(i));
  return out;
}

MatrixX take_rows(const MatrixX& X, const std::vector<std::size_t>& idx);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified split; each class contributes round(ratio * n_class) training
/// rows, rounded so the total is round(ratio * n).
SplitIndices split(const std::vector<int>& labels, double ratio, std::uint64_t seed);

/// Stratified k folds of near-equal size (sizes differ by at most one).
std::vector<std::vector<std::size_t>> kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

}  // namespace stepnav
