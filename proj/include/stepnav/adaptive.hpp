#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "stepnav/features.hpp"
#include "stepnav/scenario.hpp"
#include "stepnav/svm.hpp"

namespace stepnav {

/// Step in force plus the recent predictions that gate switching.
struct AdaptivePolicyState {
  double current = 0.002;
  std::deque<double> history;
  int capacity = 20;
  bool hysteresis = true;
  int switches = 0;
};

/// Records a prediction and returns the step for the next iteration. With
/// hysteresis the step changes only once the whole history (full length)
/// agrees on a class other than the one in force; without it every
/// differing prediction switches immediately.
double adaptive_step(AdaptivePolicyState& state, double predicted);

/// Learned step controller: feeds a rolling feature window, queries the
/// classifier every tuning period once warm-up is over.
class AdaptiveController final : public StepController {
 public:
  AdaptiveController(std::shared_ptr<const SvmModel> model, const AdaptiveOptions& options,
                     const NoiseDescriptor& noise, TimeMs tuning_period);

  TimeMs initial_step(const NavState& initial) override;
  TimeMs next_step(const TickInfo& tick) override;

  const AdaptivePolicyState& policy_state() const { return state_; }
  std::int64_t predictions() const { return predictions_; }
  bool model_missing() const { return !model_; }

 private:
  std::shared_ptr<const SvmModel> model_;
  AdaptiveOptions options_;
  NoiseDescriptor noise_;
  TimeMs tuning_period_;
  FeatureWindow window_;
  AdaptivePolicyState state_;
  std::int64_t samples_ = 0;
  std::int64_t predictions_ = 0;
};

NoiseDescriptor noise_descriptor(const ScenarioConfig& config);

std::unique_ptr<StepController> make_adaptive_controller(const Learned& policy, const ScenarioConfig& config);

struct AdaptiveRun {
  RunMetrics metrics;
  int switches = 0;
  std::int64_t predictions = 0;
};

AdaptiveRun run_adaptive(const ScenarioConfig& config, std::shared_ptr<const SvmModel> model,
                         const AdaptiveOptions& options = {}, const RunOptions& run_options = {});

/// A linear model whose decision is the constant +1 (fine) or -1 (coarse).
std::shared_ptr<const SvmModel> constant_model(double step, int dimension = kFeatureCount);

}  // namespace stepnav
