#include "stepnav/adaptive.hpp"

#include <algorithm>
#include <iostream>

namespace stepnav {

double adaptive_step(AdaptivePolicyState& s, double predicted) {
  if (s.capacity < 1) throw ValidationError("prediction history must hold at least one entry");
  s.history.push_back(predicted);
  while (static_cast<int>(s.history.size()) > s.capacity) s.history.pop_front();
  if (predicted == s.current) return s.current;
  const bool agreed = static_cast<int>(s.history.size()) == s.capacity &&
                      std::all_of(s.history.begin(), s.history.end(), [&](double p) { return p == predicted; });
  if (!s.hysteresis || agreed) {
    s.current = predicted;
    ++s.switches;
  }
  return s.current;
}

AdaptiveController::AdaptiveController(std::shared_ptr<const SvmModel> model, const AdaptiveOptions& options,
                                       const NoiseDescriptor& noise, TimeMs tuning_period)
    : model_(std::move(model)), options_(options), noise_(noise), tuning_period_(tuning_period) {
  if (tuning_period_ <= 0) throw ValidationError("tuning rate must be > 0");
  if (options_.warmup_samples < 0) throw ValidationError("warm-up sample count must be >= 0");
  if (model_ && model_->dimension() != kFeatureCount) {
    throw ValidationError("model expects " + std::to_string(model_->dimension()) + " features, not " +
                          std::to_string(kFeatureCount));
  }
  state_.current = options_.dt0;
  state_.capacity = options_.history;
  state_.hysteresis = options_.hysteresis;
  to_ms(options_.dt0, "dt0");
}

TimeMs AdaptiveController::initial_step(const NavState&) {
  if (!model_) std::cerr << "warning: no step-size model loaded, holding dt0 = " << options_.dt0 << " s\n";
  return to_ms(state_.current, "step");
}

TimeMs AdaptiveController::next_step(const TickInfo& tick) {
  window_.push(*tick.state);
  ++samples_;
  if (model_ && samples_ >= options_.warmup_samples && tick.t_end() % tuning_period_ == 0) {
    const FeatureVector f = extract_features(window_, noise_);
    ++predictions_;
    adaptive_step(state_, model_->predict_step(f.values));
  }
  return to_ms(state_.current, "step");
}

NoiseDescriptor noise_descriptor(const ScenarioConfig& config) {
  return {config.imu_noise.gyro_var(0), config.imu_noise.accel_var(0), config.aiding_var(0), config.dtau};
}

std::unique_ptr<StepController> make_adaptive_controller(const Learned& policy, const ScenarioConfig& config) {
  const double rate = policy.options.tuning_rate > 0.0 ? policy.options.tuning_rate : config.dtau;
  return std::make_unique<AdaptiveController>(policy.model, policy.options, noise_descriptor(config),
                                              to_ms(rate, "tuning rate"));
}

AdaptiveRun run_adaptive(const ScenarioConfig& config, std::shared_ptr<const SvmModel> model,
                         const AdaptiveOptions& options, const RunOptions& run_options) {
  config.validate();
  const double rate = options.tuning_rate > 0.0 ? options.tuning_rate : config.dtau;
  AdaptiveController controller(std::move(model), options, noise_descriptor(config), to_ms(rate, "tuning rate"));
  SimulatedSource source(make_ground_truth(config), config.aiding, to_ms(config.dtau, "dtau"), config.imu_noise,
                         config.aiding_var, run_seed(config.seed, 0));
  AdaptiveRun r;
  r.metrics = run_loop(source, controller, config, run_options);
  r.switches = controller.policy_state().switches;
  r.predictions = controller.predictions();
  return r;
}

std::shared_ptr<const SvmModel> constant_model(double step, int dimension) {
  auto m = std::make_shared<SvmModel>();
  m->kernel = KernelKind::Linear;
  m->standardizer.mean = VectorX::Zero(dimension);
  m->standardizer.scale = VectorX::Ones(dimension);
  m->weights = VectorX::Zero(dimension);
  m->support.resize(0, dimension);
  m->coef.resize(0);
  m->bias = label_from_step(step);
  return m;
}

}  // namespace stepnav
