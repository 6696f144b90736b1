#include <doctest.h>

#include <cmath>
#include <set>

#include "stepnav/adaptive.hpp"
#include "stepnav/baseline.hpp"
#include "stepnav/scenario.hpp"
#include "stepnav/sensors.hpp"

using namespace stepnav;

namespace {

ScenarioConfig short_config(double duration = 20.0) {
  ScenarioConfig c = gnss_sensitivity_config();
  c.trajectory.duration = duration;
  c.mc_n = 1;
  return c;
}

}  // namespace

TEST_CASE("seed derivation is stable and spreads indices") {
  CHECK(derive_seed(7, 1, 0) == derive_seed(7, 1, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(42, s, i));
  }
  CHECK(seen.size() == 200);
  CHECK(run_seed(5, 3) == derive_seed(5, 0, 3));
}

TEST_CASE("noise samples have the configured variance") {
  GaussianNoise n(123);
  const Vec3 var(0.04, 1e-6, 0.0);
  const int N = 200000;
  Vec3 sum = Vec3::Zero(), sq = Vec3::Zero();
  for (int i = 0; i < N; ++i) {
    const Vec3 x = n.sample(var);
    sum += x;
    sq += x.cwiseProduct(x);
  }
  const Vec3 mean = sum / N;
  const Vec3 v = sq / N - mean.cwiseProduct(mean);
  // Sample variance has relative std sqrt(2/N), about 0.3 %.
  CHECK(v.x() == doctest::Approx(0.04).epsilon(0.015));
  CHECK(v.y() == doctest::Approx(1e-6).epsilon(0.015));
  CHECK(v.z() == 0.0);
  CHECK(std::abs(mean.x()) < 5.0 * std::sqrt(0.04 / N));
}

TEST_CASE("aiding epochs fall on multiples of dtau") {
  TrajectorySpec spec;
  spec.duration = 10.5;
  const GroundTruth gt = gen_trajectory(spec);
  const auto m = synth_aiding(gt, AidingKind::Gnss, Vec3::Zero(), 2000, 1);
  REQUIRE(m.size() == 5);
  CHECK(m.front().time == doctest::Approx(2.0));
  CHECK(m.back().time == doctest::Approx(10.0));
  CHECK((m[0].velocity - gt.at(2000).velocity).norm() == 0.0);
}

TEST_CASE("zero-noise run tracks the truth") {
  ScenarioConfig c = short_config(60.0);
  c.imu_noise = {};
  c.aiding_var = Vec3::Zero();
  RunOptions o;
  o.check_health = true;
  const RunMetrics m = run_scenario(c, FixedStep{0.01}, o);
  CHECK(m.mean_speed_error < 1e-6);
  CHECK(m.iterations == 6000);
  CHECK(m.updates == 60);
  CHECK(m.health.violations == 0);
}

TEST_CASE("runs are reproducible and seed dependent") {
  const ScenarioConfig c = short_config();
  const RunMetrics a = run_scenario(c, FixedStep{0.01});
  const RunMetrics b = run_scenario(c, FixedStep{0.01});
  CHECK(a.mean_speed_error == b.mean_speed_error);
  ScenarioConfig d = c;
  d.seed = c.seed + 1;
  CHECK(run_scenario(d, FixedStep{0.01}).mean_speed_error != a.mean_speed_error);
}

TEST_CASE("monte carlo does not depend on the job count") {
  const ScenarioConfig c = short_config(10.0);
  const auto one = monte_carlo(c, FixedStep{0.01}, 4, 1);
  const auto three = monte_carlo(c, FixedStep{0.01}, 4, 3);
  CHECK(one.run_mean == three.run_mean);
  CHECK(one.mean.mean_speed_error == three.mean.mean_speed_error);
  CHECK(one.run_mean[0] == run_scenario(c, FixedStep{0.01}).mean_speed_error);
}

TEST_CASE("steps are shortened to land on aiding epochs") {
  ScenarioConfig c = short_config(3.0);
  c.dtau = 1.0;
  const RunMetrics m = run_scenario(c, FixedStep{0.3});
  // 0.3, 0.3, 0.3, 0.1 per second.
  CHECK(m.iterations == 12);
  CHECK(m.updates == 3);
}

TEST_CASE("speed threshold baseline") {
  CHECK(baseline_policy(6.0, 5.0, 0.002, 0.04) == 0.002);
  CHECK(baseline_policy(5.0, 5.0, 0.002, 0.04) == 0.04);
  CHECK(baseline_policy(0.0, 5.0, 0.002, 0.04) == 0.04);
}

TEST_CASE("policy strings") {
  CHECK(std::get<FixedStep>(parse_policy("fixed:0.04").policy).dt == 0.04);
  CHECK(std::get<SpeedThreshold>(parse_policy("speed:3").policy).threshold == 3.0);
  CHECK(parse_policy("learned:m.json").model_path == "m.json");
  CHECK_THROWS(parse_policy("fixed"));
  CHECK_THROWS(parse_policy("magic:1"));
}

TEST_CASE("step selection takes the largest step within the bound") {
  std::vector<SweepRow> rows = {{0.002, 0.05, 0, 0}, {0.01, 0.08, 0, 0}, {0.04, 0.12, 0, 0}};
  auto r = select_step(rows, 0.1);
  CHECK(r.best_dt == 0.01);
  CHECK_FALSE(r.out_of_bound);
  r = select_step(rows, 0.01);
  CHECK(r.best_dt == 0.002);
  CHECK(r.out_of_bound);
}

TEST_CASE("iteration count from a timeline") {
  std::vector<TimelineSegment> t = {{0.0, 10.0, 0.002}, {10.0, 40.0, 0.04}};
  CHECK(count_iterations(t, 40.0) == 5000 + 750);
  CHECK_THROWS_AS(count_iterations(t, 50.0), ValidationError);
  t[1].t_start_s = 11.0;
  CHECK_THROWS_AS(count_iterations(t, 40.0), ValidationError);
}

TEST_CASE("timeline agrees with the iteration count") {
  const ScenarioConfig c = short_config(10.0);
  const RunMetrics m = run_scenario(c, SpeedThreshold{4.0, 0.002, 0.04});
  CHECK(count_iterations(m.timeline, 10.0) == m.iterations);
}

TEST_CASE("config validation") {
  ScenarioConfig c = short_config();
  c.dt = 0.0005;
  CHECK_THROWS(c.validate());
  c = short_config();
  c.imu_noise.accel_var.x() = -1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("IMU noise synthesis") {
  std::vector<ImuSample> exact(100000);
  for (std::size_t k = 0; k < exact.size(); ++k) {
    exact[k].specific_force = Vec3(0.1, -0.2, -9.8);
    exact[k].angular_rate = Vec3(0.01, 0.0, 0.02);
  }
  const auto same = synth_imu(exact, ProcessNoiseConfig{}, 4);
  CHECK(same[123].specific_force == exact[123].specific_force);
  CHECK(same[999].angular_rate == exact[999].angular_rate);

  ProcessNoiseConfig q;
  q.accel_var = Vec3::Constant(4e-4);
  q.gyro_var = Vec3::Constant(4e-6);
  const auto noisy = synth_imu(exact, q, 4);
  double sa = 0.0, sg = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    sa += (noisy[k].specific_force - exact[k].specific_force).squaredNorm();
    sg += (noisy[k].angular_rate - exact[k].angular_rate).squaredNorm();
  }
  CHECK(sa / (3.0 * exact.size()) == doctest::Approx(4e-4).epsilon(0.05));
  CHECK(sg / (3.0 * exact.size()) == doctest::Approx(4e-6).epsilon(0.05));
}

TEST_CASE("averaging more runs reduces the spread of the estimate") {
  ScenarioConfig c = short_config(10.0);
  c.imu_noise.accel_var = Vec3::Constant(0.05 * 0.05);
  c.aiding_var = Vec3::Constant(0.02 * 0.02);
  const auto runs = monte_carlo(c, FixedStep{0.02}, 512, 2).run_mean;
  auto spread_of_means = [&](std::size_t n) {
    std::vector<double> means;
    for (std::size_t b = 0; b + n <= runs.size(); b += n) {
      double s = 0.0;
      for (std::size_t i = b; i < b + n; ++i) s += runs[i];
      means.push_back(s / static_cast<double>(n));
    }
    double m = 0.0, v = 0.0;
    for (double x : means) m += x;
    m /= static_cast<double>(means.size());
    for (double x : means) v += (x - m) * (x - m);
    return std::sqrt(v / static_cast<double>(means.size() - 1));
  };
  // Expected ratio is 2 for N = 4 versus N = 16; allow for sampling noise.
  const double ratio = spread_of_means(4) / spread_of_means(16);
  CHECK(ratio > 1.4);
  CHECK(ratio < 2.8);
}
