// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
// usage: stepnav_acceptance <path to stepnav executable> [scratch dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include "stepnav/adaptive.hpp"
#include "stepnav/dataset.hpp"
#include "stepnav/es_ekf.hpp"
#include "stepnav/evaluation.hpp"
#include "stepnav/io.hpp"
#include "stepnav/mrmr.hpp"
#include "stepnav/scenario.hpp"
#include "stepnav/svm.hpp"

using namespace stepnav;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

HealthStats g_health;  // every health-checked run of this binary

void note_health(const HealthStats& h) { g_health.merge(h); }

RunOptions checked() {
  RunOptions o;
  o.check_health = true;
  return o;
}

// ---- 1 ----------------------------------------------------------------------

Outcome zero_noise() {
  ScenarioConfig c = gnss_sensitivity_config();
  c.imu_noise = {};
  c.aiding_var = Vec3::Zero();
  const auto t0 = Clock::now();
  const RunMetrics m = run_scenario(c, FixedStep{c.dt}, checked());
  const double secs = seconds_since(t0);
  note_health(m.health);
  return {m.mean_speed_error < 1e-6 && secs < 10.0 && !m.diverged,
          fmt("mean speed error %.3g m/s over %.0f s (< 1e-6), %.2f s (< 10)", m.mean_speed_error,
              c.trajectory.duration, secs)};
}

// ---- 2 ----------------------------------------------------------------------

Outcome sensitivity_trend() {
  const ScenarioConfig c = gnss_sensitivity_config();
  const auto candidates = default_step_candidates();
  const auto gt = make_ground_truth(c);
  const auto t0 = Clock::now();
  std::vector<double> rmse;
  for (double dt : candidates) {
    const MonteCarloResult r = monte_carlo(c, FixedStep{dt}, 25, jobs(), gt, true);
    note_health(r.mean.health);
    rmse.push_back(r.mean.rmse_speed_error);
  }
  const double secs = seconds_since(t0);
  bool monotone = true;
  for (std::size_t k = 1; k < rmse.size(); ++k) monotone = monotone && rmse[k] >= 0.9 * rmse[k - 1];
  double at_01 = NAN;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (candidates[k] == 0.01) at_01 = rmse[k];
  }
  const bool in_band = at_01 >= 0.03 && at_01 <= 0.12;
  std::ostringstream curve;
  for (std::size_t k = 0; k < rmse.size(); ++k) curve << (k ? " " : "") << candidates[k] << ":" << fmt("%.4f", rmse[k]);
  return {monotone && in_band && secs < 300.0,
          fmt("trend %s, RMSE(0.01) = %.4f m/s (band [0.03, 0.12] %s), %.0f s (< 300); ", monotone ? "ok" : "broken",
              at_01, in_band ? "met" : "missed", secs) +
              "RMSE by dt " + curve.str()};
}

// ---- 4 ----------------------------------------------------------------------

Outcome oracles() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.01, 3.0), z(-5.0, 5.0);
  double worst = 0.0;
  using M1 = Eigen::Matrix<double, 1, 1>;
  for (int i = 0; i < 1000; ++i) {
    const double p = u(rng), r = u(rng), h = u(rng), m = z(rng), meas = z(rng);
    const M1 P = M1::Constant(p), H = M1::Constant(h), R = M1::Constant(r);
    const auto K = gain<1, 1>(P, H, R);
    const auto out = update<1, 1>(M1::Constant(h * m - meas), K, P, H);
    // Batch least squares over the prior and the measurement.
    const double info = 1.0 / p + h * h / r;
    const double mean = (m / p + h * meas / r) / info;
    worst = std::max({worst, std::abs((m - out.dx(0)) - mean), std::abs(out.P(0, 0) - 1.0 / info),
                      std::abs(K(0, 0) - p * h / (h * h * p + r))});
  }
  std::uniform_int_distribution<int> size(1, 20), coin(0, 1), level(0, 6);
  double auc_worst = 0.0;
  int instances = 0;
  for (int t = 0; t < 5000; ++t) {
    const int n = size(rng);
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
      s.push_back(t % 2 ? level(rng) * 0.25 : z(rng));
      y.push_back(coin(rng) ? 1 : -1);
    }
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || pos == n) continue;
    auc_worst = std::max(auc_worst, std::abs(trapezoid_auc(roc_curve(s, y)) - pairwise_auc(s, y)));
    ++instances;
  }
  return {worst <= 1e-9 && auc_worst <= 1e-12,
          fmt("gain/update vs least squares max diff %.2g (<= 1e-9) on 1000 instances; "
              "trapezoid vs pair-count AuC max diff %.2g on %d instances with n <= 20",
              worst, auc_worst, instances)};
}

// ---- 5, 6 -------------------------------------------------------------------

struct DeskData {
  GenerationGrid grid;
  Dataset data;
  double seconds = 0.0;
};

constexpr std::uint64_t kDatasetSeed = 1;

Outcome dataset_soundness(DeskData& desk) {
  desk.grid = GenerationGrid::desk();
  const auto t0 = Clock::now();
  desk.data = generate_dataset(desk.grid, kDatasetSeed, jobs());
  desk.seconds = seconds_since(t0);

  std::mt19937_64 rng(derive_seed(kDatasetSeed, 6, 0));
  std::vector<std::size_t> idx(desk.data.examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(50);
  std::sort(idx.begin(), idx.end());

  int ok = 0, flagged = 0, coarse = 0;
  double worst_ratio = 0.0;
  for (std::size_t i : idx) {
    const LabeledExample& e = desk.data.examples[i];
    if (e.out_of_bound) {
      ++ok, ++flagged;
      continue;
    }
    coarse += e.label_dt == kCoarseStep;
    // Fresh noise: the Monte-Carlo tolerance is about new realizations.
    ScenarioConfig c = scenario_for_id(desk.grid, e.scenario_id, kDatasetSeed);
    c.seed = derive_seed(kDatasetSeed, 5, static_cast<std::uint64_t>(e.scenario_id));
    const MonteCarloResult r = monte_carlo(c, FixedStep{e.label_dt}, 4, jobs(), nullptr, true);
    note_health(r.mean.health);
    const double ratio = r.mean.mean_speed_error / desk.grid.bound;
    worst_ratio = std::max(worst_ratio, ratio);
    ok += ratio <= 1.1;
  }
  const double secs = seconds_since(t0);
  const double rate = ok / 50.0;
  return {desk.data.examples.size() == 2000 && rate >= 0.95 && secs < 900.0,
          fmt("%zu examples in %.0f s; %d/50 resampled scenarios within 1.1 B (%d coarse, %d fine, %d flagged out of "
              "bound), worst E/B %.3f; rate %.2f (>= 0.95), %.0f s total (< 900)",
              desk.data.examples.size(), desk.seconds, ok, coarse, 50 - flagged - coarse, flagged, worst_ratio, rate,
              secs)};
}

std::vector<double> scores(const SvmModel& m, const MatrixX& X) {
  std::vector<double> s;
  for (Eigen::Index i = 0; i < X.rows(); ++i) s.push_back(m.decision(VectorX(X.row(i).transpose())));
  return s;
}

Outcome classifier_quality(const DeskData& desk, std::shared_ptr<const SvmModel>& model) {
  const MatrixX X = feature_matrix(desk.data.examples);
  const std::vector<int> y = label_vector(desk.data.examples);
  const SplitIndices s = split(y, 0.8, kDatasetSeed);
  SvmModel m = train_svm(take_rows(X, s.train), take(y, s.train));
  const EvalReport test = evaluate_scores(scores(m, take_rows(X, s.test)), take(y, s.test));
  model = std::make_shared<const SvmModel>(std::move(m));

  const auto folds = kfold(y, 5, kDatasetSeed);
  double acc = 0.0, auc = 0.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> tr;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) tr.insert(tr.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(tr.begin(), tr.end());
    const SvmModel fm = train_svm(take_rows(X, tr), take(y, tr));
    const EvalReport r = evaluate_scores(scores(fm, take_rows(X, folds[f])), take(y, folds[f]));
    acc += r.accuracy / 5.0;
    auc += r.auc / 5.0;
  }
  const bool pass = test.accuracy >= 0.90 && test.auc >= 0.93 && std::abs(acc - test.accuracy) <= 0.03 &&
                    std::abs(auc - test.auc) <= 0.03;
  return {pass, fmt("linear SVM, 80/20 split: accuracy %.4f (>= 0.90), AuC %.4f (>= 0.93); 5-fold accuracy %.4f, "
                    "AuC %.4f (within 0.03); converged %s",
                    test.accuracy, test.auc, acc, auc, model->info.converged ? "yes" : "no")};
}

// ---- 7 ----------------------------------------------------------------------

Outcome adaptive_payoff(const std::shared_ptr<const SvmModel>& model) {
  const double B = 0.1;
  auto fixed = [](const ScenarioConfig& c, double dt) {
    const RunMetrics m = run_scenario(c, FixedStep{dt}, checked());
    note_health(m.health);
    return m;
  };

  const ScenarioConfig g = gnss_adaptive_config();
  const RunMetrics g_fine = fixed(g, 0.002), g_coarse = fixed(g, 0.04);
  const AdaptiveRun g_ad = run_adaptive(g, model, AdaptiveOptions{}, checked());
  note_health(g_ad.metrics.health);
  const bool g_iter = g_ad.metrics.iterations <= 0.2 * static_cast<double>(g_fine.iterations);
  const bool g_err = g_ad.metrics.mean_speed_error <= 1.1 * g_coarse.mean_speed_error;

  const ScenarioConfig d = dvl_adaptive_config();
  const RunMetrics d_fine = fixed(d, 0.002), d_coarse = fixed(d, 0.04);
  const AdaptiveRun d_ad = run_adaptive(d, model, AdaptiveOptions{}, checked());
  note_health(d_ad.metrics.health);
  const bool d_iter = d_ad.metrics.iterations > d_coarse.iterations && d_ad.metrics.iterations < d_fine.iterations;
  const bool d_err = d_ad.metrics.mean_speed_error <= B;

  return {g_iter && g_err && d_iter && d_err,
          fmt("GNSS: %lld iterations vs %lld fixed 0.002 (<= 20%%: %s), error %.4f vs 1.1 x %.4f (%s); "
              "DVL: %lld iterations between %lld and %lld (%s), error %.4f (<= B: %s)",
              static_cast<long long>(g_ad.metrics.iterations), static_cast<long long>(g_fine.iterations),
              g_iter ? "yes" : "no", g_ad.metrics.mean_speed_error, g_coarse.mean_speed_error, g_err ? "ok" : "exceeded",
              static_cast<long long>(d_ad.metrics.iterations), static_cast<long long>(d_coarse.iterations),
              static_cast<long long>(d_fine.iterations), d_iter ? "yes" : "no", d_ad.metrics.mean_speed_error,
              d_err ? "yes" : "no")};
}

// ---- 8 ----------------------------------------------------------------------

bool same_metrics(const RunMetrics& a, const RunMetrics& b) {
  if (a.mean_speed_error != b.mean_speed_error || a.rmse_speed_error != b.rmse_speed_error ||
      a.max_speed_error != b.max_speed_error || a.iterations != b.iterations || a.updates != b.updates ||
      a.timeline.size() != b.timeline.size() || a.trace.size() != b.trace.size()) {
    return false;
  }
  for (std::size_t k = 0; k < a.timeline.size(); ++k) {
    if (a.timeline[k].t_start_s != b.timeline[k].t_start_s || a.timeline[k].t_end_s != b.timeline[k].t_end_s ||
        a.timeline[k].dt_s != b.timeline[k].dt_s) {
      return false;
    }
  }
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    if (a.trace[k].speed_error_mps != b.trace[k].speed_error_mps || a.trace[k].p_trace_vel != b.trace[k].p_trace_vel) {
      return false;
    }
  }
  return true;
}

Outcome policy_equivalence() {
  int cases = 0, equal = 0;
  for (ScenarioConfig c : {gnss_adaptive_config(), dvl_adaptive_config()}) {
    c.trajectory.duration = std::min(c.trajectory.duration, 60.0);
    for (double step : {kFineStep, kCoarseStep}) {
      RunOptions o = checked();
      o.record_trace = true;
      AdaptiveOptions a;
      a.dt0 = step;
      a.hysteresis = false;
      const AdaptiveRun ad = run_adaptive(c, constant_model(step), a, o);
      const RunMetrics fx = run_scenario(c, FixedStep{step}, o);
      note_health(ad.metrics.health);
      note_health(fx.health);
      ++cases;
      equal += same_metrics(ad.metrics, fx) && ad.switches == 0;
    }
  }
  return {equal == cases, fmt("%d/%d constant-model runs bit-identical to the fixed policy (GNSS and DVL, both steps)",
                              equal, cases)};
}

// ---- 9 ----------------------------------------------------------------------

Outcome mrmr_sanity() {
  int first = 0, no_duplicate_pair = 0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(900 + t);
    std::normal_distribution<double> g(0.0, 1.0);
    const int n = 500, d = 8;
    const int key = t % d;
    const int dup = (key + 3) % d;
    MatrixX X(n, d);
    std::vector<int> y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = g(rng);
      y[i] = X(i, key) > 0.2 ? 1 : -1;
      X(i, dup) = X(i, key);
    }
    const auto r = mrmr_rank(X, y);
    const bool key_first = r[0].feature == key || r[0].feature == dup;
    first += key_first;
    const bool both = (r[0].feature == key && r[1].feature == dup) || (r[0].feature == dup && r[1].feature == key);
    no_duplicate_pair += !both;
  }
  return {first == trials && no_duplicate_pair == trials,
          fmt("label feature (or its copy) ranked first in %d/%d trials; copy never in the top two with it in %d/%d",
              first, trials, no_duplicate_pair, trials)};
}

// ---- 10 ---------------------------------------------------------------------

bool files_equal(const fs::path& a, const fs::path& b) {
  if (!fs::exists(a) || !fs::exists(b)) return false;
  return read_text(a) == read_text(b);
}

bool dirs_equal(const fs::path& a, const fs::path& b) {
  std::vector<std::string> na, nb;
  for (const auto& e : fs::directory_iterator(a)) na.push_back(e.path().filename().string());
  for (const auto& e : fs::directory_iterator(b)) nb.push_back(e.path().filename().string());
  std::sort(na.begin(), na.end());
  std::sort(nb.begin(), nb.end());
  if (na != nb || na.empty()) return false;
  for (const auto& n : na) {
    if (!files_equal(a / n, b / n)) return false;
  }
  return true;
}

Outcome reproducibility(const fs::path& exe, const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string q = "\"" + exe.string() + "\"";
  auto in = [&](const std::string& name) { return "\"" + (root / name).string() + "\""; };

  write_json(root / "sim.json", Json::parse(R"({"preset": "gnss_sensitivity", "duration_s": 20, "mc_n": 3,
      "sweep": {"candidates": [0.002, 0.01, 0.04], "bound": 0.1}})"));
  write_json(root / "dvl.json", Json::parse(R"({"preset": "dvl_adaptive", "duration_s": 20})"));
  write_json(root / "grid.json", Json::parse(R"({"grid": {"preset": "desk",
      "aiding_std": {"count": 2}, "dtau": {"count": 2}, "accel_std": {"count": 3}, "gyro_std": {"count": 3},
      "trajectories": [
        {"aiding": "gnss", "trajectory": {"kind": "circle", "speed": 4, "radius": 25, "duration_s": 10}},
        {"aiding": "dvl", "trajectory": {"kind": "rectangle", "speed": 1.5, "radius": 2, "leg_north": 20,
                                          "leg_east": 10, "duration_s": 10, "p0": [32, 34, -5]}}]}})"));

  struct Cmd {
    std::string name, args;
  };
  const std::vector<Cmd> cmds = {
      {"simulate", "--config " + in("sim.json") + " --trace --seed 3"},
      {"sweep", "--config " + in("sim.json") + " --mc 2"},
      {"gen-dataset", "--config " + in("grid.json") + " --seed 4"},
      {"train", "--dataset " + in("gen-dataset/dataset.csv") + " --kfold 3 --seed 4"},
      {"rank", "--dataset " + in("gen-dataset/dataset.csv")},
      {"evaluate", "--dataset " + in("gen-dataset/dataset.csv") + " --model " + in("train/model.json")},
      {"run-adaptive", "--config " + in("dvl.json") + " --model " + in("train/model.json")},
      {"export-log", "--config " + in("sim.json") + " --dt 0.002"},
      {"replay", "--config " + in("sim.json") + " --log " + in("export-log/log.csv") + " --policy speed:4.5"},
  };
  int same = 0;
  std::string failed;
  for (const auto& c : cmds) {
    const fs::path first = root / c.name, second = root / (c.name + "_rerun");
    const std::string log = " 2>>\"" + (root / "stderr.txt").string() + "\"";
    const int a = std::system((q + " " + c.name + " " + c.args + " --out \"" + first.string() + "\"" + log).c_str());
    const int b = std::system((q + " " + c.name + " --manifest \"" + (first / "manifest.json").string() +
                               "\" --jobs 2 --out \"" + second.string() + "\"" + log)
                                  .c_str());
    if (a == 0 && b == 0 && dirs_equal(first, second)) ++same;
    else failed += " " + c.name;
  }
  // A malformed input must fail with a JSON error and a nonzero status.
  write_text(root / "bad.csv", "time_s,dt_s\n0,0.01\n");
  const int bad = std::system((q + " replay --config " + in("sim.json") + " --log " + in("bad.csv") + " --out \"" +
                               (root / "bad").string() + "\" 2>\"" + (root / "bad_err.txt").string() + "\"")
                                  .c_str());
  const bool error_json = bad != 0 && read_text(root / "bad_err.txt").find("\"error\"") != std::string::npos;
  const int n = static_cast<int>(cmds.size());
  return {same == n && error_json,
          fmt("%d/%d commands byte-identical when rerun from their manifest; malformed log rejected with error JSON: %s",
              same, n, error_json ? "yes" : "no") +
              (failed.empty() ? "" : "; differing:" + failed)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <stepnav executable> [scratch dir]\n", argv[0]);
    return 2;
  }
  const fs::path exe = fs::absolute(argv[1]);
  const fs::path scratch = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "stepnav_acceptance";

  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d %-34s %s | %s [%.1f s]\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  DeskData desk;
  std::shared_ptr<const SvmModel> model;
  report(1, "zero-noise consistency", zero_noise);
  report(2, "step-size sensitivity trend", sensitivity_trend);
  report(4, "small-instance oracle equivalence", oracles);
  report(5, "dataset generation soundness", [&] { return dataset_soundness(desk); });
  report(6, "classifier quality", [&] { return classifier_quality(desk, model); });
  report(7, "adaptive-loop payoff", [&] {
    if (!model) return Outcome{false, "no model (criterion 6 did not train one)"};
    return adaptive_payoff(model);
  });
  report(8, "policy equivalence", policy_equivalence);
  report(9, "MRMR sanity", mrmr_sanity);
  report(10, "CLI reproducibility", [&] { return reproducibility(exe, scratch); });
  report(3, "filter health", [&] {
    return Outcome{g_health.violations == 0 && g_health.checks > 0,
                   fmt("%lld checks over the runs above, %lld violations; max symmetry %.2g, min eigenvalue %.2g, "
                       "max orthonormality %.2g",
                       static_cast<long long>(g_health.checks), static_cast<long long>(g_health.violations),
                       g_health.max_symmetry_error, g_health.min_eigenvalue, g_health.max_orthonormality_error)};
  });
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
