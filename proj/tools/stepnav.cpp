// stepnav: command-line front end for simulation, dataset generation,
// training and adaptive-step runs. Every command writes manifest.json next
// to its outputs; `--manifest` replays a recorded invocation.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stepnav/adaptive.hpp"
#include "stepnav/dataset.hpp"
#include "stepnav/evaluation.hpp"
#include "stepnav/io.hpp"
#include "stepnav/mrmr.hpp"
#include "stepnav/scenario.hpp"
#include "stepnav/svm.hpp"

namespace fs = std::filesystem;
using namespace stepnav;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Args {
  std::string command;
  std::string config_path;
  std::string manifest_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string policy;
  int mc = 0;
  double split = 0.8;
  int kfold = 5;
  std::string dataset;
  std::string model;
  std::string log;
  std::string kernel = "linear";
  double C = 1.0;
  std::string grid;
  double dt = 0.0;
  bool no_hysteresis = false;
  bool drop_out_of_bound = false;
  bool trace = false;
  int bins = kMrmrBins;

  Json config;  // raw config document, from --config or the manifest
};

// Only the fields that shape outputs; --out and --jobs never do.
Json args_json(const Args& a) {
  Json j;
  j["seed"] = a.seed ? Json(*a.seed) : Json(nullptr);
  j["policy"] = a.policy;
  j["mc"] = a.mc;
  j["split"] = a.split;
  j["kfold"] = a.kfold;
  j["dataset"] = a.dataset;
  j["model"] = a.model;
  j["log"] = a.log;
  j["kernel"] = a.kernel;
  j["C"] = a.C;
  j["grid"] = a.grid;
  j["dt"] = a.dt;
  j["no_hysteresis"] = a.no_hysteresis;
  j["drop_out_of_bound"] = a.drop_out_of_bound;
  j["trace"] = a.trace;
  j["bins"] = a.bins;
  return j;
}

void args_from_json(const Json& j, Args& a) {
  a.seed = j.at("seed").is_null() ? std::nullopt : std::optional<std::uint64_t>(j.at("seed").get<std::uint64_t>());
  a.policy = j.at("policy").get<std::string>();
  a.mc = j.at("mc").get<int>();
  a.split = j.at("split").get<double>();
  a.kfold = j.at("kfold").get<int>();
  a.dataset = j.at("dataset").get<std::string>();
  a.model = j.at("model").get<std::string>();
  a.log = j.at("log").get<std::string>();
  a.kernel = j.at("kernel").get<std::string>();
  a.C = j.at("C").get<double>();
  a.grid = j.at("grid").get<std::string>();
  a.dt = j.at("dt").get<double>();
  a.no_hysteresis = j.at("no_hysteresis").get<bool>();
  a.drop_out_of_bound = j.at("drop_out_of_bound").get<bool>();
  a.trace = j.at("trace").get<bool>();
  a.bins = j.at("bins").get<int>();
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("STEPNAV_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(s, &pos);
    if (pos != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(std::string("STEPNAV_SEED is not an unsigned integer: ") + s);
  }
}

/// Collects outputs and writes the manifest last.
class Run {
 public:
  explicit Run(const Args& a) : args_(a), out_(a.out) { fs::create_directories(out_); }

  fs::path path(const std::string& name) {
    outputs_.push_back(name);
    return out_ / name;
  }

  void input(const std::string& role, const std::string& p) {
    inputs_.push_back({{"role", role}, {"path", p}, {"fnv1a", hex64(fnv1a(read_text(p)))}});
  }

  void finish(const Json& resolved) {
    Json m;
    m["tool"] = "stepnav";
    m["version"] = kVersion;
    m["command"] = args_.command;
    m["args"] = args_json(args_);
    m["config"] = args_.config;
    m["config_hash"] = hex64(fnv1a(args_.config.dump()));
    m["resolved"] = resolved;
    m["inputs"] = inputs_;
    Json outs = Json::array();
    for (const auto& name : outputs_) {
      outs.push_back({{"file", name}, {"fnv1a", hex64(fnv1a(read_text(out_ / name)))}});
    }
    m["outputs"] = outs;
    write_json(out_ / "manifest.json", m);
  }

 private:
  const Args& args_;
  fs::path out_;
  Json inputs_ = Json::array();
  std::vector<std::string> outputs_;
};

ScenarioConfig scenario(const Args& a) {
  ScenarioConfig c = config_from_json(a.config.is_null() ? Json::object() : a.config);
  if (a.seed) c.seed = *a.seed;
  else if (const auto s = env_seed()) c.seed = *s;
  c.validate();
  return c;
}

std::uint64_t plain_seed(const Args& a, std::uint64_t fallback) {
  if (a.seed) return *a.seed;
  if (const auto s = env_seed()) return *s;
  if (a.config.is_object() && a.config.contains("seed")) return a.config.at("seed").get<std::uint64_t>();
  return fallback;
}

AdaptiveOptions adaptive_options(const Args& a) {
  AdaptiveOptions o;
  if (a.config.is_object() && a.config.contains("adaptive")) o = adaptive_options_from_json(a.config.at("adaptive"), o);
  if (a.no_hysteresis) o.hysteresis = false;
  return o;
}

StepSizePolicy resolve_policy(const Args& a, const ScenarioConfig& c, Run& run) {
  if (a.policy.empty()) return FixedStep{c.dt};
  PolicySpec spec = parse_policy(a.policy);
  if (auto* l = std::get_if<Learned>(&spec.policy)) {
    run.input("model", spec.model_path);
    l->model = load_model(spec.model_path);
    l->options = adaptive_options(a);
  }
  return spec.policy;
}

void write_run_outputs(Run& run, const RunMetrics& m, Json metrics) {
  write_json(run.path("metrics.json"), metrics);
  write_timeline_csv(run.path("timeline.csv"), m.timeline);
  if (!m.trace.empty()) write_trace_csv(run.path("trace.csv"), m.trace);
}

void cmd_simulate(const Args& a) {
  Run run(a);
  const ScenarioConfig c = scenario(a);
  const StepSizePolicy policy = resolve_policy(a, c, run);
  const int n = a.mc > 0 ? a.mc : c.mc_n;
  RunOptions opts;
  opts.check_health = true;
  opts.record_trace = a.trace;
  const RunMetrics first = run_scenario(c, policy, opts);
  Json j = metrics_to_json(first);
  if (n > 1) {
    const MonteCarloResult mc = monte_carlo(c, policy, n, a.jobs, nullptr, true);
    j = metrics_to_json(mc.mean);
    j["run_mean_speed_error_mps"] = mc.run_mean;
    j["run_rmse_speed_error_mps"] = mc.run_rmse;
  }
  j["policy"] = policy_name(policy);
  j["mc_n"] = n;
  write_run_outputs(run, first, j);
  run.finish(config_to_json(c));
}

void cmd_sweep(const Args& a) {
  Run run(a);
  const ScenarioConfig c = scenario(a);
  std::vector<double> candidates = default_step_candidates();
  double bound = 0.1;
  if (a.config.is_object() && a.config.contains("sweep")) {
    const Json& s = a.config.at("sweep");
    if (s.contains("candidates")) candidates = s.at("candidates").get<std::vector<double>>();
    if (s.contains("bound")) bound = s.at("bound").get<double>();
  }
  const int n = a.mc > 0 ? a.mc : c.mc_n;
  const SweepResult r = sweep_step_sizes(c, candidates, bound, n, a.jobs);
  write_sweep_csv(run.path("sweep.csv"), r);
  write_json(run.path("sweep.json"), {{"best_dt_s", r.best_dt}, {"out_of_bound", r.out_of_bound},
                                      {"bound_mps", bound}, {"mc_n", n}});
  run.finish(config_to_json(c));
}

void cmd_gen_dataset(const Args& a) {
  Run run(a);
  Json gj = a.config.is_object() && a.config.contains("grid") ? a.config.at("grid") : Json::object();
  if (!a.grid.empty()) gj["preset"] = a.grid;
  const GenerationGrid g = grid_from_json(gj);
  const std::uint64_t seed = plain_seed(a, 1);
  const std::int64_t total = g.scenario_count();
  const Dataset d = generate_dataset(g, seed, a.jobs, [total](std::int64_t done, std::int64_t) {
    if (done % 100 == 0 || done == total) std::cerr << "scenarios " << done << "/" << total << "\n";
  });
  write_dataset(run.path("dataset.csv"), d);
  (void)run.path("dataset.csv.json");
  run.finish({{"grid", grid_to_json(g)}, {"seed", seed}});
}

struct LoadedDataset {
  Dataset data;
  std::vector<LabeledExample> examples;
  std::string hash;
};

LoadedDataset load_dataset(const Args& a, Run& run) {
  if (a.dataset.empty()) throw ValidationError("--dataset is required");
  run.input("dataset", a.dataset);
  LoadedDataset l;
  l.data = read_dataset(a.dataset);
  l.hash = hex64(fnv1a(read_text(a.dataset)));
  for (const auto& e : l.data.examples) {
    if (!(a.drop_out_of_bound && e.out_of_bound)) l.examples.push_back(e);
  }
  if (l.examples.empty()) throw ValidationError("dataset has no usable examples");
  return l;
}

Json report_json(const EvalReport& r) {
  return {{"accuracy", r.accuracy},
          {"auc", r.auc},
          {"confusion", {{"tp", r.confusion.tp}, {"tn", r.confusion.tn}, {"fp", r.confusion.fp}, {"fn", r.confusion.fn}}}};
}

std::vector<double> scores_of(const SvmModel& m, const MatrixX& X) {
  std::vector<double> s(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) s[static_cast<std::size_t>(i)] = m.decision(VectorX(X.row(i).transpose()));
  return s;
}

void cmd_train(const Args& a) {
  Run run(a);
  const LoadedDataset l = load_dataset(a, run);
  const std::uint64_t seed = plain_seed(a, 1);
  SvmParams p;
  p.kernel = kernel_from_string(a.kernel);
  p.C = a.C;
  const MatrixX X = feature_matrix(l.examples);
  const std::vector<int> y = label_vector(l.examples);

  const SplitIndices s = split(y, a.split, seed);
  SvmModel model = train_svm(take_rows(X, s.train), take(y, s.train), p);
  model.seed = seed;
  model.dataset_hash = l.hash;
  const MatrixX Xt = take_rows(X, s.test);
  const EvalReport test = evaluate_scores(scores_of(model, Xt), take(y, s.test));

  Json report;
  report["examples"] = l.examples.size();
  report["train"] = s.train.size();
  report["test"] = s.test.size();
  report["kernel"] = a.kernel;
  report["C"] = a.C;
  report["converged"] = model.info.converged;
  report["iterations"] = model.info.iterations;
  report["support_vectors"] = model.info.support_vectors;
  report["split"] = report_json(test);

  if (a.kfold > 1) {
    const auto folds = kfold(y, a.kfold, seed);
    double acc = 0.0, auc = 0.0;
    Json per = Json::array();
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> tr;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        if (g != f) tr.insert(tr.end(), folds[g].begin(), folds[g].end());
      }
      std::sort(tr.begin(), tr.end());
      const SvmModel m = train_svm(take_rows(X, tr), take(y, tr), p);
      const EvalReport r = evaluate_scores(scores_of(m, take_rows(X, folds[f])), take(y, folds[f]));
      acc += r.accuracy;
      auc += r.auc;
      per.push_back(report_json(r));
    }
    report["kfold"] = {{"k", a.kfold},
                       {"mean_accuracy", acc / static_cast<double>(folds.size())},
                       {"mean_auc", auc / static_cast<double>(folds.size())},
                       {"folds", per}};
  }
  save_model(run.path("model.json"), model);
  write_json(run.path("train_report.json"), report);
  write_roc_csv(run.path("roc.csv"), test.roc);
  run.finish({{"seed", seed}});
}

void cmd_rank(const Args& a) {
  Run run(a);
  const LoadedDataset l = load_dataset(a, run);
  const auto ranking = mrmr_rank(feature_matrix(l.examples), label_vector(l.examples), a.bins);
  write_ranking_csv(run.path("ranking.csv"), ranking);
  run.finish({{"bins", a.bins}});
}

void cmd_evaluate(const Args& a) {
  Run run(a);
  const LoadedDataset l = load_dataset(a, run);
  if (a.model.empty()) throw ValidationError("--model is required");
  run.input("model", a.model);
  const auto model = load_model(a.model);
  const MatrixX X = feature_matrix(l.examples);
  const std::vector<int> y = label_vector(l.examples);
  std::vector<std::size_t> rows;
  // With a split ratio the held-out rows of the training split are scored.
  if (a.split > 0.0 && a.split < 1.0) {
    rows = split(y, a.split, plain_seed(a, model->seed)).test;
  } else {
    rows.resize(y.size());
    std::iota(rows.begin(), rows.end(), 0);
  }
  const EvalReport r = evaluate_scores(scores_of(*model, take_rows(X, rows)), take(y, rows));
  Json j = report_json(r);
  j["examples"] = rows.size();
  write_json(run.path("eval.json"), j);
  write_roc_csv(run.path("roc.csv"), r.roc);
  run.finish({{"split", a.split}});
}

void cmd_run_adaptive(const Args& a) {
  Run run(a);
  const ScenarioConfig c = scenario(a);
  std::string model_path = a.model;
  if (model_path.empty() && a.policy.rfind("learned:", 0) == 0) model_path = a.policy.substr(8);
  if (model_path.empty()) throw ValidationError("run-adaptive needs --model or --policy learned:<path>");
  run.input("model", model_path);
  RunOptions opts;
  opts.check_health = true;
  opts.record_trace = a.trace;
  const AdaptiveOptions o = adaptive_options(a);
  const AdaptiveRun r = run_adaptive(c, load_model(model_path), o, opts);
  Json j = metrics_to_json(r.metrics);
  j["switches"] = r.switches;
  j["predictions"] = r.predictions;
  j["hysteresis"] = o.hysteresis;
  write_run_outputs(run, r.metrics, j);
  run.finish(config_to_json(c));
}

void cmd_replay(const Args& a) {
  Run run(a);
  if (a.log.empty()) throw ValidationError("--log is required");
  run.input("log", a.log);
  auto log = std::make_shared<const SensorLog>(read_log(a.log));
  ScenarioConfig c = scenario(a);
  c.aiding = log->aiding;
  c.dtau = log->dtau;
  const StepSizePolicy policy = resolve_policy(a, c, run);
  ReplaySource source(log);
  auto controller = make_controller(policy, c);
  RunOptions opts;
  opts.check_health = true;
  opts.record_trace = a.trace;
  const RunMetrics m = run_loop(source, *controller, c, opts);
  Json j = metrics_to_json(m);
  j["policy"] = policy_name(policy);
  write_run_outputs(run, m, j);
  run.finish(config_to_json(c));
}

void cmd_export_log(const Args& a) {
  Run run(a);
  const ScenarioConfig c = scenario(a);
  const double dt = a.dt > 0.0 ? a.dt : c.dt;
  write_log(run.path("log.csv"), export_log(c, dt));
  run.finish(config_to_json(c));
}

void load_manifest(Args& a) {
  const Json m = read_json(a.manifest_path);
  if (m.value("tool", std::string()) != "stepnav") throw ParseError(a.manifest_path + ": not a stepnav manifest");
  if (m.at("command").get<std::string>() != a.command) {
    throw ValidationError("manifest was written by '" + m.at("command").get<std::string>() + "', not '" + a.command + "'");
  }
  args_from_json(m.at("args"), a);
  a.config = m.at("config");
}

void print_error(const char* kind, const std::string& message) {
  std::cerr << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Velocity-aided INS simulation with learned step-size control"};
  app.require_subcommand(1);
  Args a;
  std::optional<std::uint64_t> seed_opt;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", a.config_path, "Scenario/grid config JSON")->check(CLI::ExistingFile);
    s->add_option("--out", a.out, "Output directory");
    s->add_option("--seed", seed_opt, "Seed override (falls back to STEPNAV_SEED)");
    s->add_option("--jobs", a.jobs, "Worker threads")->check(CLI::PositiveNumber);
    s->add_option("--manifest", a.manifest_path, "Rerun the invocation recorded in a manifest")
        ->check(CLI::ExistingFile);
  };
  auto run_flags = [&](CLI::App* s) {
    s->add_option("--policy", a.policy, "fixed:<dt> | speed:<threshold> | learned:<model>");
    s->add_flag("--trace", a.trace, "Write the per-tick trace CSV");
  };

  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const Args&);
  };
  const Sub subs[] = {
      {"simulate", "Run one scenario or a Monte-Carlo batch", cmd_simulate},
      {"sweep", "Mean speed error versus fixed step size", cmd_sweep},
      {"gen-dataset", "Generate the labeled step-size dataset", cmd_gen_dataset},
      {"train", "Train the step-size classifier", cmd_train},
      {"rank", "Rank features by minimum redundancy, maximum relevance", cmd_rank},
      {"evaluate", "Accuracy, ROC and AuC of a model on a dataset", cmd_evaluate},
      {"run-adaptive", "Run a scenario with the learned step-size policy", cmd_run_adaptive},
      {"replay", "Run the filter over a recorded sensor log", cmd_replay},
      {"export-log", "Write the sensor log a fixed-step simulation consumes", cmd_export_log},
  };
  std::vector<std::pair<CLI::App*, const Sub*>> registered;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    common(sub);
    registered.push_back({sub, &s});
  }
  auto find = [&](const char* n) { return app.get_subcommand(n); };
  for (const char* n : {"simulate", "replay"}) run_flags(find(n));
  for (const char* n : {"simulate", "sweep"}) find(n)->add_option("--mc", a.mc, "Monte-Carlo runs");
  find("run-adaptive")->add_option("--policy", a.policy, "learned:<model>");
  find("run-adaptive")->add_option("--model", a.model, "Model JSON");
  find("run-adaptive")->add_flag("--no-hysteresis", a.no_hysteresis, "Switch on every differing prediction");
  find("run-adaptive")->add_flag("--trace", a.trace, "Write the per-tick trace CSV");
  find("gen-dataset")->add_option("--grid", a.grid, "Grid preset: desk or full");
  for (const char* n : {"train", "rank", "evaluate"}) {
    find(n)->add_option("--dataset", a.dataset, "Dataset CSV")->check(CLI::ExistingFile);
    find(n)->add_flag("--drop-out-of-bound", a.drop_out_of_bound, "Ignore examples flagged out of bound");
  }
  find("train")->add_option("--split", a.split, "Training fraction");
  find("train")->add_option("--kfold", a.kfold, "Cross-validation folds (0 disables)");
  find("train")->add_option("--kernel", a.kernel, "linear or poly2");
  find("train")->add_option("--C", a.C, "Soft-margin penalty");
  find("evaluate")->add_option("--model", a.model, "Model JSON")->check(CLI::ExistingFile);
  find("evaluate")->add_option("--split", a.split, "Score only the held-out part of this split (0 scores all)");
  find("rank")->add_option("--bins", a.bins, "Equal-frequency bins per feature");
  find("replay")->add_option("--log", a.log, "Sensor log CSV")->check(CLI::ExistingFile);
  find("export-log")->add_option("--dt", a.dt, "Step size of the exported log, s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return e.get_exit_code() != 0 ? e.get_exit_code() : 2;
  }

  try {
    for (const auto& [sub, s] : registered) {
      if (!sub->parsed()) continue;
      a.command = s->name;
      a.seed = seed_opt;
      if (!a.manifest_path.empty()) {
        load_manifest(a);
      } else if (!a.config_path.empty()) {
        a.config = read_json(a.config_path);
      }
      s->fn(a);
    }
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
