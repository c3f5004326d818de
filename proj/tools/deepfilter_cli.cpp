// deepfilter: command-line driver for dataset generation, training,
// evaluation, robustness sweeps and table reproduction.
//
// Worker threads for out-of-sample scoring come from DEEPFILTER_THREADS.

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "deepfilter/dynamics.hpp"
#include "deepfilter/errors.hpp"
#include "deepfilter/experiment.hpp"
#include "deepfilter/path_io.hpp"
#include "deepfilter/pipeline.hpp"
#include "deepfilter/weights_io.hpp"

using namespace deepfilter;
using dynamics::ModelKind;
using dynamics::ModelSpec;
using experiment::ExperimentReport;
using experiment::ReportRow;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240601;

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kBadConfig = 2,
  kLoadFailure = 3,
  kDiverged = 4,
  kNumerical = 5,
  kInvalidRows = 6,
};

// Flags shared by the subcommands. Unset optionals keep library defaults.
struct Flags {
  std::string model = "linear1d";
  std::string arch = "dnn";
  std::optional<double> sigma0_nm;
  std::vector<double> sigma0_am;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> window;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> minibatch;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> early_stopping;
  bool quick = false;
  std::string out;
  std::string cache;
  std::string weights;
  std::string data;
  std::string table;
  bool baseline = false;
  bool verbose = false;
};

ModelSpec nominal_model(const Flags& f) {
  ModelSpec m = ModelSpec::preset(dynamics::parse_model_kind(f.model));
  if (f.sigma0_nm) m.sigma0 = *f.sigma0_nm;
  m.validate();
  return m;
}

pipeline::TrainingConfig training_config(const Flags& f) {
  pipeline::TrainingConfig t;
  if (f.quick) {
    t.n_paths = 500;
    t.epochs = 1;
  }
  if (f.paths) t.n_paths = *f.paths;
  if (f.horizon) t.horizon = *f.horizon;
  if (f.window) t.n0 = *f.window;
  if (f.lr) t.gamma = *f.lr;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.minibatch) t.minibatch = *f.minibatch;
  if (f.early_stopping) t.early_stopping = pipeline::EarlyStoppingConfig{*f.early_stopping, 0.1};
  t.validate();
  return t;
}

nn::Architecture parse_arch(const std::string& name) {
  if (name == "dnn") return nn::Architecture::DNN;
  if (name == "cnn") return nn::Architecture::CNN;
  if (name == "rnn") return nn::Architecture::RNN;
  throw ConfigError("unknown architecture '" + name + "' (expected dnn, cnn or rnn)");
}

// Writes `report` to stdout and, when given, to the file `out`.
void emit_report(const ExperimentReport& report, const std::string& out) {
  experiment::write_report_csv(std::cout, report);
  if (!out.empty()) {
    std::ofstream file(out);
    if (!file) throw UsageError("cannot write " + out);
    experiment::write_report_csv(file, report);
  }
}

int rows_status(const ExperimentReport& report) {
  if (report.rows_valid()) return kOk;
  std::cerr << "error: report contains rows outside [0, 100]\n";
  return kInvalidRows;
}

// The estimator under test: a saved network or the KF/EKF for --model.
struct Subject {
  pipeline::Estimator estimator;
  ModelSpec nominal;
  std::string arch;
  std::size_t n0 = 50;
  std::size_t horizon = 1000;
  std::size_t epochs = 0;
};

Subject load_subject(const Flags& f) {
  const pipeline::TrainingConfig t = training_config(f);
  if (!f.weights.empty()) {
    if (f.baseline) throw UsageError("--weights and --baseline are mutually exclusive");
    auto filter = std::make_shared<pipeline::TrainedFilter>(io::load_weights(f.weights));
    Subject s;
    // The estimator keeps the filter alive.
    s.estimator = [filter, est = pipeline::network_estimator(*filter)](const dynamics::SamplePath& p) {
      return est(p);
    };
    s.nominal = filter->model;
    s.arch = std::string(nn::to_string(filter->config.architecture));
    s.n0 = filter->n0();
    s.horizon = f.horizon.value_or(filter->training.horizon);
    s.epochs = filter->epoch_losses.size();
    return s;
  }
  if (!f.baseline) throw UsageError("give --weights <file> or --baseline");
  Subject s;
  s.nominal = nominal_model(f);
  s.arch = dynamics::is_linear(s.nominal.kind) ? "kf" : "ekf";
  s.n0 = t.n0;
  s.horizon = t.horizon;
  s.estimator = pipeline::baseline_estimator(s.nominal, s.n0);
  return s;
}

ReportRow make_row(const Subject& s, double sigma0_am, double err, std::size_t n_paths, std::size_t horizon,
                   std::uint64_t seed, double seconds) {
  ReportRow r;
  r.model = std::string(dynamics::to_string(s.nominal.kind));
  r.arch = s.arch;
  r.sigma0_nm = s.nominal.sigma0;
  r.sigma0_am = sigma0_am;
  r.rel_err_pct = err;
  r.n_paths = n_paths;
  r.n0 = s.n0;
  r.horizon = horizon;
  r.seed = seed;
  r.epochs = s.epochs;
  r.wall_time_s = seconds;
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int cmd_generate(const Flags& f) {
  if (f.out.empty()) throw UsageError("generate needs --out <file>");
  const ModelSpec m = nominal_model(f);
  // No window is involved, so the training config is not validated here.
  const pipeline::TrainingConfig defaults;
  const std::size_t n_paths = f.paths.value_or(f.quick ? 500 : defaults.n_paths);
  const auto set = dynamics::generate_dataset(m, n_paths, f.horizon.value_or(defaults.horizon),
                                              f.seed.value_or(kDefaultSeed));
  if (f.out.ends_with(".csv")) {
    std::ofstream out(f.out);
    if (!out) throw UsageError("cannot write " + f.out);
    dynamics::write_pathset_csv(out, set);
  } else {
    dynamics::save_pathset(f.out, set);
  }
  std::cerr << "wrote " << set.paths.size() << " paths of " << dynamics::to_string(m.kind) << " to " << f.out << '\n';
  return kOk;
}

int cmd_train(const Flags& f) {
  if (f.out.empty()) throw UsageError("train needs --out <weights file>");
  const auto t = training_config(f);
  const std::uint64_t seed = f.seed.value_or(kDefaultSeed);
  pipeline::EpochObserver observer = [](const pipeline::EpochReport& e) {
    std::cerr << "epoch " << e.epoch << " train_loss " << e.train_loss;
    if (e.validation_loss) std::cerr << " val_loss " << *e.validation_loss;
    std::cerr << '\n';
  };
  pipeline::TrainedFilter filter;
  if (!f.data.empty()) {
    const auto data = dynamics::load_pathset(f.data);
    const auto& kind = data.model.kind;
    const auto config = nn::NetworkConfig::preset(parse_arch(f.arch), t.n0, dynamics::observation_dim(kind),
                                                  dynamics::state_dim(kind));
    filter = pipeline::train_on(data, config, t, seed, observer);
  } else {
    const ModelSpec m = nominal_model(f);
    const auto config = nn::NetworkConfig::preset(parse_arch(f.arch), t.n0, dynamics::observation_dim(m.kind),
                                                  dynamics::state_dim(m.kind));
    filter = pipeline::train(m, config, t, seed, observer);
  }
  io::save_weights(filter, f.out);
  std::cerr << "saved " << filter.config.parameter_count() << " parameters to " << f.out << '\n';
  return kOk;
}

int cmd_evaluate(const Flags& f) {
  const Subject s = load_subject(f);
  const auto t = training_config(f);
  const std::uint64_t seed = f.seed.value_or(kDefaultSeed + experiment::kTestSeedOffset);
  ExperimentReport report;
  const auto start = std::chrono::steady_clock::now();
  if (!f.data.empty()) {
    const auto data = dynamics::load_pathset(f.data);
    const double err = pipeline::evaluate(s.estimator, data, s.n0);
    report.rows.push_back(make_row(s, data.model.sigma0, err, data.paths.size(), data.horizon,
                                   data.paths.empty() ? 0 : data.paths.front().seed, seconds_since(start)));
  } else {
    if (f.sigma0_am.size() > 1) throw UsageError("evaluate takes one --sigma0-am value; use sweep for several");
    const double am = f.sigma0_am.empty() ? s.nominal.sigma0 : f.sigma0_am.front();
    const auto data = dynamics::generate_dataset(s.nominal.with_sigma0(am), t.n_paths, s.horizon, seed);
    const double err = pipeline::evaluate(s.estimator, data, s.n0);
    report.rows.push_back(make_row(s, am, err, t.n_paths, s.horizon, seed, seconds_since(start)));
  }
  emit_report(report, f.out);
  return rows_status(report);
}

int cmd_sweep(const Flags& f) {
  const Subject s = load_subject(f);
  const auto t = training_config(f);
  const std::uint64_t seed = f.seed.value_or(kDefaultSeed + experiment::kTestSeedOffset);
  std::vector<double> grid = f.sigma0_am;
  if (grid.empty()) grid = f.quick ? std::vector<double>{0.5, 2.0} : std::vector<double>{0.1, 0.5, 1.0, 1.5, 2.0, 2.5};
  ExperimentReport report;
  for (double am : grid) {
    const auto start = std::chrono::steady_clock::now();
    const auto point = pipeline::robustness_sweep(s.estimator, s.nominal, std::vector<double>{am}, t.n_paths,
                                                  s.horizon, s.n0, seed);
    report.rows.push_back(make_row(s, am, point.front().relative_error, t.n_paths, s.horizon, seed,
                                   seconds_since(start)));
  }
  emit_report(report, f.out);
  return rows_status(report);
}

experiment::ExperimentSpec experiment_spec(const Flags& f, experiment::TableId id) {
  experiment::ExperimentSpec s;
  s.table_id = id;
  s.quick = f.quick;
  s.base_seed = f.seed.value_or(kDefaultSeed);
  s.verbose = f.verbose;
  if (!f.out.empty()) s.out_dir = f.out;
  if (!f.cache.empty()) s.cache_dir = f.cache;
  auto& o = s.overrides;
  o.n_paths = f.paths;
  o.horizon = f.horizon;
  o.n0 = f.window;
  o.gamma = f.lr;
  o.epochs = f.epochs;
  o.minibatch = f.minibatch;
  o.early_stopping_patience = f.early_stopping;
  o.sigma0_nm = f.sigma0_nm;
  if (!f.sigma0_am.empty()) o.sigma0_am = f.sigma0_am;
  return s;
}

int run_table(const experiment::ExperimentSpec& spec) {
  const ExperimentReport report = experiment::run_experiment(spec);
  experiment::write_report_csv(std::cout, report);
  for (const auto& file : report.trace_files) std::cerr << "trace " << file.string() << '\n';
  if (spec.out_dir) std::cerr << "report written to " << spec.out_dir->string() << '\n';
  return rows_status(report);
}

int cmd_reproduce(const Flags& f) {
  if (f.table.empty()) throw UsageError("reproduce needs --table <id>");
  return run_table(experiment_spec(f, experiment::parse_table_id(f.table)));
}

int cmd_traces(const Flags& f, bool model_given) {
  if (f.out.empty()) throw UsageError("traces needs --out <dir>");
  auto spec = experiment_spec(f, experiment::TableId::FiguresTraces);
  if (model_given) spec.overrides.models = std::vector<ModelKind>{dynamics::parse_model_kind(f.model)};
  return run_table(spec);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep filters versus Kalman filtering: simulation, training and evaluation"};
  app.footer("Set DEEPFILTER_THREADS to bound the worker threads used for scoring.");
  app.require_subcommand(1);
  Flags f;

  auto model_flags = [&](CLI::App* c) {
    c->add_option("--model", f.model, "linear1d, linear2d, nonlinear1d, nonlinear2d, switching1d or switching2d");
    c->add_option("--sigma0-nm", f.sigma0_nm, "Observation noise of the nominal model");
  };
  auto scale_flags = [&](CLI::App* c) {
    c->add_option("--paths", f.paths, "Number of sample paths");
    c->add_option("--horizon", f.horizon, "Steps per path (N)");
    c->add_option("--seed", f.seed, "Base seed");
    c->add_flag("--quick", f.quick, "500 paths, 1 epoch, short sweep");
  };
  auto train_flags = [&](CLI::App* c) {
    c->add_option("--window", f.window, "Input window n0");
    c->add_option("--lr", f.lr, "SGD learning rate");
    c->add_option("--epochs", f.epochs, "Training epochs");
    c->add_option("--minibatch", f.minibatch, "Minibatch size");
    c->add_option("--early-stopping", f.early_stopping, "Enable early stopping with this patience");
  };
  auto subject_flags = [&](CLI::App* c) {
    c->add_option("--weights", f.weights, "Trained filter file");
    c->add_flag("--baseline", f.baseline, "Evaluate the KF (linear) or EKF (nonlinear) for --model");
    c->add_option("--window", f.window, "Window n0 for the baseline's scored range");
  };

  auto* generate = app.add_subcommand("generate", "Simulate a dataset (.csv extension writes CSV)");
  model_flags(generate);
  scale_flags(generate);
  generate->add_option("--out", f.out, "Output file")->required();

  auto* train = app.add_subcommand("train", "Train a deep filter and save its weights");
  model_flags(train);
  scale_flags(train);
  train_flags(train);
  train->add_option("--arch", f.arch, "dnn, cnn or rnn")->check(CLI::IsMember({"dnn", "cnn", "rnn"}));
  train->add_option("--data", f.data, "Train on a saved dataset instead of simulating");
  train->add_option("--out", f.out, "Weights file")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Relative error of a filter on out-of-sample paths");
  model_flags(evaluate);
  scale_flags(evaluate);
  subject_flags(evaluate);
  evaluate->add_option("--sigma0-am", f.sigma0_am, "Observation noise of the actual model");
  evaluate->add_option("--data", f.data, "Score on a saved dataset");
  evaluate->add_option("--out", f.out, "Also write the report CSV here");

  auto* sweep = app.add_subcommand("sweep", "Robustness sweep over the actual observation noise");
  model_flags(sweep);
  scale_flags(sweep);
  subject_flags(sweep);
  sweep->add_option("--sigma0-am", f.sigma0_am, "Actual-model noise levels")->delimiter(',');
  sweep->add_option("--out", f.out, "Also write the report CSV here");

  auto* reproduce = app.add_subcommand("reproduce", "Run a named table preset");
  reproduce->add_option("--table", f.table, "T1..T8 or figures")->required();
  scale_flags(reproduce);
  train_flags(reproduce);
  reproduce->add_option("--sigma0-nm", f.sigma0_nm, "Override the nominal observation noise");
  reproduce->add_option("--sigma0-am", f.sigma0_am, "Override the sweep grid")->delimiter(',');
  reproduce->add_option("--out", f.out, "Directory for the report, provenance and traces");
  reproduce->add_option("--cache", f.cache, "Directory of cached trained filters");
  reproduce->add_flag("-v,--verbose", f.verbose, "Per-epoch progress on stderr");

  auto* traces = app.add_subcommand("traces", "Export sample-path estimate traces");
  CLI::Option* model_opt = traces->add_option("--model", f.model, "Restrict to one model");
  scale_flags(traces);
  train_flags(traces);
  traces->add_option("--sigma0-nm", f.sigma0_nm, "Nominal observation noise");
  traces->add_option("--out", f.out, "Output directory")->required();
  traces->add_option("--cache", f.cache, "Directory of cached trained filters");
  traces->add_flag("-v,--verbose", f.verbose, "Per-epoch progress on stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(f);
    if (train->parsed()) return cmd_train(f);
    if (evaluate->parsed()) return cmd_evaluate(f);
    if (sweep->parsed()) return cmd_sweep(f);
    if (reproduce->parsed()) return cmd_reproduce(f);
    if (traces->parsed()) return cmd_traces(f, model_opt->count() > 0);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kBadConfig;
  } catch (const LoadError& e) {
    std::cerr << "load error: " << e.what() << '\n';
    return kLoadFailure;
  } catch (const StaleCacheError& e) {
    std::cerr << "stale cache: " << e.what() << '\n';
    return kLoadFailure;
  } catch (const TrainingDivergedError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kDiverged;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "metric undefined: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
