#include "deepfilter/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "deepfilter/errors.hpp"
#include "deepfilter/filters.hpp"
#include "deepfilter/weights_io.hpp"

namespace deepfilter::experiment {

using dynamics::ModelKind;
using dynamics::ModelSpec;
using nlohmann::json;
using pipeline::TrainedFilter;
using pipeline::TrainingConfig;

namespace {

constexpr std::string_view kVersion = "deepfilter 1.0.0";

const std::vector<double> kSweep = {0.1, 0.5, 1.0, 1.5, 2.0, 2.5};
const std::vector<double> kQuickSweep = {0.5, 2.0};

struct TablePreset {
  std::vector<ModelKind> models;
  std::vector<Method> methods;
  std::optional<double> sigma0_nm;  // nullopt: keep the model preset
  bool sweep = false;
  bool traces = false;
};

TablePreset table_preset(TableId id) {
  const std::vector<Method> nets = {Method::DNN, Method::CNN, Method::RNN};
  auto with = [&](Method baseline) {
    std::vector<Method> m{baseline};
    m.insert(m.end(), nets.begin(), nets.end());
    return m;
  };
  switch (id) {
    case TableId::T1_linear: return {{ModelKind::Linear1D, ModelKind::Linear2D}, with(Method::KF), std::nullopt, false};
    case TableId::T2_lin1d_sweep: return {{ModelKind::Linear1D}, with(Method::KF), 2.0, true};
    case TableId::T3_lin2d_sweep: return {{ModelKind::Linear2D}, with(Method::KF), 2.0, true};
    case TableId::T4_nonlinear:
      return {{ModelKind::NonLinear1D, ModelKind::NonLinear2D}, with(Method::EKF), std::nullopt, false};
    case TableId::T5_nl1d_sweep: return {{ModelKind::NonLinear1D}, with(Method::EKF), 2.0, true};
    case TableId::T6_nl2d_sweep: return {{ModelKind::NonLinear2D}, with(Method::EKF), 2.0, true};
    case TableId::T7_swt1d_sweep: return {{ModelKind::Switching1D}, nets, 2.0, true};
    case TableId::T8_swt2d_sweep: {
      auto m = nets;
      m.push_back(Method::RNN_EarlyStopping);
      return {{ModelKind::Switching2D}, m, 2.0, true};
    }
    case TableId::FiguresTraces:
      return {{ModelKind::NonLinear1D, ModelKind::Switching1D}, nets, 2.0, false, true};
  }
  throw ConfigError("unknown table");
}

std::string iso_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json model_json(const ModelSpec& m) {
  json j;
  j["kind"] = dynamics::to_string(m.kind);
  j["eta"] = m.eta;
  j["sigma"] = m.sigma;
  j["sigma0"] = m.sigma0;
  j["f_matrix"] = matrix_json(m.f_matrix);
  j["g_matrix"] = matrix_json(m.g_matrix);
  j["h_matrix"] = matrix_json(m.h_matrix);
  j["x0"] = matrix_json(m.x0);
  if (dynamics::is_switching(m.kind)) {
    j["generator_q"] = matrix_json(m.generator_q);
    j["regime_values"] = m.regime_values;
    j["initial_regime"] = "uniform";
  }
  return j;
}

json training_json(const TrainingConfig& t) {
  json j;
  j["n0"] = t.n0;
  j["horizon"] = t.horizon;
  j["n_paths"] = t.n_paths;
  j["gamma"] = t.gamma;
  j["epochs"] = t.epochs;
  j["minibatch"] = t.minibatch;
  j["window_stride"] = t.window_stride;
  j["reproducible"] = t.reproducible;
  if (t.early_stopping) {
    j["early_stopping"] = {{"patience", t.early_stopping->patience},
                           {"validation_fraction", t.early_stopping->validation_fraction},
                           {"min_improvement", 0.0}};
  } else {
    j["early_stopping"] = nullptr;
  }
  return j;
}

json network_json(const nn::NetworkConfig& c) {
  json layers = json::array();
  for (const auto& l : c.layers) {
    layers.push_back({{"kind", nn::to_string(l.kind)},
                      {"units", l.units},
                      {"kernel", l.kernel},
                      {"padding", nn::to_string(l.padding)},
                      {"activation", nn::to_string(l.activation)}});
  }
  return {{"architecture", nn::to_string(c.architecture)},
          {"input_window", c.input_window},
          {"input_channels", c.input_channels},
          {"output_dim", c.output_dim},
          {"parameters", c.parameter_count()},
          {"layers", layers}};
}

nn::NetworkConfig network_for(const Job& job) {
  return nn::NetworkConfig::preset(architecture_of(job.method), job.training.n0,
                                   dynamics::observation_dim(job.nominal.kind), dynamics::state_dim(job.nominal.kind));
}

std::string cache_key(const Job& job, const nn::NetworkConfig& config, std::uint64_t seed) {
  std::ostringstream key;
  key << kVersion << '|' << io::kWeightsVersion << '|' << model_json(job.nominal).dump() << '|'
      << training_json(job.training).dump() << '|' << network_json(config).dump() << '|' << seed;
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << io::fnv1a64(key.str());
  return hex.str();
}

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

std::string_view to_string(TableId id) {
  switch (id) {
    case TableId::T1_linear: return "T1_linear";
    case TableId::T2_lin1d_sweep: return "T2_lin1d_sweep";
    case TableId::T3_lin2d_sweep: return "T3_lin2d_sweep";
    case TableId::T4_nonlinear: return "T4_nonlinear";
    case TableId::T5_nl1d_sweep: return "T5_nl1d_sweep";
    case TableId::T6_nl2d_sweep: return "T6_nl2d_sweep";
    case TableId::T7_swt1d_sweep: return "T7_swt1d_sweep";
    case TableId::T8_swt2d_sweep: return "T8_swt2d_sweep";
    case TableId::FiguresTraces: return "figures_traces";
  }
  return "unknown";
}

TableId parse_table_id(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(TableId::FiguresTraces); ++i) {
    const auto id = static_cast<TableId>(i);
    const auto full = to_string(id);
    // Accept the full id ("T2_lin1d_sweep") or its prefix ("T2", "t2").
    const auto prefix = full.substr(0, full.find('_'));
    auto iequal = [](std::string_view a, std::string_view b) {
      return a.size() == b.size() &&
             std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return std::tolower(x) == std::tolower(y); });
    };
    if (iequal(name, full) || (id != TableId::FiguresTraces && iequal(name, prefix))) return id;
  }
  if (name == "figures" || name == "traces") return TableId::FiguresTraces;
  throw ConfigError("unknown table id '" + std::string(name) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::KF: return "kf";
    case Method::EKF: return "ekf";
    case Method::DNN: return "dnn";
    case Method::CNN: return "cnn";
    case Method::RNN: return "rnn";
    case Method::RNN_EarlyStopping: return "rnn_es";
  }
  return "unknown";
}

bool is_network(Method m) { return m != Method::KF && m != Method::EKF; }

nn::Architecture architecture_of(Method m) {
  switch (m) {
    case Method::DNN: return nn::Architecture::DNN;
    case Method::CNN: return nn::Architecture::CNN;
    case Method::RNN:
    case Method::RNN_EarlyStopping: return nn::Architecture::RNN;
    default: throw UsageError("classical filters have no network architecture");
  }
}

bool ExperimentReport::rows_valid() const {
  return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) {
    return std::isfinite(r.rel_err_pct) && r.rel_err_pct >= 0.0 && r.rel_err_pct <= 100.0;
  });
}

ResolvedExperiment resolve(const ExperimentSpec& spec) {
  const TablePreset preset = table_preset(spec.table_id);
  const Overrides& o = spec.overrides;

  TrainingConfig base;
  if (spec.quick) {
    base.n_paths = 500;
    base.epochs = 1;
  }
  if (o.n_paths) base.n_paths = *o.n_paths;
  if (o.horizon) base.horizon = *o.horizon;
  if (o.n0) base.n0 = *o.n0;
  if (o.gamma) base.gamma = *o.gamma;
  if (o.epochs) base.epochs = *o.epochs;
  if (o.minibatch) base.minibatch = *o.minibatch;
  if (o.window_stride) base.window_stride = *o.window_stride;
  base.validate();

  ResolvedExperiment r;
  r.spec = spec;
  r.train_seed = spec.base_seed;
  r.test_seed = spec.base_seed + kTestSeedOffset;
  r.traces = preset.traces;
  r.test_paths = preset.traces ? 1 : base.n_paths;

  const std::vector<ModelKind> models = o.models ? *o.models : preset.models;
  const std::vector<Method> methods = o.methods ? *o.methods : preset.methods;
  for (ModelKind kind : models) {
    ModelSpec nominal = ModelSpec::preset(kind);
    if (preset.sigma0_nm) nominal.sigma0 = *preset.sigma0_nm;
    if (o.sigma) nominal.sigma = *o.sigma;
    if (o.sigma0_nm) nominal.sigma0 = *o.sigma0_nm;
    nominal.validate();

    std::vector<double> sweep;
    if (o.sigma0_am) {
      sweep = *o.sigma0_am;
    } else if (preset.sweep) {
      sweep = spec.quick ? kQuickSweep : kSweep;
    } else {
      sweep = {nominal.sigma0};
    }

    for (Method m : methods) {
      if (m == Method::KF && !dynamics::is_linear(kind)) continue;
      if (m == Method::EKF && !dynamics::is_nonlinear(kind)) continue;
      Job job;
      job.nominal = nominal;
      job.method = m;
      job.training = base;
      job.sigma0_am = sweep;
      if (m == Method::RNN_EarlyStopping) {
        job.training.early_stopping =
            pipeline::EarlyStoppingConfig{o.early_stopping_patience.value_or(3), 0.1};
        if (base.epochs > 0) {
          job.training.epochs = spec.quick ? base.epochs + 1 : std::max(kEarlyStoppingMaxEpochs, base.epochs);
        }
      }
      r.jobs.push_back(std::move(job));
    }
  }
  if (r.jobs.empty()) throw ConfigError("experiment resolves to no jobs");
  return r;
}

TrainedFilter obtain_filter(const Job& job, std::uint64_t train_seed,
                            const std::optional<std::filesystem::path>& cache_dir, bool verbose, bool* was_cached,
                            double* train_seconds) {
  const nn::NetworkConfig config = network_for(job);
  std::filesystem::path cache_file;
  if (cache_dir) {
    std::filesystem::create_directories(*cache_dir);
    cache_file = *cache_dir / (std::string(dynamics::to_string(job.nominal.kind)) + "_" +
                               std::string(to_string(job.method)) + "_" + cache_key(job, config, train_seed) +
                               ".weights");
    if (std::filesystem::exists(cache_file)) {
      TrainedFilter cached;
      try {
        cached = io::load_weights(cache_file);
      } catch (const LoadError& e) {
        throw StaleCacheError("cached filter " + cache_file.string() + " is unusable: " + e.what());
      }
      if (!(cached.model == job.nominal) || !(cached.training == job.training) || !(cached.config == config) ||
          cached.seed != train_seed) {
        throw StaleCacheError("cached filter " + cache_file.string() + " was trained for a different configuration");
      }
      if (was_cached) *was_cached = true;
      if (train_seconds) *train_seconds = 0.0;
      return cached;
    }
  }

  const auto start = std::chrono::steady_clock::now();
  pipeline::EpochObserver observer;
  if (verbose) {
    observer = [&](const pipeline::EpochReport& e) {
      std::cerr << "  [" << dynamics::to_string(job.nominal.kind) << '/' << to_string(job.method) << "] epoch "
                << e.epoch << " train_loss " << e.train_loss;
      if (e.validation_loss) std::cerr << " val_loss " << *e.validation_loss;
      std::cerr << '\n';
    };
  }
  TrainedFilter filter = pipeline::train(job.nominal, config, job.training, train_seed, observer);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (train_seconds) *train_seconds = seconds;
  if (was_cached) *was_cached = false;
  if (cache_dir) io::save_weights(filter, cache_file);
  return filter;
}

void write_report_csv(std::ostream& out, const ExperimentReport& report, bool include_timing) {
  out << kReportHeader << '\n';
  for (const ReportRow& r : report.rows) {
    out << r.model << ',' << r.arch << ',' << format_number(r.sigma0_nm) << ',' << format_number(r.sigma0_am) << ','
        << format_number(r.rel_err_pct) << ',' << r.n_paths << ',' << r.n0 << ',' << r.horizon << ',' << r.seed << ','
        << r.epochs << ',';
    if (include_timing) out << format_number(r.wall_time_s);
    out << '\n';
  }
}

std::uint64_t report_fingerprint(const ExperimentReport& report) {
  std::ostringstream s;
  write_report_csv(s, report, false);
  return io::fnv1a64(s.str());
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  const ResolvedExperiment resolved = resolve(spec);
  ExperimentReport report;
  report.table = std::string(to_string(spec.table_id));
  const std::string started = iso_now();

  json provenance;
  provenance["version"] = kVersion;
  provenance["table"] = report.table;
  provenance["base_seed"] = spec.base_seed;
  provenance["train_seed"] = resolved.train_seed;
  provenance["test_seed"] = resolved.test_seed;
  provenance["test_paths"] = resolved.test_paths;
  provenance["quick"] = spec.quick;
  provenance["started"] = started;
  provenance["defaults"] = {
      {"kf_initial_state", "true x0"},
      {"kf_initial_covariance", 0.0},
      {"window_ordering", "oldest-first"},
      {"scored_steps", "kappa = n0..N"},
      {"initializer", "glorot_uniform, zero biases, lstm forget bias 1"},
      {"optimizer", "plain SGD, batch gradient = mean of per-sample gradients"},
      {"loss", "0.5 * squared euclidean norm, batch mean"},
      {"lstm_cell_clip", nn::kCellClip},
      {"metric_vector_norm", "euclidean"},
      {"common_random_numbers", true},
      {"shuffle", "global window shuffle per epoch"},
  };
  json jobs = json::array();

  // Group jobs per model so each out-of-sample set is generated once.
  std::vector<ModelKind> order;
  for (const Job& j : resolved.jobs) {
    if (std::find(order.begin(), order.end(), j.nominal.kind) == order.end()) order.push_back(j.nominal.kind);
  }

  for (ModelKind kind : order) {
    std::vector<const Job*> model_jobs;
    for (const Job& j : resolved.jobs) {
      if (j.nominal.kind == kind) model_jobs.push_back(&j);
    }
    const Job& first = *model_jobs.front();

    std::vector<std::optional<TrainedFilter>> filters(model_jobs.size());
    std::vector<pipeline::Estimator> estimators(model_jobs.size());
    for (std::size_t i = 0; i < model_jobs.size(); ++i) {
      const Job& job = *model_jobs[i];
      json jj;
      jj["model"] = model_json(job.nominal);
      jj["method"] = to_string(job.method);
      jj["sigma0_am"] = job.sigma0_am;
      if (is_network(job.method)) {
        bool cached = false;
        double seconds = 0.0;
        if (spec.verbose) {
          std::cerr << "training " << dynamics::to_string(kind) << '/' << to_string(job.method) << '\n';
        }
        filters[i] = obtain_filter(job, resolved.train_seed, spec.cache_dir, spec.verbose, &cached, &seconds);
        estimators[i] = pipeline::network_estimator(*filters[i]);
        report.timings.push_back({std::string(dynamics::to_string(kind)), std::string(to_string(job.method)), seconds,
                                  0.0, cached});
        jj["training"] = training_json(job.training);
        jj["network"] = network_json(filters[i]->config);
        jj["epoch_losses"] = filters[i]->epoch_losses;
        jj["validation_losses"] = filters[i]->validation_losses;
        jj["best_epoch"] = filters[i]->best_epoch;
        jj["stopped_early"] = filters[i]->stopped_early;
        jj["cached"] = cached;
      } else {
        estimators[i] = pipeline::baseline_estimator(job.nominal, job.training.n0);
        report.timings.push_back({std::string(dynamics::to_string(kind)), std::string(to_string(job.method)), 0.0,
                                  0.0, false});
      }
      jobs.push_back(jj);
    }

    // All jobs of one model share the sweep grid.
    for (double sigma0_am : first.sigma0_am) {
      const ModelSpec actual = first.nominal.with_sigma0(sigma0_am);
      const dynamics::PathSet test =
          dynamics::generate_dataset(actual, resolved.test_paths, first.training.horizon, resolved.test_seed);
      for (std::size_t i = 0; i < model_jobs.size(); ++i) {
        const Job& job = *model_jobs[i];
        const auto start = std::chrono::steady_clock::now();
        const double err = pipeline::evaluate(estimators[i], test, job.training.n0);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        ReportRow row;
        row.model = std::string(dynamics::to_string(kind));
        row.arch = std::string(to_string(job.method));
        row.sigma0_nm = job.nominal.sigma0;
        row.sigma0_am = sigma0_am;
        row.rel_err_pct = err;
        row.n_paths = resolved.test_paths;
        row.n0 = job.training.n0;
        row.horizon = job.training.horizon;
        row.seed = spec.base_seed;
        row.epochs = is_network(job.method) ? filters[i]->epoch_losses.size() : 0;
        row.wall_time_s = seconds;
        report.rows.push_back(row);
        if (spec.verbose) {
          std::cerr << row.model << ' ' << row.arch << " sigma0_am=" << sigma0_am << " rel_err=" << err << "%\n";
        }
        for (auto& t : report.timings) {
          if (t.model == row.model && t.arch == row.arch) {
            const double steps = static_cast<double>(test.paths.size() * (job.training.horizon - job.training.n0 + 1));
            t.per_step_time_s = seconds / steps;
          }
        }
      }

      if (resolved.traces && spec.out_dir) {
        const auto dir = *spec.out_dir / "traces";
        std::filesystem::create_directories(dir);
        const dynamics::SamplePath& path = test.paths.front();
        const std::string stem = std::string(dynamics::to_string(kind));
        const auto truth_file = dir / (stem + "_truth.csv");
        {
          std::ofstream out(truth_file);
          const auto truth = pipeline::truth_sequence(path, first.training.n0);
          out << "seed,n";
          for (std::size_t d = 0; d < path.state_dim; ++d) out << ",x_true_" << d;
          out << '\n' << std::setprecision(17);
          for (std::size_t k = 0; k < truth.count(); ++k) {
            out << path.seed << ',' << truth.first_step + k;
            for (double v : truth.at(k)) out << ',' << v;
            out << '\n';
          }
        }
        report.trace_files.push_back(truth_file);
        for (std::size_t i = 0; i < model_jobs.size(); ++i) {
          const auto file = dir / (stem + "_" + std::string(to_string(model_jobs[i]->method)) + ".csv");
          std::ofstream out(file);
          pipeline::write_trace_csv(out, path, estimators[i](path));
          report.trace_files.push_back(file);
        }
      }
    }
  }

  json timing = json::array();
  for (const auto& t : report.timings) {
    timing.push_back({{"model", t.model},
                      {"arch", t.arch},
                      {"train_time_s", t.train_time_s},
                      {"per_step_time_s", t.per_step_time_s},
                      {"cached", t.cached}});
  }
  provenance["jobs"] = jobs;
  provenance["timing"] = timing;
  provenance["finished"] = iso_now();
  report.provenance = provenance.dump(2);

  if (spec.out_dir) {
    std::filesystem::create_directories(*spec.out_dir);
    std::ofstream csv(*spec.out_dir / (report.table + ".csv"));
    write_report_csv(csv, report);
    std::ofstream prov(*spec.out_dir / (report.table + "_provenance.json"));
    prov << report.provenance << '\n';
  }
  return report;
}

}  // namespace deepfilter::experiment
