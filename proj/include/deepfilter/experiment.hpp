#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deepfilter/dynamics.hpp"
#include "deepfilter/network.hpp"
#include "deepfilter/pipeline.hpp"

namespace deepfilter::experiment {

enum class TableId {
  T1_linear,
  T2_lin1d_sweep,
  T3_lin2d_sweep,
  T4_nonlinear,
  T5_nl1d_sweep,
  T6_nl2d_sweep,
  T7_swt1d_sweep,
  T8_swt2d_sweep,
  FiguresTraces,
};

std::string_view to_string(TableId id);
TableId parse_table_id(std::string_view name);

/// Estimator rows of a report: a classical baseline or a trained network.
enum class Method { KF, EKF, DNN, CNN, RNN, RNN_EarlyStopping };
std::string_view to_string(Method m);

/// Field overrides applied on top of a table preset. The model kind is never
/// overridable.
struct Overrides {
  std::optional<std::size_t> n_paths;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> n0;
  std::optional<double> gamma;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> minibatch;
  std::optional<std::size_t> window_stride;
  std::optional<std::size_t> early_stopping_patience;
  std::optional<double> sigma;
  std::optional<double> sigma0_nm;
  std::optional<std::vector<double>> sigma0_am;
  std::optional<std::vector<Method>> methods;
  std::optional<std::vector<dynamics::ModelKind>> models;
};

struct ExperimentSpec {
  TableId table_id = TableId::T1_linear;
  Overrides overrides;
  std::uint64_t base_seed = 20240601;
  bool quick = false;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::filesystem::path> cache_dir;
  bool verbose = false;
};

/// Maximum epochs of the early-stopping variant (patience decides the actual count).
inline constexpr std::size_t kEarlyStoppingMaxEpochs = 10;
/// Offset between the in-sample and out-of-sample base seeds.
inline constexpr std::uint64_t kTestSeedOffset = 1'000'000'000ULL;

/// One (model, method) job of a table with everything resolved.
struct Job {
  dynamics::ModelSpec nominal;
  Method method = Method::KF;
  pipeline::TrainingConfig training;
  std::vector<double> sigma0_am;
};

struct ResolvedExperiment {
  ExperimentSpec spec;
  std::vector<Job> jobs;
  std::uint64_t train_seed = 0;
  std::uint64_t test_seed = 0;
  std::size_t test_paths = 0;
  bool traces = false;
};

/// Expands a table preset plus overrides into concrete jobs.
ResolvedExperiment resolve(const ExperimentSpec& spec);

struct ReportRow {
  std::string model;
  std::string arch;
  double sigma0_nm = 0.0;
  double sigma0_am = 0.0;
  double rel_err_pct = 0.0;
  std::size_t n_paths = 0;
  std::size_t n0 = 0;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double wall_time_s = 0.0;
};

struct TimingRecord {
  std::string model;
  std::string arch;
  double train_time_s = 0.0;
  double per_step_time_s = 0.0;
  bool cached = false;
};

struct ExperimentReport {
  std::string table;
  std::vector<ReportRow> rows;
  std::vector<TimingRecord> timings;
  std::vector<std::filesystem::path> trace_files;
  /// JSON text: resolved parameters, seeds, version, timestamps.
  std::string provenance;

  /// Every rel_err_pct is finite and within [0, 100].
  bool rows_valid() const;
};

inline constexpr std::string_view kReportHeader =
    "model,arch,sigma0_nm,sigma0_am,rel_err_pct,n_paths,n0,horizon,seed,epochs,wall_time_s";

void write_report_csv(std::ostream& out, const ExperimentReport& report, bool include_timing = true);

/// FNV-1a of the report CSV with the timing column blanked.
std::uint64_t report_fingerprint(const ExperimentReport& report);

/// Trains (or loads cached) filters for every job, evaluates all sweep points
/// and writes report/provenance/trace files when out_dir is set.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Cache lookup/training for a single network job. Throws StaleCacheError if
/// a cached file exists but was written by an incompatible version or for a
/// different configuration.
pipeline::TrainedFilter obtain_filter(const Job& job, std::uint64_t train_seed,
                                      const std::optional<std::filesystem::path>& cache_dir, bool verbose,
                                      bool* was_cached = nullptr, double* train_seconds = nullptr);

nn::Architecture architecture_of(Method m);
bool is_network(Method m);

}  // namespace deepfilter::experiment
