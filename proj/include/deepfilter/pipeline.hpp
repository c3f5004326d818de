#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "deepfilter/dynamics.hpp"
#include "deepfilter/estimates.hpp"
#include "deepfilter/network.hpp"

namespace deepfilter::pipeline {

/// One training sample. The input is (n0, m2), oldest observation first:
/// rows hold y_{kappa-n0+1} .. y_kappa. The target is x_kappa.
struct WindowedSample {
  nn::Tensor input;
  std::vector<double> target;
  std::size_t kappa = 0;
  std::uint64_t source_seed = 0;
};

/// Windows for kappa = n0 .. N (N - n0 + 1 of them). y_0 never enters a window.
std::vector<WindowedSample> make_windows(const dynamics::SamplePath& path, std::size_t n0);

/// Zero-copy view of the window ending at kappa.
std::span<const double> window_input(const dynamics::SamplePath& path, std::size_t kappa, std::size_t n0);

struct EarlyStoppingConfig {
  std::size_t patience = 3;
  double validation_fraction = 0.1;

  bool operator==(const EarlyStoppingConfig&) const = default;
};

struct TrainingConfig {
  std::size_t n0 = 50;
  std::size_t horizon = 1000;
  std::size_t n_paths = 5000;
  double gamma = 0.1;
  std::size_t epochs = 2;
  std::size_t minibatch = 32;
  std::optional<EarlyStoppingConfig> early_stopping;
  bool reproducible = true;
  /// Use every stride-th window of each training path (1 = all windows).
  std::size_t window_stride = 1;

  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

struct TrainedFilter {
  nn::NetworkConfig config;
  nn::NetworkWeights weights;
  dynamics::ModelSpec model;
  TrainingConfig training;
  std::uint64_t seed = 0;
  std::vector<double> epoch_losses;
  std::vector<double> validation_losses;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  std::size_t n0() const noexcept { return config.input_window; }
};

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> validation_loss;
};

using EpochObserver = std::function<void(const EpochReport&)>;

/// Trains on a freshly generated in-sample PathSet with base seed `seed`.
TrainedFilter train(const dynamics::ModelSpec& model, const nn::NetworkConfig& config,
                    const TrainingConfig& tconfig, std::uint64_t seed, const EpochObserver& observer = {});

/// Trains on an existing dataset (tconfig.n_paths and horizon are taken from it).
TrainedFilter train_on(const dynamics::PathSet& data, const nn::NetworkConfig& config,
                       const TrainingConfig& tconfig, std::uint64_t seed, const EpochObserver& observer = {});

/// Network estimates for kappa = n0 .. N. Reads observations only.
EstimateSequence predict(const TrainedFilter& filter, const dynamics::SamplePath& path);

/// True states for steps first_step .. N.
EstimateSequence truth_sequence(const dynamics::SamplePath& path, std::size_t first_step);

/// 100 * mean|a - b| / mean(|a| + |b|) over every (path, step); Euclidean norm
/// per step for vector states. Throws UndefinedMetricError when the normalizer is 0.
double relative_error(std::span<const EstimateSequence> estimates, std::span<const EstimateSequence> truth);

using Estimator = std::function<EstimateSequence(const dynamics::SamplePath&)>;

/// Scores `estimator` on every path of `data` against its states from n0 on.
double evaluate(const Estimator& estimator, const dynamics::PathSet& data, std::size_t n0);

Estimator network_estimator(const TrainedFilter& filter);
/// KF/EKF parameterized by the nominal model.
Estimator baseline_estimator(const dynamics::ModelSpec& nominal, std::size_t n0);

struct SweepPoint {
  double sigma0_am = 0.0;
  double relative_error = 0.0;
};

/// For each sigma0^AM builds the actual model (nominal with sigma0 replaced),
/// simulates n_paths fresh paths from base seed `seed` (the same seed for
/// every point) and scores `estimator`.
std::vector<SweepPoint> robustness_sweep(const Estimator& estimator, const dynamics::ModelSpec& nominal,
                                         std::span<const double> sigma0_am_values, std::size_t n_paths,
                                         std::size_t horizon, std::size_t n0, std::uint64_t seed);

std::vector<SweepPoint> robustness_sweep(const TrainedFilter& filter, const dynamics::ModelSpec& nominal,
                                         std::span<const double> sigma0_am_values, std::size_t n_paths,
                                         std::uint64_t seed);

/// Trace CSV: seed,n,x_true_0..,x_hat_0.. for steps n0..N of one path.
void write_trace_csv(std::ostream& out, const dynamics::SamplePath& path, const EstimateSequence& estimate);

}  // namespace deepfilter::pipeline
