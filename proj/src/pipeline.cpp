#include "deepfilter/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "deepfilter/errors.hpp"
#include "deepfilter/filters.hpp"
#include "deepfilter/parallel.hpp"
#include "deepfilter/random.hpp"

namespace deepfilter::pipeline {

using dynamics::ModelSpec;
using dynamics::PathSet;
using dynamics::SamplePath;

namespace {

struct WindowRef {
  std::uint32_t path;
  std::uint32_t kappa;
};

double step_norm(std::span<const double> v) {
  if (v.size() == 1) return std::abs(v[0]);
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double diff_norm(std::span<const double> a, std::span<const double> b) {
  if (a.size() == 1) return std::abs(a[0] - b[0]);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

void check_network_matches(const nn::NetworkConfig& config, const SamplePath& path, std::size_t n0) {
  if (config.input_window != n0) throw UsageError("network input window differs from n0");
  if (config.input_channels != path.obs_dim) throw UsageError("network input channels differ from observation dim");
  if (config.output_dim != path.state_dim) throw UsageError("network output dim differs from state dim");
}

std::vector<WindowRef> collect_windows(std::size_t first_path, std::size_t last_path, std::size_t n0,
                                       std::size_t horizon, std::size_t stride) {
  std::vector<WindowRef> refs;
  refs.reserve((last_path - first_path) * ((horizon - n0) / stride + 1));
  for (std::size_t p = first_path; p < last_path; ++p) {
    for (std::size_t k = n0; k <= horizon; k += stride) {
      refs.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(k)});
    }
  }
  return refs;
}

double mean_window_loss(const nn::NetworkWeights& weights, const nn::NetworkConfig& config, const PathSet& data,
                        std::span<const WindowRef> refs, std::size_t n0) {
  if (refs.empty()) return 0.0;
  nn::Tape tape;
  double sum = 0.0;
  for (const WindowRef& r : refs) {
    const SamplePath& path = data.paths[r.path];
    const auto out = nn::forward(weights, config, window_input(path, r.kappa, n0), tape);
    sum += nn::mse_loss(out, path.state(r.kappa));
  }
  return sum / static_cast<double>(refs.size());
}

}  // namespace

std::span<const double> window_input(const SamplePath& path, std::size_t kappa, std::size_t n0) {
  if (n0 < 1 || kappa < n0 || kappa > path.horizon) {
    throw UsageError("window ending at " + std::to_string(kappa) + " with n0=" + std::to_string(n0) +
                     " is outside 1.." + std::to_string(path.horizon));
  }
  return {path.observations.data() + (kappa - n0 + 1) * path.obs_dim, n0 * path.obs_dim};
}

std::vector<WindowedSample> make_windows(const SamplePath& path, std::size_t n0) {
  if (n0 < 1 || path.horizon < n0) {
    throw UsageError("path with horizon " + std::to_string(path.horizon) + " is shorter than window " +
                     std::to_string(n0));
  }
  std::vector<WindowedSample> out;
  out.reserve(path.horizon - n0 + 1);
  for (std::size_t k = n0; k <= path.horizon; ++k) {
    const auto in = window_input(path, k, n0);
    const auto x = path.state(k);
    out.push_back({nn::Tensor({n0, path.obs_dim}, std::vector<double>(in.begin(), in.end())),
                   std::vector<double>(x.begin(), x.end()), k, path.seed});
  }
  return out;
}

void TrainingConfig::validate() const {
  if (n0 < 1) throw ConfigError("n0 must be at least 1");
  if (n0 > horizon) throw ConfigError("n0 must not exceed the horizon");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("learning rate must lie in (0, 1)");
  if (minibatch < 1) throw ConfigError("minibatch must be at least 1");
  if (n_paths < 1) throw ConfigError("n_paths must be at least 1");
  if (window_stride < 1) throw ConfigError("window stride must be at least 1");
  if (early_stopping) {
    if (early_stopping->patience < 1) throw ConfigError("patience must be at least 1");
    if (!(early_stopping->validation_fraction > 0.0 && early_stopping->validation_fraction < 1.0)) {
      throw ConfigError("validation fraction must lie in (0, 1)");
    }
  }
}

TrainedFilter train(const ModelSpec& model, const nn::NetworkConfig& config, const TrainingConfig& tconfig,
                    std::uint64_t seed, const EpochObserver& observer) {
  tconfig.validate();
  const PathSet data = dynamics::generate_dataset(model, tconfig.n_paths, tconfig.horizon, seed);
  return train_on(data, config, tconfig, seed, observer);
}

TrainedFilter train_on(const PathSet& data, const nn::NetworkConfig& config, const TrainingConfig& tconfig,
                       std::uint64_t seed, const EpochObserver& observer) {
  TrainingConfig effective = tconfig;
  effective.n_paths = data.paths.size();
  effective.horizon = data.horizon;
  effective.validate();
  config.validate();
  const std::size_t n0 = effective.n0;
  check_network_matches(config, data.paths.front(), n0);

  TrainedFilter result;
  result.config = config;
  result.model = data.model;
  result.training = effective;
  result.seed = seed;
  result.weights = nn::init_weights(config, seed);
  if (effective.epochs == 0) return result;

  std::size_t train_paths = data.paths.size();
  std::size_t validation_paths = 0;
  if (effective.early_stopping) {
    validation_paths = static_cast<std::size_t>(
        std::ceil(effective.early_stopping->validation_fraction * static_cast<double>(data.paths.size())));
    validation_paths = std::clamp<std::size_t>(validation_paths, 1, data.paths.size());
    if (validation_paths >= data.paths.size()) {
      throw ConfigError("early stopping needs at least two training paths");
    }
    train_paths -= validation_paths;
  }
  std::vector<WindowRef> train_refs = collect_windows(0, train_paths, n0, data.horizon, effective.window_stride);
  const std::vector<WindowRef> validation_refs =
      collect_windows(train_paths, data.paths.size(), n0, data.horizon, effective.window_stride);

  nn::NetworkWeights& weights = result.weights;
  nn::NetworkWeights best_weights = weights;
  nn::GradientBuffer grads = nn::GradientBuffer::zeros_like(weights);
  nn::Tape tape;
  std::vector<double> output_grad(config.output_dim);
  const std::size_t batch_size = effective.minibatch;

  for (std::size_t epoch = 0; epoch < effective.epochs; ++epoch) {
    Engine shuffle_engine(stream_seed(seed + epoch, static_cast<std::uint64_t>(Stream::kShuffle)));
    std::shuffle(train_refs.begin(), train_refs.end(), shuffle_engine);

    double epoch_loss = 0.0;
    bool diverged = false;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < train_refs.size(); start += batch_size, ++batch_index) {
      const std::size_t end = std::min(train_refs.size(), start + batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.clear();
      double batch_loss = 0.0;
      try {
        for (std::size_t s = start; s < end; ++s) {
          const SamplePath& path = data.paths[train_refs[s].path];
          const std::size_t kappa = train_refs[s].kappa;
          const auto out = nn::forward(weights, config, window_input(path, kappa, n0), tape);
          const auto target = path.state(kappa);
          batch_loss += nn::mse_loss(out, target);
          for (std::size_t i = 0; i < out.size(); ++i) output_grad[i] = (out[i] - target[i]) * scale;
          nn::backward_accumulate(weights, config, tape, output_grad, grads);
        }
      } catch (const NumericalError&) {
        batch_loss = NAN;
      }
      batch_loss *= scale;
      if (!std::isfinite(batch_loss) || !grads.all_finite()) {
        if (!effective.early_stopping) {
          throw TrainingDivergedError(epoch, batch_index, "non-finite loss");
        }
        diverged = true;
        break;
      }
      epoch_loss += batch_loss * static_cast<double>(end - start);
      nn::sgd_update_in_place(weights, grads, effective.gamma);
    }

    EpochReport report;
    report.epoch = epoch;
    report.train_loss = diverged ? NAN : epoch_loss / static_cast<double>(std::max<std::size_t>(1, train_refs.size()));
    result.epoch_losses.push_back(report.train_loss);

    if (effective.early_stopping) {
      const double val = diverged || !weights.all_finite()
                             ? NAN
                             : mean_window_loss(weights, config, data, validation_refs, n0);
      report.validation_loss = val;
      result.validation_losses.push_back(val);
      const auto decision = nn::early_stopping_monitor(result.validation_losses, effective.early_stopping->patience);
      if (decision.best_epoch == epoch && std::isfinite(val)) best_weights = weights;
      result.best_epoch = decision.best_epoch;
      if (observer) observer(report);
      if (diverged || decision.action == nn::StopAction::Stop) {
        result.stopped_early = epoch + 1 < effective.epochs || diverged;
        break;
      }
    } else {
      result.best_epoch = epoch;
      if (observer) observer(report);
    }
  }
  if (effective.early_stopping) weights = best_weights;
  return result;
}

EstimateSequence predict(const TrainedFilter& filter, const SamplePath& path) {
  const std::size_t n0 = filter.n0();
  if (path.horizon < n0) throw UsageError("path is shorter than the network window");
  check_network_matches(filter.config, path, n0);
  EstimateSequence out;
  out.first_step = n0;
  out.dim = filter.config.output_dim;
  out.values.reserve((path.horizon - n0 + 1) * out.dim);
  thread_local nn::Tape tape;
  for (std::size_t k = n0; k <= path.horizon; ++k) {
    const auto y = nn::forward(filter.weights, filter.config, window_input(path, k, n0), tape);
    out.values.insert(out.values.end(), y.begin(), y.end());
  }
  return out;
}

EstimateSequence truth_sequence(const SamplePath& path, std::size_t first_step) {
  if (first_step > path.horizon) throw UsageError("first step beyond the horizon");
  EstimateSequence out;
  out.first_step = first_step;
  out.dim = path.state_dim;
  out.values.assign(path.states.begin() + static_cast<std::ptrdiff_t>(first_step * path.state_dim),
                    path.states.end());
  return out;
}

double relative_error(std::span<const EstimateSequence> estimates, std::span<const EstimateSequence> truth) {
  if (estimates.size() != truth.size()) throw UsageError("estimate and truth path counts differ");
  double abs_diff = 0.0;
  double magnitude = 0.0;
  std::size_t pairs = 0;
  for (std::size_t p = 0; p < estimates.size(); ++p) {
    const EstimateSequence& a = estimates[p];
    const EstimateSequence& b = truth[p];
    if (a.dim != b.dim || a.count() != b.count() || a.first_step != b.first_step) {
      throw UsageError("estimate and truth sequences are not aligned (path " + std::to_string(p) + ")");
    }
    for (std::size_t i = 0; i < a.count(); ++i) {
      abs_diff += diff_norm(a.at(i), b.at(i));
      magnitude += step_norm(a.at(i)) + step_norm(b.at(i));
    }
    pairs += a.count();
  }
  if (pairs == 0 || magnitude == 0.0) throw UndefinedMetricError("relative error normalizer is zero");
  // The pair count cancels between numerator and normalizer.
  return 100.0 * abs_diff / magnitude;
}

double evaluate(const Estimator& estimator, const PathSet& data, std::size_t n0) {
  std::vector<EstimateSequence> est(data.paths.size());
  std::vector<EstimateSequence> truth(data.paths.size());
  parallel_for(data.paths.size(), [&](std::size_t i) {
    est[i] = estimator(data.paths[i]);
    truth[i] = truth_sequence(data.paths[i], n0);
  });
  return relative_error(est, truth);
}

Estimator network_estimator(const TrainedFilter& filter) {
  return [&filter](const SamplePath& path) { return predict(filter, path); };
}

Estimator baseline_estimator(const ModelSpec& nominal, std::size_t n0) {
  if (!dynamics::is_linear(nominal.kind) && !dynamics::is_nonlinear(nominal.kind)) {
    throw ConfigError("no classical filter applies to switching models");
  }
  return [nominal, n0](const SamplePath& path) { return filters::run_baseline(nominal, path, n0); };
}

std::vector<SweepPoint> robustness_sweep(const Estimator& estimator, const ModelSpec& nominal,
                                         std::span<const double> sigma0_am_values, std::size_t n_paths,
                                         std::size_t horizon, std::size_t n0, std::uint64_t seed) {
  std::vector<SweepPoint> out;
  out.reserve(sigma0_am_values.size());
  for (double sigma0_am : sigma0_am_values) {
    const PathSet actual = dynamics::generate_dataset(nominal.with_sigma0(sigma0_am), n_paths, horizon, seed);
    out.push_back({sigma0_am, evaluate(estimator, actual, n0)});
  }
  return out;
}

std::vector<SweepPoint> robustness_sweep(const TrainedFilter& filter, const ModelSpec& nominal,
                                         std::span<const double> sigma0_am_values, std::size_t n_paths,
                                         std::uint64_t seed) {
  return robustness_sweep(network_estimator(filter), nominal, sigma0_am_values, n_paths, filter.training.horizon,
                          filter.n0(), seed);
}

void write_trace_csv(std::ostream& out, const SamplePath& path, const EstimateSequence& estimate) {
  if (estimate.dim != path.state_dim || estimate.first_step + estimate.count() != path.horizon + 1) {
    throw UsageError("estimate does not cover steps first_step..N of the path");
  }
  out << "seed,n";
  for (std::size_t i = 0; i < path.state_dim; ++i) out << ",x_true_" << i;
  for (std::size_t i = 0; i < estimate.dim; ++i) out << ",x_hat_" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < estimate.count(); ++i) {
    const std::size_t n = estimate.first_step + i;
    out << path.seed << ',' << n;
    for (double v : path.state(n)) out << ',' << v;
    for (double v : estimate.at(i)) out << ',' << v;
    out << '\n';
  }
}

}  // namespace deepfilter::pipeline
