#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deepfilter::dynamics {

enum class ModelKind { Linear1D, Linear2D, NonLinear1D, NonLinear2D, Switching1D, Switching2D };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

bool is_switching(ModelKind kind);
bool is_nonlinear(ModelKind kind);
bool is_linear(ModelKind kind);
std::size_t state_dim(ModelKind kind);
std::size_t observation_dim(ModelKind kind);

/// One of the six benchmark systems together with all of its parameters.
///
/// For the 2D kinds the system noise enters as sqrt(eta) * sigma * G u_n, so
/// the literal sqrt(eta) * G u_n recursion corresponds to sigma = 1.
struct ModelSpec {
  ModelKind kind = ModelKind::Linear1D;
  double eta = 0.005;
  double sigma = 0.7;
  double sigma0 = 0.5;
  Eigen::MatrixXd f_matrix;
  Eigen::MatrixXd g_matrix;
  Eigen::MatrixXd h_matrix;
  Eigen::VectorXd x0;
  Eigen::MatrixXd generator_q;
  std::vector<double> regime_values;

  /// Default parameters for `kind` as used in the benchmark tables.
  static ModelSpec preset(ModelKind kind);

  /// Copy with the observation noise scale replaced.
  ModelSpec with_sigma0(double value) const;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;

  bool operator==(const ModelSpec& other) const;
};

/// Validates a CTMC generator: zero row sums (1e-12) and non-negative
/// off-diagonal rates.
void validate_generator(const Eigen::MatrixXd& q);

/// One realization. Storage is row-major: states[n * state_dim + i].
struct SamplePath {
  std::size_t horizon = 0;
  std::size_t state_dim = 0;
  std::size_t obs_dim = 0;
  std::vector<double> states;
  std::vector<double> observations;
  std::vector<double> regimes;  // empty for non-switching kinds
  std::uint64_t seed = 0;

  std::size_t length() const noexcept { return horizon + 1; }
  std::span<const double> state(std::size_t n) const {
    return {states.data() + n * state_dim, state_dim};
  }
  std::span<const double> observation(std::size_t n) const {
    return {observations.data() + n * obs_dim, obs_dim};
  }
  bool operator==(const SamplePath&) const = default;
};

struct PathSet {
  ModelSpec model;
  std::size_t horizon = 0;
  std::vector<SamplePath> paths;

  bool operator==(const PathSet&) const = default;
};

inline constexpr double kDefaultRegimeStorage[] = {1.0, 2.0};
inline constexpr std::span<const double> kDefaultRegimes{kDefaultRegimeStorage};

/// Exact event-time simulation of a CTMC sampled at t = n * eta, n = 0..horizon.
/// The initial state is uniform over `regime_values`.
std::vector<double> simulate_markov_chain(const Eigen::MatrixXd& q, double eta,
                                          std::size_t horizon, std::uint64_t seed,
                                          std::span<const double> regime_values = kDefaultRegimes);

struct NoiseOverride {
  bool zero_noise = false;
};

SamplePath simulate_path(const ModelSpec& model, std::size_t horizon, std::uint64_t seed,
                         NoiseOverride override = {});

/// Paths carry seeds base_seed .. base_seed + n_paths - 1.
PathSet generate_dataset(const ModelSpec& model, std::size_t n_paths, std::size_t horizon,
                         std::uint64_t base_seed);

}  // namespace deepfilter::dynamics
