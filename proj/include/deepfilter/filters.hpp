#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "deepfilter/dynamics.hpp"
#include "deepfilter/estimates.hpp"

namespace deepfilter::filters {

/// x_{n+1} = f x_n + w_n, y_n = h x_n + v_n with Cov(w) = q_cov, Cov(v) = r_cov.
struct LinearGaussianModel {
  Eigen::MatrixXd f;
  Eigen::MatrixXd q_cov;
  Eigen::MatrixXd h;
  Eigen::MatrixXd r_cov;
  Eigen::VectorXd x0_mean;
  Eigen::MatrixXd p0;

  /// Filtering form of a Linear1D/Linear2D spec. The initial state is known
  /// exactly (p0 = 0).
  static LinearGaussianModel from_spec(const dynamics::ModelSpec& spec);

  void validate() const;
};

struct FilterState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t step = 0;
};

FilterState initial_state(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

/// Time update: mean <- f mean, cov <- f cov f' + q_cov. Advances `step`.
FilterState kalman_predict(const FilterState& state, const Eigen::MatrixXd& f,
                           const Eigen::MatrixXd& q_cov);

/// Measurement update with the Joseph-form covariance. Throws NumericalError
/// when the innovation covariance is singular or has condition number > 1e12.
FilterState kalman_update(const FilterState& state, const Eigen::MatrixXd& h,
                          const Eigen::MatrixXd& r_cov, const Eigen::VectorXd& y);

/// Predict followed by update.
FilterState kalman_step(const FilterState& state, const LinearGaussianModel& model,
                        const Eigen::VectorXd& y);

/// Filters y_0..y_N (y_0 is an update-only step) and returns the filtered
/// means for steps first_scored..N.
EstimateSequence run_kalman(const LinearGaussianModel& model, const dynamics::SamplePath& path,
                            std::size_t first_scored);

/// Drift x + eta sin(5 x) (1D) or x + eta sin(5 F0 x) (2D) with Gaussian
/// additive noise and a linear observation map.
struct NonlinearModel {
  dynamics::ModelKind kind = dynamics::ModelKind::NonLinear1D;
  double eta = 0.005;
  Eigen::MatrixXd f0;
  Eigen::MatrixXd q_cov;
  Eigen::MatrixXd h;
  Eigen::MatrixXd r_cov;
  Eigen::VectorXd x0_mean;
  Eigen::MatrixXd p0;

  static NonlinearModel from_spec(const dynamics::ModelSpec& spec);
};

Eigen::VectorXd drift(const NonlinearModel& model, const Eigen::VectorXd& x);

/// d drift / dx: 1 + 5 eta cos(5x) in 1D, I + 5 eta diag(cos(5 F0 x)) F0 in 2D.
Eigen::MatrixXd drift_jacobian(const NonlinearModel& model, const Eigen::VectorXd& x);

FilterState ekf_step(const FilterState& state, const NonlinearModel& model, const Eigen::VectorXd& y);

EstimateSequence run_ekf(const NonlinearModel& model, const dynamics::SamplePath& path,
                         std::size_t first_scored);

/// KF for linear kinds, EKF for nonlinear kinds, both parameterized by `nominal`.
/// Switching kinds have no classical baseline and raise ConfigError.
EstimateSequence run_baseline(const dynamics::ModelSpec& nominal, const dynamics::SamplePath& path,
                              std::size_t first_scored);

}  // namespace deepfilter::filters
