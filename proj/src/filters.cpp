#include "deepfilter/filters.hpp"

#include <algorithm>
#include <cmath>

#include "deepfilter/errors.hpp"

namespace deepfilter::filters {

using dynamics::ModelKind;
using dynamics::ModelSpec;
using dynamics::SamplePath;

namespace {

void require_psd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols()) throw ConfigError(std::string(name) + " must be square");
  if (m.size() == 0) return;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError(std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw ConfigError(std::string(name) + " must be positive semidefinite");
  }
}

Eigen::VectorXd observation_vector(const SamplePath& path, std::size_t n) {
  const auto y = path.observation(n);
  return Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
}

void append(EstimateSequence& out, const Eigen::VectorXd& mean) {
  for (Eigen::Index i = 0; i < mean.size(); ++i) out.values.push_back(mean(i));
}

void check_scored_range(const SamplePath& path, std::size_t first_scored) {
  if (first_scored > path.horizon) throw UsageError("first scored step beyond the path horizon");
}

}  // namespace

LinearGaussianModel LinearGaussianModel::from_spec(const ModelSpec& spec) {
  spec.validate();
  if (!dynamics::is_linear(spec.kind)) throw ConfigError("Kalman filter requires a linear model");
  const auto dim = static_cast<Eigen::Index>(dynamics::state_dim(spec.kind));
  LinearGaussianModel m;
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(dim, dim);
  if (spec.kind == ModelKind::Linear1D) {
    m.f = Eigen::MatrixXd::Constant(1, 1, 1.0 + 0.1 * spec.eta);
  } else {
    m.f = identity + 0.1 * spec.eta * spec.f_matrix;
  }
  m.q_cov = spec.eta * spec.sigma * spec.sigma * spec.g_matrix * spec.g_matrix.transpose();
  m.h = spec.h_matrix.transpose();
  m.r_cov = spec.sigma0 * spec.sigma0 * identity;
  m.x0_mean = spec.x0;
  m.p0 = Eigen::MatrixXd::Zero(dim, dim);
  return m;
}

void LinearGaussianModel::validate() const {
  const Eigen::Index n = f.rows();
  if (f.cols() != n || q_cov.rows() != n || h.cols() != n || x0_mean.size() != n || p0.rows() != n ||
      r_cov.rows() != h.rows()) {
    throw ConfigError("LinearGaussianModel has inconsistent dimensions");
  }
  require_psd(q_cov, "q_cov");
  require_psd(r_cov, "r_cov");
  require_psd(p0, "p0");
}

FilterState initial_state(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  return FilterState{mean, cov, 0};
}

FilterState kalman_predict(const FilterState& state, const Eigen::MatrixXd& f,
                           const Eigen::MatrixXd& q_cov) {
  FilterState next;
  next.mean = f * state.mean;
  next.cov = f * state.cov * f.transpose() + q_cov;
  next.cov = 0.5 * (next.cov + next.cov.transpose());
  next.step = state.step + 1;
  return next;
}

FilterState kalman_update(const FilterState& state, const Eigen::MatrixXd& h,
                          const Eigen::MatrixXd& r_cov, const Eigen::VectorXd& y) {
  if (y.size() != h.rows() || h.cols() != state.mean.size()) {
    throw UsageError("observation dimensions do not match the filter");
  }
  Eigen::MatrixXd innovation_cov = h * state.cov * h.transpose() + r_cov;
  innovation_cov = 0.5 * (innovation_cov + innovation_cov.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(innovation_cov, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) {
    throw NumericalError("innovation covariance is singular (step " + std::to_string(state.step) + ")");
  }

  // K = P H' S^-1, computed as (S^-1 H P)' since S and P are symmetric.
  const Eigen::MatrixXd gain = innovation_cov.ldlt().solve(h * state.cov).transpose();
  const Eigen::Index dim = state.mean.size();
  const Eigen::MatrixXd reducer = Eigen::MatrixXd::Identity(dim, dim) - gain * h;

  FilterState next;
  next.mean = state.mean + gain * (y - h * state.mean);
  next.cov = reducer * state.cov * reducer.transpose() + gain * r_cov * gain.transpose();
  next.cov = 0.5 * (next.cov + next.cov.transpose());
  next.step = state.step;
  return next;
}

FilterState kalman_step(const FilterState& state, const LinearGaussianModel& model,
                        const Eigen::VectorXd& y) {
  return kalman_update(kalman_predict(state, model.f, model.q_cov), model.h, model.r_cov, y);
}

EstimateSequence run_kalman(const LinearGaussianModel& model, const SamplePath& path,
                            std::size_t first_scored) {
  model.validate();
  check_scored_range(path, first_scored);
  if (static_cast<std::size_t>(model.h.rows()) != path.obs_dim) {
    throw UsageError("path observations do not match the model");
  }
  EstimateSequence out;
  out.first_step = first_scored;
  out.dim = static_cast<std::size_t>(model.f.rows());
  out.values.reserve((path.horizon - first_scored + 1) * out.dim);

  FilterState state = kalman_update(initial_state(model.x0_mean, model.p0), model.h, model.r_cov,
                                    observation_vector(path, 0));
  if (first_scored == 0) append(out, state.mean);
  for (std::size_t n = 1; n <= path.horizon; ++n) {
    state = kalman_step(state, model, observation_vector(path, n));
    if (n >= first_scored) append(out, state.mean);
  }
  return out;
}

NonlinearModel NonlinearModel::from_spec(const ModelSpec& spec) {
  spec.validate();
  if (!dynamics::is_nonlinear(spec.kind)) throw ConfigError("EKF requires a nonlinear model");
  const auto dim = static_cast<Eigen::Index>(dynamics::state_dim(spec.kind));
  NonlinearModel m;
  m.kind = spec.kind;
  m.eta = spec.eta;
  m.f0 = spec.f_matrix;
  m.q_cov = spec.eta * spec.sigma * spec.sigma * spec.g_matrix * spec.g_matrix.transpose();
  m.h = spec.h_matrix.transpose();
  m.r_cov = spec.sigma0 * spec.sigma0 * Eigen::MatrixXd::Identity(dim, dim);
  m.x0_mean = spec.x0;
  m.p0 = Eigen::MatrixXd::Zero(dim, dim);
  return m;
}

Eigen::VectorXd drift(const NonlinearModel& model, const Eigen::VectorXd& x) {
  if (model.kind == ModelKind::NonLinear1D) {
    return x.array() + model.eta * (5.0 * x.array()).sin();
  }
  return x + model.eta * (5.0 * (model.f0 * x)).array().sin().matrix();
}

Eigen::MatrixXd drift_jacobian(const NonlinearModel& model, const Eigen::VectorXd& x) {
  if (model.kind == ModelKind::NonLinear1D) {
    return Eigen::MatrixXd::Constant(1, 1, 1.0 + 5.0 * model.eta * std::cos(5.0 * x(0)));
  }
  const Eigen::Index dim = x.size();
  const Eigen::VectorXd slope = (5.0 * (model.f0 * x)).array().cos();
  return Eigen::MatrixXd::Identity(dim, dim) + 5.0 * model.eta * slope.asDiagonal() * model.f0;
}

FilterState ekf_step(const FilterState& state, const NonlinearModel& model, const Eigen::VectorXd& y) {
  if (!dynamics::is_nonlinear(model.kind)) throw ConfigError("EKF requires a nonlinear model kind");
  const Eigen::MatrixXd jacobian = drift_jacobian(model, state.mean);
  FilterState predicted;
  predicted.mean = drift(model, state.mean);
  predicted.cov = jacobian * state.cov * jacobian.transpose() + model.q_cov;
  predicted.cov = 0.5 * (predicted.cov + predicted.cov.transpose());
  predicted.step = state.step + 1;
  return kalman_update(predicted, model.h, model.r_cov, y);
}

EstimateSequence run_ekf(const NonlinearModel& model, const SamplePath& path, std::size_t first_scored) {
  check_scored_range(path, first_scored);
  if (static_cast<std::size_t>(model.h.rows()) != path.obs_dim) {
    throw UsageError("path observations do not match the model");
  }
  EstimateSequence out;
  out.first_step = first_scored;
  out.dim = static_cast<std::size_t>(model.x0_mean.size());
  out.values.reserve((path.horizon - first_scored + 1) * out.dim);

  FilterState state = kalman_update(initial_state(model.x0_mean, model.p0), model.h, model.r_cov,
                                    observation_vector(path, 0));
  if (first_scored == 0) append(out, state.mean);
  for (std::size_t n = 1; n <= path.horizon; ++n) {
    state = ekf_step(state, model, observation_vector(path, n));
    if (n >= first_scored) append(out, state.mean);
  }
  return out;
}

EstimateSequence run_baseline(const ModelSpec& nominal, const SamplePath& path, std::size_t first_scored) {
  if (dynamics::is_linear(nominal.kind)) {
    return run_kalman(LinearGaussianModel::from_spec(nominal), path, first_scored);
  }
  if (dynamics::is_nonlinear(nominal.kind)) {
    return run_ekf(NonlinearModel::from_spec(nominal), path, first_scored);
  }
  throw ConfigError("no classical filter applies to switching model '" +
                    std::string(dynamics::to_string(nominal.kind)) + "'");
}

}  // namespace deepfilter::filters
