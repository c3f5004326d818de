#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "deepfilter/dynamics.hpp"
#include "deepfilter/errors.hpp"
#include "deepfilter/filters.hpp"
#include "oracles.hpp"

using namespace deepfilter;
using namespace deepfilter::filters;
using dynamics::ModelKind;
using dynamics::ModelSpec;

namespace {

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }
Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

LinearGaussianModel scalar_model(double f, double q, double h, double r) {
  LinearGaussianModel m;
  m.f = scalar(f);
  m.q_cov = scalar(q);
  m.h = scalar(h);
  m.r_cov = scalar(r);
  m.x0_mean = vec1(1.0);
  m.p0 = scalar(0.0);
  return m;
}

Eigen::MatrixXd random_psd(int d, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = normal(rng);
  return scale * (a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d));
}

}  // namespace

TEST(KalmanStep, HugeObservationNoiseGivesZeroGain) {
  const auto m = scalar_model(1.0005, 0.00245, 1.0, 1e12);
  const auto s0 = initial_state(vec1(0.7), scalar(0.3));
  const auto predicted = kalman_predict(s0, m.f, m.q_cov);
  const auto updated = kalman_step(s0, m, vec1(25.0));
  EXPECT_NEAR(updated.mean[0], predicted.mean[0], 1e-9 * std::abs(predicted.mean[0]));
}

TEST(KalmanStep, PerfectObservationIsAdopted) {
  const auto m = scalar_model(1.0005, 0.00245, 1.0, 0.0);
  const auto s = kalman_step(initial_state(vec1(1.0), scalar(0.3)), m, vec1(1.37));
  EXPECT_DOUBLE_EQ(s.mean[0], 1.37);
  EXPECT_NEAR(s.cov(0, 0), 0.0, 1e-15);
}

TEST(KalmanStep, ThreeStepsMatchJointGaussianConditioning) {
  const auto m = scalar_model(1.0005, 0.00245, 1.0, 0.25);
  const Eigen::VectorXd m0 = vec1(1.0);
  const Eigen::MatrixXd p0 = scalar(0.5);
  const std::vector<Eigen::VectorXd> ys = {vec1(1.3), vec1(0.6), vec1(1.1)};
  auto s = initial_state(m0, p0);
  for (const auto& y : ys) s = kalman_step(s, m, y);
  const auto want = oracle::gaussian_conditioning(m.f, m.q_cov, m.h, m.r_cov, m0, p0, ys, 1);
  EXPECT_NEAR(s.mean[0], want[0], 1e-10);
  EXPECT_EQ(s.step, 3u);
}

TEST(RunKalman, MatchesConditioningOnShortHorizons) {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 40; ++trial) {
    const int d = trial % 2 == 0 ? 1 : 2;
    LinearGaussianModel m;
    m.f = Eigen::MatrixXd::Identity(d, d) + 0.3 * random_psd(d, rng, 0.2);
    m.q_cov = random_psd(d, rng, 0.05);
    m.h = Eigen::MatrixXd::Identity(d, d) + 0.2 * random_psd(d, rng, 0.3);
    m.r_cov = random_psd(d, rng, 0.2);
    m.x0_mean = Eigen::VectorXd::Constant(d, 1.0);
    m.p0 = Eigen::MatrixXd::Zero(d, d);
    const std::size_t horizon = 1 + static_cast<std::size_t>(trial % 5);

    dynamics::SamplePath path;
    path.horizon = horizon;
    path.state_dim = static_cast<std::size_t>(d);
    path.obs_dim = static_cast<std::size_t>(d);
    path.states.assign((horizon + 1) * d, 0.0);
    std::vector<Eigen::VectorXd> ys;
    for (std::size_t n = 0; n <= horizon; ++n) {
      Eigen::VectorXd y(d);
      for (int i = 0; i < d; ++i) y[i] = normal(rng);
      ys.push_back(y);
      path.observations.insert(path.observations.end(), y.data(), y.data() + d);
    }

    const auto est = run_kalman(m, path, 0);
    ASSERT_EQ(est.count(), horizon + 1);
    for (std::size_t n = 0; n <= horizon; ++n) {
      const std::vector<Eigen::VectorXd> prefix(ys.begin(), ys.begin() + static_cast<long>(n) + 1);
      const auto want = oracle::gaussian_conditioning(m.f, m.q_cov, m.h, m.r_cov, m.x0_mean, m.p0, prefix, 0);
      for (int i = 0; i < d; ++i) EXPECT_NEAR(est.at(n)[i], want[i], 1e-9) << "trial " << trial << " n " << n;
    }
  }
}

TEST(RunKalman, NoiseFreePathIsRecoveredExactly) {
  for (auto kind : {ModelKind::Linear1D, ModelKind::Linear2D}) {
    const auto spec = ModelSpec::preset(kind);
    const auto path = dynamics::simulate_path(spec, 1000, 5, {.zero_noise = true});
    const auto est = run_kalman(LinearGaussianModel::from_spec(spec), path, 50);
    ASSERT_EQ(est.count(), 951u);
    EXPECT_EQ(est.first_step, 50u);
    for (std::size_t i = 0; i < est.count(); ++i) {
      for (std::size_t j = 0; j < est.dim; ++j) EXPECT_NEAR(est.at(i)[j], path.state(50 + i)[j], 1e-9);
    }
  }
}

TEST(RunKalman, CovarianceStaysSymmetricAndPsd) {
  const auto spec = ModelSpec::preset(ModelKind::Linear2D);
  const auto m = LinearGaussianModel::from_spec(spec);
  const auto path = dynamics::simulate_path(spec, 1000, 8);
  auto s = kalman_update(initial_state(m.x0_mean, m.p0), m.h, m.r_cov, Eigen::Map<const Eigen::VectorXd>(path.observation(0).data(), 2));
  for (std::size_t n = 1; n <= 1000; ++n) {
    s = kalman_step(s, m, Eigen::Map<const Eigen::VectorXd>(path.observation(n).data(), 2));
    ASSERT_LE((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    ASSERT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s.cov).eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(KalmanStep, GainDecreasesWithObservationNoise) {
  double previous_gain = 2.0;
  for (double r : {0.01, 0.1, 0.25, 1.0, 4.0, 100.0}) {
    const auto m = scalar_model(1.0, 0.01, 1.0, r);
    const auto prior = initial_state(vec1(0.0), scalar(0.2));
    // With prior mean 0 and y = 1 the posterior mean is the gain itself.
    const double gain = kalman_step(prior, m, vec1(1.0)).mean[0];
    EXPECT_LT(gain, previous_gain);
    previous_gain = gain;
  }
}

TEST(KalmanStep, SingularInnovationIsNumericalError) {
  const auto m = scalar_model(1.0, 0.0, 1.0, 0.0);
  EXPECT_THROW(kalman_step(initial_state(vec1(1.0), scalar(0.0)), m, vec1(1.0)), NumericalError);
}

TEST(FromSpec, LinearMatricesFollowThePreset) {
  const auto m1 = LinearGaussianModel::from_spec(ModelSpec::preset(ModelKind::Linear1D));
  EXPECT_DOUBLE_EQ(m1.f(0, 0), 1.0005);
  EXPECT_DOUBLE_EQ(m1.q_cov(0, 0), 0.005 * 0.49);
  EXPECT_DOUBLE_EQ(m1.r_cov(0, 0), 0.25);
  const auto m2 = LinearGaussianModel::from_spec(ModelSpec::preset(ModelKind::Linear2D));
  Eigen::MatrixXd f(2, 2);
  f << 1.0, 0.0005, 0.0005, 1.0005;
  EXPECT_LE((m2.f - f).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(LinearGaussianModel::from_spec(ModelSpec::preset(ModelKind::NonLinear1D)), ConfigError);
}

TEST(Ekf, JacobianAtZero) {
  const auto m = NonlinearModel::from_spec(ModelSpec::preset(ModelKind::NonLinear1D));
  EXPECT_DOUBLE_EQ(drift_jacobian(m, vec1(0.0))(0, 0), 1.025);
}

TEST(Ekf, JacobianMatchesFiniteDifferences2D) {
  const auto m = NonlinearModel::from_spec(ModelSpec::preset(ModelKind::NonLinear2D));
  Eigen::VectorXd x(2);
  x << 0.3, -1.2;
  const auto J = drift_jacobian(m, x);
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up[j] += 1e-6;
    down[j] -= 1e-6;
    const Eigen::VectorXd col = (drift(m, up) - drift(m, down)) / 2e-6;
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(J(i, j), col[i], 1e-9);
  }
}

TEST(Ekf, ZeroStepSizeReducesToKalman) {
  for (auto kind : {ModelKind::NonLinear1D, ModelKind::NonLinear2D}) {
    auto nl = NonlinearModel::from_spec(ModelSpec::preset(kind));
    nl.eta = 0.0;
    const auto d = nl.f0.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    auto a = initial_state(Eigen::VectorXd::Constant(d, 0.4), 0.1 * I);
    auto b = a;
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    for (int n = 0; n < 50; ++n) {
      Eigen::VectorXd y(d);
      for (int i = 0; i < d; ++i) y[i] = normal(rng);
      a = ekf_step(a, nl, y);
      b = kalman_update(kalman_predict(b, I, nl.q_cov), nl.h, nl.r_cov, y);
      EXPECT_LE((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((a.cov - b.cov).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Ekf, ConvergesOnNoiseFreePathAsNoiseVanishes) {
  for (auto kind : {ModelKind::NonLinear1D, ModelKind::NonLinear2D}) {
    auto spec = ModelSpec::preset(kind);
    spec.sigma = 1e-4;
    spec.sigma0 = 1e-4;
    const auto path = dynamics::simulate_path(spec, 200, 3, {.zero_noise = true});
    auto nl = NonlinearModel::from_spec(spec);
    const auto d = nl.f0.rows();
    // Start slightly off the true x0.
    auto s = initial_state(nl.x0_mean + Eigen::VectorXd::Constant(d, 1e-3), 1e-6 * Eigen::MatrixXd::Identity(d, d));
    s = kalman_update(s, nl.h, nl.r_cov, Eigen::Map<const Eigen::VectorXd>(path.observation(0).data(), d));
    for (std::size_t n = 1; n <= 200; ++n) {
      s = ekf_step(s, nl, Eigen::Map<const Eigen::VectorXd>(path.observation(n).data(), d));
      if (n >= 50) {
        for (Eigen::Index i = 0; i < d; ++i) {
          EXPECT_LT(std::abs(s.mean[i] - path.state(n)[static_cast<std::size_t>(i)]), 1e-6);
        }
      }
    }
  }
}

TEST(Baseline, SwitchingModelsHaveNone) {
  const auto spec = ModelSpec::preset(ModelKind::Switching1D);
  const auto path = dynamics::simulate_path(spec, 100, 1);
  EXPECT_THROW(run_baseline(spec, path, 50), ConfigError);
}

TEST(Baseline, DispatchesByKind) {
  const auto lin = ModelSpec::preset(ModelKind::Linear1D);
  const auto p = dynamics::simulate_path(lin, 100, 1);
  EXPECT_EQ(run_baseline(lin, p, 50), run_kalman(LinearGaussianModel::from_spec(lin), p, 50));
  const auto nl = ModelSpec::preset(ModelKind::NonLinear2D);
  const auto q = dynamics::simulate_path(nl, 100, 1);
  EXPECT_EQ(run_baseline(nl, q, 50), run_ekf(NonlinearModel::from_spec(nl), q, 50));
}
