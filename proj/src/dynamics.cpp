#include "deepfilter/dynamics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "deepfilter/errors.hpp"
#include "deepfilter/parallel.hpp"
#include "deepfilter/random.hpp"

namespace deepfilter::dynamics {

namespace {

constexpr ModelKind kAllKinds[] = {ModelKind::Linear1D,    ModelKind::Linear2D,
                                   ModelKind::NonLinear1D, ModelKind::NonLinear2D,
                                   ModelKind::Switching1D, ModelKind::Switching2D};

bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

Eigen::MatrixXd coupling_matrix() {
  Eigen::MatrixXd f(2, 2);
  f << 0.0, 1.0, 1.0, 1.0;
  return f;
}

void require_square(const Eigen::MatrixXd& m, std::size_t dim, const char* name) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim) {
    throw ConfigError(std::string(name) + " must be " + std::to_string(dim) + "x" +
                      std::to_string(dim) + ", got " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear1D: return "linear1d";
    case ModelKind::Linear2D: return "linear2d";
    case ModelKind::NonLinear1D: return "nonlinear1d";
    case ModelKind::NonLinear2D: return "nonlinear2d";
    case ModelKind::Switching1D: return "switching1d";
    case ModelKind::Switching2D: return "switching2d";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  std::string lowered(name);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (ModelKind kind : kAllKinds) {
    if (to_string(kind) == lowered) return kind;
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

bool is_switching(ModelKind kind) {
  return kind == ModelKind::Switching1D || kind == ModelKind::Switching2D;
}

bool is_nonlinear(ModelKind kind) {
  return kind == ModelKind::NonLinear1D || kind == ModelKind::NonLinear2D;
}

bool is_linear(ModelKind kind) {
  return kind == ModelKind::Linear1D || kind == ModelKind::Linear2D;
}

std::size_t state_dim(ModelKind kind) {
  switch (kind) {
    case ModelKind::Linear1D:
    case ModelKind::NonLinear1D:
    case ModelKind::Switching1D: return 1;
    default: return 2;
  }
}

std::size_t observation_dim(ModelKind kind) { return state_dim(kind); }

ModelSpec ModelSpec::preset(ModelKind kind) {
  ModelSpec m;
  m.kind = kind;
  m.eta = 0.005;
  const auto dim = static_cast<Eigen::Index>(state_dim(kind));
  m.f_matrix = Eigen::MatrixXd::Identity(dim, dim);
  m.g_matrix = Eigen::MatrixXd::Identity(dim, dim);
  m.h_matrix = Eigen::MatrixXd::Identity(dim, dim);
  m.x0 = Eigen::VectorXd::Ones(dim);
  switch (kind) {
    case ModelKind::Linear1D:
      m.sigma = 0.7;
      m.sigma0 = 0.5;
      break;
    case ModelKind::Linear2D:
      m.sigma = 1.0;
      m.sigma0 = 0.5;
      m.f_matrix = coupling_matrix();
      break;
    case ModelKind::NonLinear1D:
      m.sigma = 0.7;
      m.sigma0 = 0.5;
      break;
    case ModelKind::NonLinear2D:
      m.sigma = 0.7;
      m.sigma0 = 0.5;
      m.f_matrix = coupling_matrix();
      break;
    case ModelKind::Switching1D:
      m.sigma = 0.1;
      m.sigma0 = 0.3;
      break;
    case ModelKind::Switching2D:
      m.sigma = 0.3;
      m.sigma0 = 2.0;
      m.h_matrix = coupling_matrix();
      break;
  }
  if (is_switching(kind)) {
    m.x0 = Eigen::VectorXd::Zero(dim);
    m.generator_q.resize(2, 2);
    m.generator_q << -2.0, 2.0, 2.0, -2.0;
    m.regime_values = {1.0, 2.0};
  }
  return m;
}

ModelSpec ModelSpec::with_sigma0(double value) const {
  ModelSpec copy = *this;
  copy.sigma0 = value;
  return copy;
}

void validate_generator(const Eigen::MatrixXd& q) {
  if (q.rows() == 0 || q.rows() != q.cols()) throw ConfigError("generator must be square and non-empty");
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (!std::isfinite(q(i, j))) throw ConfigError("generator has non-finite entries");
      if (i != j && q(i, j) < 0.0) throw ConfigError("generator has a negative off-diagonal rate");
      row_sum += q(i, j);
    }
    if (std::abs(row_sum) > 1e-12) {
      throw ConfigError("generator row " + std::to_string(i) + " does not sum to zero");
    }
  }
}

void ModelSpec::validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("eta must be positive");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be non-negative");
  if (!(sigma0 >= 0.0) || !std::isfinite(sigma0)) throw ConfigError("sigma0 must be non-negative");
  const std::size_t dim = state_dim(kind);
  require_square(f_matrix, dim, "f_matrix");
  require_square(g_matrix, dim, "g_matrix");
  require_square(h_matrix, dim, "h_matrix");
  if (static_cast<std::size_t>(x0.size()) != dim) throw ConfigError("x0 has the wrong dimension");
  if (is_switching(kind)) {
    validate_generator(generator_q);
    if (regime_values.size() != static_cast<std::size_t>(generator_q.rows())) {
      throw ConfigError("regime_values must have one entry per generator state");
    }
  }
}

bool ModelSpec::operator==(const ModelSpec& o) const {
  return kind == o.kind && eta == o.eta && sigma == o.sigma && sigma0 == o.sigma0 &&
         same_matrix(f_matrix, o.f_matrix) && same_matrix(g_matrix, o.g_matrix) &&
         same_matrix(h_matrix, o.h_matrix) && same_matrix(x0, o.x0) &&
         same_matrix(generator_q, o.generator_q) && regime_values == o.regime_values;
}

std::vector<double> simulate_markov_chain(const Eigen::MatrixXd& q, double eta,
                                          std::size_t horizon, std::uint64_t seed,
                                          std::span<const double> regime_values) {
  validate_generator(q);
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  const auto states = static_cast<std::size_t>(q.rows());
  if (regime_values.size() != states) {
    throw ConfigError("regime_values must have one entry per generator state");
  }

  GaussianSource source(make_engine(seed, Stream::kRegime));
  std::size_t current = std::min(states - 1, static_cast<std::size_t>(source.unit() * states));

  auto holding_time = [&](std::size_t i) {
    const double rate = -q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-source.unit()) / rate;
  };
  auto next_state = [&](std::size_t i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double rate = -q(row, row);
    const double target = source.unit() * rate;
    double acc = 0.0;
    std::size_t last = i;
    for (std::size_t j = 0; j < states; ++j) {
      if (j == i) continue;
      const double r = q(row, static_cast<Eigen::Index>(j));
      if (r <= 0.0) continue;
      last = j;
      acc += r;
      if (target < acc) return j;
    }
    return last;
  };

  std::vector<double> out(horizon + 1);
  double next_jump = holding_time(current);
  for (std::size_t n = 0; n <= horizon; ++n) {
    const double t = static_cast<double>(n) * eta;
    while (next_jump <= t) {
      current = next_state(current);
      next_jump += holding_time(current);
    }
    out[n] = regime_values[current];
  }
  return out;
}

SamplePath simulate_path(const ModelSpec& model, std::size_t horizon, std::uint64_t seed,
                         NoiseOverride override) {
  model.validate();
  if (horizon < 1) throw ConfigError("horizon must be at least 1");

  const std::size_t m = state_dim(model.kind);
  SamplePath path;
  path.horizon = horizon;
  path.state_dim = m;
  path.obs_dim = observation_dim(model.kind);
  path.seed = seed;
  path.states.assign((horizon + 1) * m, 0.0);
  path.observations.assign((horizon + 1) * path.obs_dim, 0.0);

  GaussianSource system_noise(make_engine(seed, Stream::kSystemNoise));
  GaussianSource observation_noise(make_engine(seed, Stream::kObservationNoise));
  const bool silent = override.zero_noise;
  auto u = [&] { return silent ? 0.0 : system_noise(); };
  auto v = [&] { return silent ? 0.0 : observation_noise(); };

  const double eta = model.eta;
  const double sqrt_eta = std::sqrt(eta);
  double* x = path.states.data();
  double* y = path.observations.data();

  switch (model.kind) {
    case ModelKind::Linear1D:
    case ModelKind::NonLinear1D: {
      const bool nonlinear = model.kind == ModelKind::NonLinear1D;
      x[0] = model.x0(0);
      for (std::size_t n = 0; n <= horizon; ++n) {
        y[n] = x[n] + model.sigma0 * v();
        if (n == horizon) break;
        const double drift = nonlinear ? x[n] + eta * std::sin(5.0 * x[n]) : (1.0 + 0.1 * eta) * x[n];
        x[n + 1] = drift + sqrt_eta * model.sigma * u();
      }
      break;
    }
    case ModelKind::Linear2D:
    case ModelKind::NonLinear2D: {
      const bool nonlinear = model.kind == ModelKind::NonLinear2D;
      const Eigen::Matrix2d f0 = model.f_matrix;
      const Eigen::Matrix2d g0 = model.g_matrix;
      const Eigen::Matrix2d obs = model.h_matrix.transpose();
      const Eigen::Matrix2d transition = Eigen::Matrix2d::Identity() + 0.1 * eta * f0;
      Eigen::Vector2d state = model.x0;
      for (std::size_t n = 0; n <= horizon; ++n) {
        x[2 * n] = state(0);
        x[2 * n + 1] = state(1);
        Eigen::Vector2d noise_v;
        noise_v(0) = v();
        noise_v(1) = v();
        const Eigen::Vector2d obs_n = obs * state + model.sigma0 * noise_v;
        y[2 * n] = obs_n(0);
        y[2 * n + 1] = obs_n(1);
        if (n == horizon) break;
        Eigen::Vector2d noise_u;
        noise_u(0) = u();
        noise_u(1) = u();
        Eigen::Vector2d drift;
        if (nonlinear) {
          drift = state + eta * (5.0 * (f0 * state)).array().sin().matrix();
        } else {
          drift = transition * state;
        }
        state = drift + sqrt_eta * model.sigma * (g0 * noise_u);
      }
      break;
    }
    case ModelKind::Switching1D:
    case ModelKind::Switching2D: {
      path.regimes = simulate_markov_chain(model.generator_q, eta, horizon, seed, model.regime_values);
      const bool planar = model.kind == ModelKind::Switching2D;
      const Eigen::MatrixXd& h = model.h_matrix;
      for (std::size_t n = 0; n <= horizon; ++n) {
        const double phase = static_cast<double>(n) * eta * path.regimes[n] + model.sigma * u();
        if (!planar) {
          x[n] = std::sin(phase);
          y[n] = x[n] + model.sigma0 * v();
        } else {
          const double s = std::sin(phase);
          const double c = std::cos(phase);
          x[2 * n] = s;
          x[2 * n + 1] = c;
          const double w0 = v();
          const double w1 = v();
          y[2 * n] = h(0, 0) * s + h(0, 1) * c + model.sigma0 * w0;
          y[2 * n + 1] = h(1, 0) * s + h(1, 1) * c + model.sigma0 * w1;
        }
      }
      break;
    }
  }
  return path;
}

PathSet generate_dataset(const ModelSpec& model, std::size_t n_paths, std::size_t horizon,
                         std::uint64_t base_seed) {
  if (n_paths < 1) throw ConfigError("n_paths must be at least 1");
  model.validate();
  PathSet set;
  set.model = model;
  set.horizon = horizon;
  set.paths.resize(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    set.paths[i] = simulate_path(model, horizon, base_seed + i);
  });
  return set;
}

}  // namespace deepfilter::dynamics
