// Acceptance harness: one PASS/FAIL line per criterion.
//
// Criteria 1-6 are full-scale experiments (5000 training paths, 5000 test
// paths, N = 1000, n0 = 50). Trained filters go to --cache so reruns only
// pay for evaluation. Criteria 7-12 are desk-scale property checks.
//
// Exit status: non-zero when a property check (7-12) fails. Quantitative
// misses are printed as FAIL but only change the exit status under --strict,
// since they measure agreement with published numbers rather than
// correctness of the code.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "deepfilter/dynamics.hpp"
#include "deepfilter/errors.hpp"
#include "deepfilter/experiment.hpp"
#include "deepfilter/filters.hpp"
#include "deepfilter/network.hpp"
#include "deepfilter/path_io.hpp"
#include "deepfilter/pipeline.hpp"
#include "deepfilter/weights_io.hpp"

using namespace deepfilter;
using dynamics::ModelKind;
using experiment::ExperimentReport;
using experiment::ExperimentSpec;
using experiment::Method;
using experiment::TableId;

namespace {

struct Outcome {
  Outcome() = default;
  Outcome(bool p, std::string d) : pass(p), detail(std::move(d)) {}

  bool pass = false;
  std::string detail;
  std::vector<std::string> notes;
};

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

struct Options {
  std::optional<std::filesystem::path> cache;
  bool quick = false;
  bool verbose = false;
};

Options g_opts;

ExperimentSpec spec_for(TableId id, std::vector<ModelKind> models, std::optional<std::vector<Method>> methods) {
  ExperimentSpec s;
  s.table_id = id;
  s.overrides.models = std::move(models);
  s.overrides.methods = std::move(methods);
  s.quick = g_opts.quick;
  s.cache_dir = g_opts.cache;
  s.verbose = g_opts.verbose;
  return s;
}

void log(const std::string& msg) {
  static const auto start = std::chrono::steady_clock::now();
  const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "[" << fmt(t, 0) << "s] " << msg << std::endl;
}

ExperimentReport run(const ExperimentSpec& s, const std::string& label) {
  log("running " + label);
  auto r = experiment::run_experiment(s);
  for (const auto& row : r.rows) {
    log("  " + row.model + " " + row.arch + " sigma0_am=" + fmt(row.sigma0_am, 1) + " rel_err=" +
        fmt(row.rel_err_pct, 3) + "%");
  }
  return r;
}

// Error of `arch` at a given sigma0_am (the first row when unspecified).
double err(const ExperimentReport& r, const std::string& model, const std::string& arch,
           std::optional<double> sigma0_am = std::nullopt) {
  for (const auto& row : r.rows) {
    if (row.model == model && row.arch == arch && (!sigma0_am || row.sigma0_am == *sigma0_am)) return row.rel_err_pct;
  }
  throw std::runtime_error("no row for " + model + "/" + arch);
}

// Experiments shared between criteria are computed once.
template <class T>
class Lazy {
 public:
  explicit Lazy(std::function<T()> make) : make_(std::move(make)) {}
  const T& get() {
    if (!value_) value_ = make_();
    return *value_;
  }

 private:
  std::function<T()> make_;
  std::optional<T> value_;
};

Lazy<ExperimentReport> linear1d([] {
  return run(spec_for(TableId::T1_linear, {ModelKind::Linear1D}, std::nullopt), "linear1d: kf, dnn, cnn, rnn");
});
Lazy<ExperimentReport> nonlinear1d([] {
  return run(spec_for(TableId::T4_nonlinear, {ModelKind::NonLinear1D}, std::nullopt),
             "nonlinear1d: ekf, dnn, cnn, rnn");
});

const std::vector<std::string> kNets = {"dnn", "cnn", "rnn"};

// ---------------------------------------------------------------- quantitative

Outcome kf_linear() {
  const double e1 = err(linear1d.get(), "linear1d", "kf");
  const auto r2 = run(spec_for(TableId::T1_linear, {ModelKind::Linear2D}, std::vector<Method>{Method::KF}),
                      "linear2d: kf");
  const double e2 = err(r2, "linear2d", "kf");
  const bool ok1 = std::abs(e1 - 4.17) <= 0.3;
  const bool ok2 = std::abs(e2 - 4.45) <= 0.3;
  return {ok1 && ok2, "KF linear1d " + fmt(e1) + "% (target 4.17 +/- 0.3), linear2d " + fmt(e2) +
                          "% (target 4.45 +/- 0.3)"};
}

Outcome ekf_nonlinear() {
  const double e1 = err(nonlinear1d.get(), "nonlinear1d", "ekf");
  const auto r2 = run(spec_for(TableId::T4_nonlinear, {ModelKind::NonLinear2D}, std::vector<Method>{Method::EKF}),
                      "nonlinear2d: ekf");
  const double e2 = err(r2, "nonlinear2d", "ekf");
  Outcome o;
  o.pass = std::abs(e1 - 10.04) <= 0.6 && std::abs(e2 - 8.87) <= 0.6;
  o.detail = "EKF nonlinear1d " + fmt(e1) + "% (target 10.04 +/- 0.6), nonlinear2d " + fmt(e2) +
             "% (target 8.87 +/- 0.6)";
  if (!o.pass) {
    for (double sigma : {0.5, 0.7, 1.0}) {
      auto s = spec_for(TableId::T4_nonlinear, {ModelKind::NonLinear1D, ModelKind::NonLinear2D},
                        std::vector<Method>{Method::EKF});
      s.overrides.sigma = sigma;
      const auto r = run(s, "ekf sensitivity sigma=" + fmt(sigma, 1));
      o.notes.push_back("sensitivity sigma=" + fmt(sigma, 1) + ": nonlinear1d " +
                        fmt(err(r, "nonlinear1d", "ekf")) + "%, nonlinear2d " + fmt(err(r, "nonlinear2d", "ekf")) +
                        "%");
    }
  }
  return o;
}

Outcome df_beats_ekf() {
  const auto& r = nonlinear1d.get();
  const double ekf = err(r, "nonlinear1d", "ekf");
  const std::map<std::string, double> reference = {{"dnn", 6.16}, {"cnn", 5.68}, {"rnn", 6.40}};
  bool ok = true;
  std::string detail = "EKF " + fmt(ekf) + "%;";
  for (const auto& a : kNets) {
    const double e = err(r, "nonlinear1d", a);
    const bool dominates = e <= ekf - 2.5;
    const bool near_reference = std::abs(e - reference.at(a)) <= 1.5;
    ok = ok && dominates && near_reference;
    detail += " " + a + " " + fmt(e) + "% (gap " + fmt(ekf - e) + "pp, reference " + fmt(reference.at(a)) + ")";
  }
  return {ok, detail + "; need gap >= 2.5pp and |DF - reference| <= 1.5pp"};
}

Outcome df_matches_kf() {
  const auto& r = linear1d.get();
  const double kf = err(r, "linear1d", "kf");
  bool ok = true;
  std::string detail = "KF " + fmt(kf) + "%;";
  for (const auto& a : kNets) {
    const double e = err(r, "linear1d", a);
    ok = ok && e >= kf && e <= kf + 1.0;
    if (a == "cnn") ok = ok && std::abs(e - kf) <= 0.5;
    detail += " " + a + " " + fmt(e) + "% (" + (e >= kf ? "+" : "") + fmt(e - kf) + "pp)";
  }
  return {ok, detail + "; need each in [KF, KF+1.0], CNN within 0.5pp"};
}

Outcome robustness_shape() {
  const std::vector<double> grid = {0.5, 1.0, 1.5, 2.0, 2.5};
  bool ok = true;
  std::string detail;
  Outcome o;
  for (auto [id, kind, base] : {std::tuple{TableId::T2_lin1d_sweep, ModelKind::Linear1D, Method::KF},
                                std::tuple{TableId::T5_nl1d_sweep, ModelKind::NonLinear1D, Method::EKF}}) {
    auto s = spec_for(id, {kind}, std::vector<Method>{base, Method::DNN, Method::CNN, Method::RNN});
    s.overrides.sigma0_am = grid;
    const std::string model(dynamics::to_string(kind));
    const auto r = run(s, model + " robustness sweep");
    for (const auto& a : {std::string(experiment::to_string(base)), std::string("dnn"), std::string("cnn"),
                          std::string("rnn")}) {
      std::vector<double> curve;
      for (double g : grid) curve.push_back(err(r, model, a, g));
      bool monotone = true;
      for (std::size_t i = 1; i < curve.size(); ++i) monotone = monotone && curve[i] >= curve[i - 1] - 0.3;
      const double rise = curve.back() - curve.front();
      const bool good = monotone && rise >= 2.0;
      ok = ok && good;
      std::string line = model + "/" + a + ":";
      for (double c : curve) line += " " + fmt(c);
      line += good ? "" : (monotone ? "  (rise < 2pp)" : "  (not monotone)");
      o.notes.push_back(line);
      if (!good) detail += (detail.empty() ? "" : ", ") + model + "/" + a;
    }
  }
  o.pass = ok;
  o.detail = ok ? "all 8 curves monotone within 0.3pp and rise >= 2pp over sigma0_am 0.5..2.5"
                : "curves failing: " + detail;
  return o;
}

Outcome early_stopping_rescue() {
  std::string plain;
  bool plain_bad = false;
  try {
    auto s = spec_for(TableId::T8_swt2d_sweep, {ModelKind::Switching2D}, std::vector<Method>{Method::RNN});
    s.overrides.sigma0_am = std::vector<double>{2.5};
    const double e = err(run(s, "switching2d: rnn"), "switching2d", "rnn");
    plain = fmt(e) + "%";
    plain_bad = e > 30.0;
  } catch (const TrainingDivergedError& e) {
    plain = std::string("diverged (") + e.what() + ")";
    plain_bad = true;
  } catch (const NumericalError& e) {
    plain = std::string("non-finite output (") + e.what() + ")";
    plain_bad = true;
  }
  auto s = spec_for(TableId::T8_swt2d_sweep, {ModelKind::Switching2D}, std::vector<Method>{Method::RNN_EarlyStopping});
  s.overrides.sigma0_am = std::vector<double>{2.5};
  const double es = err(run(s, "switching2d: rnn with early stopping"), "switching2d", "rnn_es");
  return {es < 25.0 && plain_bad,
          "sigma0_am=2.5: rnn+early stopping " + fmt(es) + "% (need < 25), plain rnn " + plain +
              " (need divergence or > 30)"};
}

// ------------------------------------------------------------------ properties

Eigen::MatrixXd random_psd(int d, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = normal(rng);
  return scale * (a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d));
}

Outcome kalman_oracle() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  int trials = 0;
  for (int trial = 0; trial < 100; ++trial, ++trials) {
    const int d = trial % 2 == 0 ? 1 : 2;
    filters::LinearGaussianModel m;
    m.f = Eigen::MatrixXd::Identity(d, d) + 0.3 * random_psd(d, rng, 0.2);
    m.q_cov = random_psd(d, rng, 0.05);
    m.h = Eigen::MatrixXd::Identity(d, d) + 0.2 * random_psd(d, rng, 0.3);
    m.r_cov = random_psd(d, rng, 0.2);
    m.x0_mean = Eigen::VectorXd::Constant(d, 1.0);
    m.p0 = trial % 4 < 2 ? Eigen::MatrixXd::Zero(d, d) : random_psd(d, rng, 0.5);
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
    const auto est = filters::run_kalman(m, path, 0);
    for (std::size_t n = 0; n <= horizon; ++n) {
      const std::vector<Eigen::VectorXd> prefix(ys.begin(), ys.begin() + static_cast<long>(n) + 1);
      const auto want = oracle::gaussian_conditioning(m.f, m.q_cov, m.h, m.r_cov, m.x0_mean, m.p0, prefix, 0);
      for (int i = 0; i < d; ++i) worst = std::max(worst, std::abs(est.at(n)[i] - want[i]));
    }
  }
  return {worst <= 1e-9, std::to_string(trials) + " random 1D/2D models, horizons 1-5: max |KF - conditioning| " +
                             sci(worst) + " (need <= 1e-9)"};
}

struct PresetCase {
  nn::Architecture arch;
  std::size_t n0;
  std::size_t m2;
  std::size_t m1;
};

const std::vector<PresetCase> kPresets = {
    {nn::Architecture::DNN, 50, 1, 1}, {nn::Architecture::DNN, 50, 2, 2}, {nn::Architecture::CNN, 50, 1, 1},
    {nn::Architecture::CNN, 50, 2, 2}, {nn::Architecture::RNN, 50, 1, 1}, {nn::Architecture::RNN, 50, 2, 2},
};

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

nn::NetworkWeights random_weights(const nn::NetworkConfig& c, std::uint64_t seed) {
  auto w = nn::init_weights(c, seed);
  std::mt19937_64 rng(seed ^ 0x5555);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (double& v : w.values) v += normal(rng);
  return w;
}

Outcome gradient_oracle() {
  std::string detail;
  bool ok = true;
  for (const auto& p : kPresets) {
    const auto c = nn::NetworkConfig::preset(p.arch, p.n0, p.m2, p.m1);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto w = random_weights(c, 7000 + seed);
      const auto x = random_vector(p.n0 * p.m2, 8000 + seed);
      const auto target = random_vector(p.m1, 9000 + seed);
      const auto r = nn::forward(w, c, nn::Tensor({p.n0, p.m2}, x));
      nn::Tensor og({p.m1});
      for (std::size_t i = 0; i < p.m1; ++i) og[i] = r.output[i] - target[i];
      const auto g = nn::backward(w, c, r.tape, og);
      const auto fd = oracle::fd_gradient(c, w, x, target);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        worst = std::max(worst, std::abs(g.values[i] - fd[i]) / std::max({std::abs(g.values[i]), std::abs(fd[i]), 1e-4}));
      }
    }
    ok = ok && worst <= 1e-5;
    detail += (detail.empty() ? "" : ", ") + std::string(nn::to_string(p.arch)) + "/m" + std::to_string(p.m1) + " " +
              sci(worst);
  }
  return {ok, "max relative gradient error over 10 seeds: " + detail + " (need <= 1e-5)"};
}

Outcome layer_oracle() {
  double worst = 0.0;
  int cases = 0;
  for (const auto& p : kPresets) {
    const auto c = nn::NetworkConfig::preset(p.arch, p.n0, p.m2, p.m1);
    for (std::uint64_t seed = 1; seed <= 10; ++seed, ++cases) {
      const auto w = random_weights(c, seed);
      const auto x = random_vector(p.n0 * p.m2, seed + 100, 2.0);
      const auto got = nn::forward(w, c, nn::Tensor({p.n0, p.m2}, x)).output;
      const auto want = oracle::forward(c, w, x);
      if (got.size() != want.size()) return {false, "output size mismatch"};
      for (std::size_t i = 0; i < want.size(); ++i) {
        worst = std::max(worst, std::abs(got[i] - want[i]) / std::max(1.0, std::abs(want[i])));
      }
    }
  }
  return {worst <= 1e-12, std::to_string(cases) + " dense/conv+pool/LSTM forward passes vs direct summation: max error " +
                              sci(worst) + " (need <= 1e-12)"};
}

EstimateSequence seq(std::vector<double> values, std::size_t dim = 1) {
  EstimateSequence s;
  s.first_step = 50;
  s.dim = dim;
  s.values = std::move(values);
  return s;
}

Outcome metric_properties() {
  using V = std::vector<EstimateSequence>;
  const double half = pipeline::relative_error(V{seq({3.0, 3.0, 3.0})}, V{seq({1.0, 1.0, 1.0})});
  bool ok = half == 50.0;
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  int trials = 0;
  for (; trials < 200; ++trials) {
    const std::size_t dim = 1 + static_cast<std::size_t>(trials % 2);
    V a, b, a8, b8;
    for (int p = 0; p < 4; ++p) {
      std::vector<double> va(30 * dim), vb(30 * dim);
      for (double& v : va) v = normal(rng);
      for (double& v : vb) v = 2.0 * normal(rng);
      a.push_back(seq(va, dim));
      b.push_back(seq(vb, dim));
      for (double& v : va) v *= 8.0;
      for (double& v : vb) v *= 8.0;
      a8.push_back(seq(va, dim));
      b8.push_back(seq(vb, dim));
    }
    const double e = pipeline::relative_error(a, b);
    ok = ok && e == pipeline::relative_error(b, a) && e == pipeline::relative_error(a8, b8) && e >= 0.0 && e <= 100.0;
  }
  return {ok, "hand example " + fmt(half, 1) + "%, " + std::to_string(trials) +
                  " random trials of symmetry, scale invariance and range (exact equality)"};
}

Outcome ctmc() {
  Eigen::MatrixXd q(2, 2);
  q << -2.0, 2.0, 2.0, -2.0;
  const auto alpha = dynamics::simulate_markov_chain(q, 0.005, 1'000'000, 20240601);
  std::size_t in_one = 0;
  std::size_t runs = 1;
  for (std::size_t n = 0; n < alpha.size(); ++n) {
    if (alpha[n] == 1.0) ++in_one;
    if (n > 0 && alpha[n] != alpha[n - 1]) ++runs;
  }
  const double occupancy = static_cast<double>(in_one) / static_cast<double>(alpha.size());
  const double sojourn = static_cast<double>(alpha.size()) / static_cast<double>(runs);
  return {std::abs(occupancy - 0.5) <= 0.01 && std::abs(sojourn - 100.0) <= 5.0,
          "1e6 steps: occupancy " + fmt(occupancy, 4) + " (need 0.5 +/- 0.01), mean sojourn " + fmt(sojourn, 1) +
              " steps (need 100 +/- 5)"};
}

Outcome determinism() {
  bool ok = true;
  std::vector<std::string> broken;
  for (auto kind : {ModelKind::Linear1D, ModelKind::Linear2D, ModelKind::NonLinear1D, ModelKind::NonLinear2D,
                    ModelKind::Switching1D, ModelKind::Switching2D}) {
    const auto m = dynamics::ModelSpec::preset(kind);
    std::ostringstream a, b;
    dynamics::write_pathset(a, dynamics::generate_dataset(m, 20, 300, 17));
    dynamics::write_pathset(b, dynamics::generate_dataset(m, 20, 300, 17));
    if (a.str() != b.str()) broken.push_back("dataset " + std::string(dynamics::to_string(kind)));
  }
  for (auto arch : {nn::Architecture::DNN, nn::Architecture::CNN, nn::Architecture::RNN}) {
    const auto m = dynamics::ModelSpec::preset(ModelKind::Switching2D);
    const auto c = nn::NetworkConfig::preset(arch, 50, 2, 2);
    pipeline::TrainingConfig t;
    t.n_paths = 6;
    t.horizon = 150;
    t.epochs = 2;
    const auto first = io::serialize_filter(pipeline::train(m, c, t, 5));
    const auto second = io::serialize_filter(pipeline::train(m, c, t, 5));
    if (first != second) broken.push_back("weights " + std::string(nn::to_string(arch)));
  }
  ExperimentSpec s;
  s.table_id = TableId::T7_swt1d_sweep;
  s.quick = true;
  s.overrides.n_paths = 4;
  s.overrides.horizon = 120;
  std::ostringstream ra, rb;
  experiment::write_report_csv(ra, experiment::run_experiment(s), false);
  experiment::write_report_csv(rb, experiment::run_experiment(s), false);
  if (ra.str() != rb.str()) broken.push_back("report rows");
  ok = broken.empty();
  std::string detail = "datasets (6 models), weight files (dnn/cnn/rnn) and report rows";
  if (ok) return {true, detail + " byte-identical across repeated runs"};
  for (const auto& b : broken) detail += "; differs: " + b;
  return {false, detail};
}

struct Criterion {
  int id;
  std::string name;
  bool quantitative;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks: one PASS/FAIL line per criterion"};
  std::string cache;
  std::vector<int> only;
  bool strict = false;
  bool properties_only = false;
  std::string report_file;
  app.add_option("--cache", cache, "Directory for trained filters (reused across runs)");
  app.add_option("--only", only, "Run only these criterion numbers")->delimiter(',');
  app.add_flag("--properties-only", properties_only, "Skip the full-scale experiments (criteria 1-6)");
  app.add_flag("--quick", g_opts.quick, "Shrink the experiments (500 paths, 1 epoch); results are not comparable");
  app.add_option("--report", report_file, "Also write the result lines to this file");
  app.add_flag("--strict", strict, "Exit non-zero on any FAIL, quantitative ones included");
  app.add_flag("-v,--verbose", g_opts.verbose, "Report per-epoch training progress");
  CLI11_PARSE(app, argc, argv);
  if (!cache.empty()) g_opts.cache = cache;

  const std::vector<Criterion> criteria = {
      {1, "kf-linear", true, kf_linear},
      {2, "ekf-nonlinear", true, ekf_nonlinear},
      {3, "df-beats-ekf", true, df_beats_ekf},
      {4, "df-matches-kf", true, df_matches_kf},
      {5, "robustness-shape", true, robustness_shape},
      {6, "early-stopping-rescue", true, early_stopping_rescue},
      {7, "kalman-oracle", false, kalman_oracle},
      {8, "gradient-oracle", false, gradient_oracle},
      {9, "layer-oracle", false, layer_oracle},
      {10, "metric-properties", false, metric_properties},
      {11, "ctmc", false, ctmc},
      {12, "determinism", false, determinism},
  };

  std::ofstream report;
  if (!report_file.empty()) report.open(report_file);
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    if (report) report << line << std::endl;
  };

  if (g_opts.quick) emit("note: --quick scale, quantitative results are not comparable to the targets");

  // Property checks first: they are fast and gate the exit status.
  std::vector<const Criterion*> order;
  for (const auto& c : criteria) {
    if (!c.quantitative) order.push_back(&c);
  }
  for (const auto& c : criteria) {
    if (c.quantitative) order.push_back(&c);
  }

  int property_failures = 0;
  int quantitative_failures = 0;
  for (const Criterion* c : order) {
    if (!only.empty() && std::find(only.begin(), only.end(), c->id) == only.end()) continue;
    if (properties_only && c->quantitative) continue;
    Outcome o;
    try {
      o = c->check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++(c->quantitative ? quantitative_failures : property_failures);
    emit(std::string(o.pass ? "PASS" : "FAIL") + "  [" + std::to_string(c->id) + "] " + c->name + ": " + o.detail);
    for (const auto& n : o.notes) emit("        " + n);
  }

  emit("summary: " + std::to_string(property_failures) + " property failure(s), " +
       std::to_string(quantitative_failures) + " quantitative failure(s)");
  if (property_failures > 0) return 1;
  if (strict && quantitative_failures > 0) return 1;
  return 0;
}
