#include "deepfilter/path_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "deepfilter/errors.hpp"

namespace deepfilter::dynamics {

static_assert(std::endian::native == std::endian::little,
              "PathSet serialization assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'F', 'P', 'A', 'T', 'H', 'S', '\0'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw LoadError("truncated PathSet stream");
  return value;
}

void put_doubles(std::ostream& out, const std::vector<double>& values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
}

void get_doubles(std::istream& in, std::vector<double>& values, std::size_t count) {
  values.resize(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw LoadError("truncated PathSet stream");
}

void put_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(out, m(r, c));
}

Eigen::MatrixXd get_matrix(std::istream& in) {
  const auto rows = get<std::uint32_t>(in);
  const auto cols = get<std::uint32_t>(in);
  if (rows > 64 || cols > 64) throw ShapeError("implausible matrix shape in PathSet header");
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = get<double>(in);
  return m;
}

}  // namespace

void write_pathset(std::ostream& out, const PathSet& set) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kPathSetVersion);
  put<std::uint32_t>(out, 0);

  const ModelSpec& m = set.model;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.kind));
  put<double>(out, m.eta);
  put<double>(out, m.sigma);
  put<double>(out, m.sigma0);
  put_matrix(out, m.f_matrix);
  put_matrix(out, m.g_matrix);
  put_matrix(out, m.h_matrix);
  put_matrix(out, m.x0);
  put_matrix(out, m.generator_q);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(m.regime_values.size()));
  for (double r : m.regime_values) put<double>(out, r);

  const std::size_t sdim = state_dim(m.kind);
  const std::size_t odim = observation_dim(m.kind);
  put<std::uint64_t>(out, set.paths.size());
  put<std::uint64_t>(out, set.horizon);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(sdim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(odim));
  for (const SamplePath& p : set.paths) {
    if (p.horizon != set.horizon || p.state_dim != sdim || p.obs_dim != odim) {
      throw UsageError("PathSet contains a path inconsistent with its header");
    }
    put<std::uint64_t>(out, p.seed);
    put_doubles(out, p.states);
    put_doubles(out, p.observations);
    if (is_switching(m.kind)) put_doubles(out, p.regimes);
  }
  if (!out) throw std::runtime_error("failed writing PathSet stream");
}

PathSet read_pathset(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw LoadError("not a PathSet file (bad magic)");
  const auto version = get<std::uint32_t>(in);
  if (version != kPathSetVersion) {
    throw VersionMismatchError("PathSet version " + std::to_string(version) + " unsupported");
  }
  (void)get<std::uint32_t>(in);

  PathSet set;
  ModelSpec& m = set.model;
  const auto kind = get<std::uint32_t>(in);
  if (kind > static_cast<std::uint32_t>(ModelKind::Switching2D)) throw LoadError("unknown model kind");
  m.kind = static_cast<ModelKind>(kind);
  m.eta = get<double>(in);
  m.sigma = get<double>(in);
  m.sigma0 = get<double>(in);
  m.f_matrix = get_matrix(in);
  m.g_matrix = get_matrix(in);
  m.h_matrix = get_matrix(in);
  m.x0 = get_matrix(in);
  m.generator_q = get_matrix(in);
  const auto regimes = get<std::uint32_t>(in);
  if (regimes > 64) throw ShapeError("implausible regime count");
  for (std::uint32_t i = 0; i < regimes; ++i) m.regime_values.push_back(get<double>(in));
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw ShapeError(std::string("invalid model descriptor: ") + e.what());
  }

  const auto n_paths = get<std::uint64_t>(in);
  set.horizon = get<std::uint64_t>(in);
  const auto sdim = get<std::uint32_t>(in);
  const auto odim = get<std::uint32_t>(in);
  if (sdim != state_dim(m.kind) || odim != observation_dim(m.kind)) {
    throw ShapeError("PathSet dimensions disagree with the model kind");
  }
  const std::size_t points = set.horizon + 1;
  set.paths.resize(n_paths);
  for (SamplePath& p : set.paths) {
    p.horizon = set.horizon;
    p.state_dim = sdim;
    p.obs_dim = odim;
    p.seed = get<std::uint64_t>(in);
    get_doubles(in, p.states, points * sdim);
    get_doubles(in, p.observations, points * odim);
    if (is_switching(m.kind)) get_doubles(in, p.regimes, points);
  }
  return set;
}

void save_pathset(const std::filesystem::path& file, const PathSet& set) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  write_pathset(out, set);
}

PathSet load_pathset(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError("cannot open " + file.string());
  return read_pathset(in);
}

void write_pathset_csv(std::ostream& out, const PathSet& set) {
  const std::size_t sdim = state_dim(set.model.kind);
  const std::size_t odim = observation_dim(set.model.kind);
  out << "seed,n";
  for (std::size_t i = 0; i < sdim; ++i) out << ",x_" << i;
  for (std::size_t i = 0; i < odim; ++i) out << ",y_" << i;
  out << ",alpha\n";
  out << std::setprecision(17);
  for (const SamplePath& p : set.paths) {
    for (std::size_t n = 0; n < p.length(); ++n) {
      out << p.seed << ',' << n;
      for (double v : p.state(n)) out << ',' << v;
      for (double v : p.observation(n)) out << ',' << v;
      out << ',';
      if (!p.regimes.empty()) out << p.regimes[n];
      out << '\n';
    }
  }
}

}  // namespace deepfilter::dynamics
