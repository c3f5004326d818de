#include "deepfilter/weights_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "deepfilter/errors.hpp"

namespace deepfilter::io {

using dynamics::ModelSpec;
using pipeline::TrainedFilter;

namespace {

constexpr std::string_view kMagic = "deepfilter-weights";

class LineWriter {
 public:
  template <typename... Parts>
  void line(const Parts&... parts) {
    bool first = true;
    ((emit(parts, first)), ...);
    text_ += '\n';
  }
  void values(std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) text_ += ' ';
      text_ += format_double(v[i]);
    }
    text_ += '\n';
  }
  std::string& text() { return text_; }

 private:
  void emit(std::string_view s, bool& first) { sep(first), text_ += s; }
  void emit(const std::string& s, bool& first) { sep(first), text_ += s; }
  void emit(const char* s, bool& first) { sep(first), text_ += s; }
  void emit(double d, bool& first) { sep(first), text_ += format_double(d); }
  void emit(std::size_t n, bool& first) { sep(first), text_ += std::to_string(n); }
  void sep(bool& first) {
    if (!first) text_ += ' ';
    first = false;
  }
  std::string text_;
};

class LineReader {
 public:
  explicit LineReader(std::string_view text) : in_(std::string(text)) {}

  std::vector<std::string> tokens(std::string_view expected_key) {
    std::string line;
    if (!std::getline(in_, line)) throw ShapeError("unexpected end of weight file (wanted " + std::string(expected_key) + ")");
    std::istringstream ls(line);
    std::vector<std::string> out;
    for (std::string tok; ls >> tok;) out.push_back(tok);
    if (out.empty() || out[0] != expected_key) {
      throw ShapeError("expected '" + std::string(expected_key) + "' record, got '" + line + "'");
    }
    return out;
  }

  std::vector<double> values(std::size_t count) {
    std::string line;
    if (!std::getline(in_, line)) throw ShapeError("unexpected end of weight file (values)");
    std::vector<double> out;
    out.reserve(count);
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (pos >= line.size()) break;
      std::size_t end = line.find(' ', pos);
      if (end == std::string::npos) end = line.size();
      out.push_back(parse_double(std::string_view(line).substr(pos, end - pos)));
      pos = end;
    }
    if (out.size() != count) {
      throw ShapeError("expected " + std::to_string(count) + " values, found " + std::to_string(out.size()));
    }
    return out;
  }

 private:
  std::istringstream in_;
};

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ShapeError("bad integer '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw ShapeError("bad integer '" + s + "'");
  return v;
}

const std::string& field(const std::vector<std::string>& toks, std::size_t i) {
  if (i >= toks.size()) throw ShapeError("record '" + toks[0] + "' is too short");
  return toks[i];
}

void write_matrix(LineWriter& w, const char* name, const Eigen::MatrixXd& m) {
  w.line("matrix", name, static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  std::vector<double> flat;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  w.values(flat);
}

Eigen::MatrixXd read_matrix(LineReader& r, std::string_view name) {
  const auto toks = r.tokens("matrix");
  if (field(toks, 1) != name) throw ShapeError("expected matrix " + std::string(name));
  const std::size_t rows = to_size(field(toks, 2));
  const std::size_t cols = to_size(field(toks, 3));
  const auto flat = r.values(rows * cols);
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = flat[i * cols + j];
  return m;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("double formatting failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  if (text == "nan") return NAN;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ShapeError("bad number '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_filter(const TrainedFilter& f) {
  LineWriter w;
  w.line(kMagic, "v" + std::to_string(kWeightsVersion));
  const nn::NetworkConfig& c = f.config;
  w.line("architecture", nn::to_string(c.architecture));
  w.line("input_window", c.input_window);
  w.line("input_channels", c.input_channels);
  w.line("output_dim", c.output_dim);
  w.line("layers", c.layers.size());
  for (const nn::LayerSpec& l : c.layers) {
    w.line("layer", nn::to_string(l.kind), "units", l.units, "kernel", l.kernel, "padding", nn::to_string(l.padding),
           "activation", nn::to_string(l.activation));
  }

  const ModelSpec& m = f.model;
  w.line("model", dynamics::to_string(m.kind), "eta", m.eta, "sigma", m.sigma, "sigma0", m.sigma0);
  write_matrix(w, "f_matrix", m.f_matrix);
  write_matrix(w, "g_matrix", m.g_matrix);
  write_matrix(w, "h_matrix", m.h_matrix);
  write_matrix(w, "x0", m.x0);
  write_matrix(w, "generator_q", m.generator_q);
  w.line("regimes", m.regime_values.size());
  w.values(m.regime_values);

  const pipeline::TrainingConfig& t = f.training;
  w.line("training", "n0", t.n0, "horizon", t.horizon, "n_paths", t.n_paths, "gamma", t.gamma, "epochs", t.epochs,
         "minibatch", t.minibatch, "stride", t.window_stride, "reproducible", std::size_t{t.reproducible ? 1u : 0u});
  if (t.early_stopping) {
    w.line("early_stopping", "patience", t.early_stopping->patience, "validation_fraction",
           t.early_stopping->validation_fraction);
  } else {
    w.line("early_stopping", "none");
  }
  w.line("seed", std::to_string(f.seed));
  w.line("best_epoch", f.best_epoch);
  w.line("stopped_early", std::size_t{f.stopped_early ? 1u : 0u});
  w.line("epoch_losses", f.epoch_losses.size());
  w.values(f.epoch_losses);
  w.line("validation_losses", f.validation_losses.size());
  w.values(f.validation_losses);

  w.line("parameters", f.weights.parameter_count(), "blocks", f.weights.blocks.size());
  for (std::size_t i = 0; i < f.weights.blocks.size(); ++i) {
    const nn::ParameterBlock& b = f.weights.blocks[i];
    std::string shape;
    for (std::size_t d : b.shape) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    w.line("block", b.name, shape, b.size);
    w.values(f.weights.block(i));
  }
  std::string& text = w.text();
  const std::uint64_t sum = fnv1a64(text);
  text += "checksum fnv1a64 " + hex64(sum) + "\n";
  return text;
}

TrainedFilter deserialize_filter(const std::string& text) {
  // Header first so that a future-version file reports a version error rather
  // than a checksum error.
  const std::size_t header_end = text.find('\n');
  if (header_end == std::string::npos || text.compare(0, kMagic.size(), kMagic) != 0) {
    throw LoadError("not a deepfilter weight file");
  }
  const std::string header = text.substr(0, header_end);
  const std::string expected = std::string(kMagic) + " v" + std::to_string(kWeightsVersion);
  if (header != expected) throw VersionMismatchError("unsupported weight file header '" + header + "'");

  const std::size_t checksum_pos = text.rfind("checksum fnv1a64 ");
  if (checksum_pos == std::string::npos) throw ChecksumError("weight file has no checksum record");
  const std::string_view body(text.data(), checksum_pos);
  std::string stored = text.substr(checksum_pos + 17);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (stored != hex64(fnv1a64(body))) throw ChecksumError("weight file checksum mismatch");

  LineReader r(body);
  (void)r.tokens(kMagic);
  TrainedFilter f;
  nn::NetworkConfig& c = f.config;
  c.architecture = nn::parse_architecture(field(r.tokens("architecture"), 1));
  c.input_window = to_size(field(r.tokens("input_window"), 1));
  c.input_channels = to_size(field(r.tokens("input_channels"), 1));
  c.output_dim = to_size(field(r.tokens("output_dim"), 1));
  const std::size_t n_layers = to_size(field(r.tokens("layers"), 1));
  for (std::size_t i = 0; i < n_layers; ++i) {
    const auto t = r.tokens("layer");
    nn::LayerSpec l;
    l.kind = nn::parse_layer_kind(field(t, 1));
    l.units = to_size(field(t, 3));
    l.kernel = to_size(field(t, 5));
    l.padding = nn::parse_padding(field(t, 7));
    l.activation = nn::parse_activation(field(t, 9));
    c.layers.push_back(l);
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ShapeError(std::string("inconsistent network config: ") + e.what());
  }

  ModelSpec& m = f.model;
  {
    const auto t = r.tokens("model");
    m.kind = dynamics::parse_model_kind(field(t, 1));
    m.eta = parse_double(field(t, 3));
    m.sigma = parse_double(field(t, 5));
    m.sigma0 = parse_double(field(t, 7));
  }
  m.f_matrix = read_matrix(r, "f_matrix");
  m.g_matrix = read_matrix(r, "g_matrix");
  m.h_matrix = read_matrix(r, "h_matrix");
  m.x0 = read_matrix(r, "x0");
  m.generator_q = read_matrix(r, "generator_q");
  m.regime_values = r.values(to_size(field(r.tokens("regimes"), 1)));

  pipeline::TrainingConfig& tc = f.training;
  {
    const auto t = r.tokens("training");
    tc.n0 = to_size(field(t, 2));
    tc.horizon = to_size(field(t, 4));
    tc.n_paths = to_size(field(t, 6));
    tc.gamma = parse_double(field(t, 8));
    tc.epochs = to_size(field(t, 10));
    tc.minibatch = to_size(field(t, 12));
    tc.window_stride = to_size(field(t, 14));
    tc.reproducible = to_size(field(t, 16)) != 0;
  }
  {
    const auto t = r.tokens("early_stopping");
    if (field(t, 1) != "none") {
      tc.early_stopping = pipeline::EarlyStoppingConfig{to_size(field(t, 2)), parse_double(field(t, 4))};
    }
  }
  f.seed = to_u64(field(r.tokens("seed"), 1));
  f.best_epoch = to_size(field(r.tokens("best_epoch"), 1));
  f.stopped_early = to_size(field(r.tokens("stopped_early"), 1)) != 0;
  f.epoch_losses = r.values(to_size(field(r.tokens("epoch_losses"), 1)));
  f.validation_losses = r.values(to_size(field(r.tokens("validation_losses"), 1)));

  const auto header_tokens = r.tokens("parameters");
  const std::size_t declared = to_size(field(header_tokens, 1));
  const std::size_t n_blocks = to_size(field(header_tokens, 3));
  f.weights = nn::NetworkWeights::zeros(c);
  if (declared != f.weights.parameter_count() || n_blocks != f.weights.blocks.size()) {
    throw ShapeError("weight file declares " + std::to_string(declared) + " parameters, config implies " +
                     std::to_string(f.weights.parameter_count()));
  }
  for (std::size_t i = 0; i < n_blocks; ++i) {
    const auto t = r.tokens("block");
    const nn::ParameterBlock& b = f.weights.blocks[i];
    if (field(t, 1) != b.name || to_size(field(t, 3)) != b.size) {
      throw ShapeError("block " + std::to_string(i) + " does not match the config (" + b.name + ")");
    }
    const auto vals = r.values(b.size);
    std::copy(vals.begin(), vals.end(), f.weights.block(i).begin());
  }
  return f;
}

void save_weights(const TrainedFilter& filter, const std::filesystem::path& file) {
  const std::string text = serialize_filter(filter);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + file.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

TrainedFilter load_weights(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_filter(buf.str());
}

}  // namespace deepfilter::io
