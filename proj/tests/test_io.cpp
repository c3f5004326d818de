#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "deepfilter/dynamics.hpp"
#include "deepfilter/errors.hpp"
#include "deepfilter/path_io.hpp"
#include "deepfilter/pipeline.hpp"
#include "deepfilter/weights_io.hpp"

using namespace deepfilter;
using dynamics::ModelKind;
using dynamics::ModelSpec;

namespace {

pipeline::TrainedFilter small_filter(nn::Architecture arch, ModelKind kind, bool early_stopping = false) {
  const auto model = ModelSpec::preset(kind);
  const auto m = dynamics::state_dim(kind);
  pipeline::TrainingConfig t;
  t.n_paths = 10;
  t.horizon = 80;
  t.epochs = 2;
  if (early_stopping) t.early_stopping = pipeline::EarlyStoppingConfig{};
  return pipeline::train(model, nn::NetworkConfig::preset(arch, 50, dynamics::observation_dim(kind), m), t, 5);
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "deepfilter_test_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// Replaces the first occurrence of `from` and re-seals the checksum so the
// edit reaches the structural checks.
std::string edit_and_reseal(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  text.replace(pos, from.size(), to);
  const auto tail = text.rfind("checksum fnv1a64 ");
  const std::string body = text.substr(0, tail);
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(io::fnv1a64(body)));
  return body + "checksum fnv1a64 " + hex + "\n";
}

}  // namespace

TEST(DoubleCodec, RoundTripsBitExactly) {
  const double values[] = {0.0, -0.0, 1.0, 0.1, -1e-310, 5e-324, std::numeric_limits<double>::max(),
                           3.141592653589793, 1.0 / 3.0, -2.5e17};
  for (double v : values) {
    const double back = io::parse_double(io::format_double(v));
    EXPECT_EQ(std::signbit(back), std::signbit(v));
    EXPECT_EQ(back, v) << io::format_double(v);
  }
  EXPECT_THROW(io::parse_double("1.5x"), ShapeError);
}

TEST(Weights, RoundTripPreservesPredictions) {
  for (auto arch : {nn::Architecture::DNN, nn::Architecture::CNN, nn::Architecture::RNN}) {
    const auto f = small_filter(arch, ModelKind::NonLinear2D);
    const auto file = temp_file(std::string(nn::to_string(arch)) + ".weights");
    io::save_weights(f, file);
    const auto g = io::load_weights(file);
    EXPECT_EQ(g.weights, f.weights);
    EXPECT_EQ(g.config, f.config);
    EXPECT_EQ(g.model, f.model);
    EXPECT_EQ(g.training, f.training);
    EXPECT_EQ(g.epoch_losses, f.epoch_losses);
    const auto path = dynamics::simulate_path(f.model, 200, 99);
    EXPECT_EQ(pipeline::predict(g, path), pipeline::predict(f, path));
  }
}

TEST(Weights, SaveLoadSaveIsByteIdentical) {
  const auto f = small_filter(nn::Architecture::RNN, ModelKind::Switching2D, true);
  const std::string first = io::serialize_filter(f);
  const std::string second = io::serialize_filter(io::deserialize_filter(first));
  EXPECT_EQ(first, second);
}

TEST(Weights, DnnFileListsItsParameterCount) {
  const auto f = small_filter(nn::Architecture::DNN, ModelKind::Linear1D);
  const std::string text = io::serialize_filter(f);
  EXPECT_NE(text.find("\nparameters 381 blocks 12\n"), std::string::npos);
}

TEST(Weights, CorruptedChecksumIsRejected) {
  const auto f = small_filter(nn::Architecture::DNN, ModelKind::Linear1D);
  std::string text = io::serialize_filter(f);
  const auto pos = text.find("block layer1.kernel");
  ASSERT_NE(pos, std::string::npos);
  // Flip one digit of the first weight value.
  auto digit = text.find_first_of("123456789", text.find('\n', pos) + 1);
  text[digit] = text[digit] == '9' ? '8' : static_cast<char>(text[digit] + 1);
  EXPECT_THROW(io::deserialize_filter(text), ChecksumError);

  std::string bad_sum = io::serialize_filter(f);
  bad_sum[bad_sum.size() - 2] = bad_sum[bad_sum.size() - 2] == '0' ? '1' : '0';
  EXPECT_THROW(io::deserialize_filter(bad_sum), ChecksumError);
}

TEST(Weights, VersionMismatchIsRejected) {
  const auto f = small_filter(nn::Architecture::CNN, ModelKind::Linear1D);
  std::string text = io::serialize_filter(f);
  text.replace(0, text.find('\n'), "deepfilter-weights v2");
  EXPECT_THROW(io::deserialize_filter(text), VersionMismatchError);
  EXPECT_THROW(io::deserialize_filter("hello\n"), LoadError);
}

TEST(Weights, ShapeInconsistencyIsRejected) {
  const auto f = small_filter(nn::Architecture::DNN, ModelKind::Linear1D);
  const std::string text = io::serialize_filter(f);
  EXPECT_THROW(io::deserialize_filter(edit_and_reseal(text, "parameters 381 ", "parameters 380 ")), ShapeError);
  EXPECT_THROW(io::deserialize_filter(edit_and_reseal(text, "output_dim 1", "output_dim 2")), ShapeError);
  // Sanity: a reseal without edits still loads.
  EXPECT_NO_THROW(io::deserialize_filter(edit_and_reseal(text, "parameters 381 ", "parameters 381 ")));
}

TEST(Weights, MissingFileIsLoadError) {
  EXPECT_THROW(io::load_weights(temp_file("does_not_exist.weights")), LoadError);
}

TEST(PathSetFile, RoundTripIsExact) {
  for (auto kind : {ModelKind::Linear1D, ModelKind::NonLinear2D, ModelKind::Switching2D}) {
    const auto set = dynamics::generate_dataset(ModelSpec::preset(kind), 5, 60, 31);
    const auto file = temp_file(std::string(dynamics::to_string(kind)) + ".paths");
    dynamics::save_pathset(file, set);
    EXPECT_EQ(dynamics::load_pathset(file), set);
    std::ifstream in(file, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    EXPECT_EQ(std::string(magic, 7), "DFPATHS");
  }
}

TEST(PathSetFile, BadHeadersAreRejected) {
  const auto set = dynamics::generate_dataset(ModelSpec::preset(ModelKind::Linear1D), 2, 20, 1);
  std::ostringstream out;
  dynamics::write_pathset(out, set);
  std::string bytes = out.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream a(bad_magic);
  EXPECT_THROW(dynamics::read_pathset(a), LoadError);

  std::string bad_version = bytes;
  bad_version[8] = 9;
  std::istringstream b(bad_version);
  EXPECT_THROW(dynamics::read_pathset(b), VersionMismatchError);

  std::istringstream c(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(dynamics::read_pathset(c), LoadError);
}

TEST(PathSetFile, CsvExportColumns) {
  const auto set = dynamics::generate_dataset(ModelSpec::preset(ModelKind::Switching2D), 2, 10, 1);
  std::ostringstream out;
  dynamics::write_pathset_csv(out, set);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "seed,n,x_0,x_1,y_0,y_1,alpha");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 22u);
}
