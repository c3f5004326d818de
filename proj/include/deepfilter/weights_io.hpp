#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "deepfilter/pipeline.hpp"

namespace deepfilter::io {

/// Text format, one record per line, doubles at 17 significant digits so the
/// round trip is bit-exact. The last line is an FNV-1a 64 checksum of every
/// preceding byte.
inline constexpr int kWeightsVersion = 1;

std::string format_double(double value);
double parse_double(std::string_view text);

std::string serialize_filter(const pipeline::TrainedFilter& filter);

/// Throws VersionMismatchError, ChecksumError or ShapeError (all LoadError).
pipeline::TrainedFilter deserialize_filter(const std::string& text);

void save_weights(const pipeline::TrainedFilter& filter, const std::filesystem::path& file);
pipeline::TrainedFilter load_weights(const std::filesystem::path& file);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace deepfilter::io
