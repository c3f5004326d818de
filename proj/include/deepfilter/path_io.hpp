#pragma once

#include <filesystem>
#include <iosfwd>

#include "deepfilter/dynamics.hpp"

namespace deepfilter::dynamics {

/// Binary PathSet layout (little-endian):
///   16-byte header: "DFPATHS\0", u32 version, u32 reserved (0)
///   model descriptor: u32 kind, f64 eta/sigma/sigma0, matrices F, G, H, x0, Q
///     as (u32 rows, u32 cols, f64 data row-major), u32 regime count + f64 values
///   u64 n_paths, u64 horizon, u32 state_dim, u32 obs_dim
///   per path: u64 seed, states, observations, regimes (switching kinds only)
inline constexpr std::uint32_t kPathSetVersion = 1;

void write_pathset(std::ostream& out, const PathSet& set);
PathSet read_pathset(std::istream& in);

void save_pathset(const std::filesystem::path& file, const PathSet& set);
PathSet load_pathset(const std::filesystem::path& file);

/// Debug export: seed,n,x_0..x_{m1-1},y_0..y_{m2-1},alpha
void write_pathset_csv(std::ostream& out, const PathSet& set);

}  // namespace deepfilter::dynamics
