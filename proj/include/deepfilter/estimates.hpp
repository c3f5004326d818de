#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace deepfilter {

/// State estimates for steps first_step .. first_step + count() - 1 of one path,
/// stored row-major with `dim` components per step.
struct EstimateSequence {
  std::size_t first_step = 0;
  std::size_t dim = 1;
  std::vector<double> values;

  std::size_t count() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> at(std::size_t i) const { return {values.data() + i * dim, dim}; }
  bool operator==(const EstimateSequence&) const = default;
};

}  // namespace deepfilter
