#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

#include "dfoattack/baselines.hpp"

namespace dfoattack::detail {

/// The coordinates an attack may touch: the mask, or every coordinate.
inline std::vector<std::size_t> active_coordinates(const BaselineConfig& config, std::size_t n) {
  if (!config.active_pixels.empty()) return config.active_pixels;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

}  // namespace dfoattack::detail
