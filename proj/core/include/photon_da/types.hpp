#pragma once

#include <cstdint>
#include <vector>

#include "photon_da/errors.hpp"

namespace photon_da {

/// Per-pixel depth in meters, row-major [nx, ny]. Pixels with no valid
/// estimate hold a quiet NaN and are skipped by the metrics.
struct DepthMap {
  std::int64_t nx = 0, ny = 0;
  std::vector<float> z;

  float at(std::int64_t i, std::int64_t j) const {
    return z[static_cast<std::size_t>(i * ny + j)];
  }
  float& at(std::int64_t i, std::int64_t j) {
    return z[static_cast<std::size_t>(i * ny + j)];
  }
  std::int64_t pixels() const { return nx * ny; }
};

/// Per-pixel histogram bin index, row-major [nx, ny].
struct BinIndexMap {
  std::int64_t nx = 0, ny = 0;
  std::vector<std::int32_t> bin;

  std::int32_t at(std::int64_t i, std::int64_t j) const {
    return bin[static_cast<std::size_t>(i * ny + j)];
  }
  std::int32_t& at(std::int64_t i, std::int64_t j) {
    return bin[static_cast<std::size_t>(i * ny + j)];
  }
};

}  // namespace photon_da
