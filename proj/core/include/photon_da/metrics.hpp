#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "photon_da/types.hpp"

namespace photon_da {

/// Quantitative comparison of a predicted depth map against ground truth.
/// Pixels where either map is non-finite are invalid and excluded
/// everywhere; abs_rel additionally excludes (and counts) pixels whose
/// ground truth is not strictly positive.
struct EvalReport {
  double rmse = 0.0;     ///< root mean squared error, meters
  double abs_rel = 0.0;  ///< mean |z - z_hat| / z, unitless
  std::map<double, double> acc;  ///< threshold delta -> fraction in [0,1]
  std::int64_t pixel_count = 0;  ///< valid pixels entering rmse/acc
  std::int64_t abs_rel_skipped = 0;  ///< valid pixels dropped by abs_rel

  /// CSV rendering: one header line and one value line.
  std::string to_csv() const;
  /// Aligned human-readable table.
  std::string to_table() const;
};

/// sqrt(mean (z - z_hat)^2) over valid pixels. Rejects shape mismatches
/// and maps with zero valid pixels.
double rmse(const DepthMap& truth, const DepthMap& pred);

/// mean |z - z_hat| / z over valid pixels with z > 0.
double abs_rel(const DepthMap& truth, const DepthMap& pred);

/// Fraction of valid pixels with max(z/z_hat, z_hat/z) < delta. Requires
/// delta > 1; a non-positive prediction fails the test (ratio +inf).
double accuracy_delta(const DepthMap& truth, const DepthMap& pred,
                      double delta);

/// All metrics at once over the given thresholds (defaults 1.01, 1.01^2).
EvalReport evaluate(const DepthMap& truth, const DepthMap& pred,
                    const std::vector<double>& deltas = {1.01,
                                                         1.01 * 1.01});

}  // namespace photon_da
