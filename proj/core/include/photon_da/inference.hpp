#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "photon_da/simulator.hpp"
#include "photon_da/stin.hpp"
#include "photon_da/tensor.hpp"
#include "photon_da/types.hpp"

namespace photon_da {

/// Differentiable depth read-out of a per-pixel temporal distribution:
/// z_{i,j} = (delta * c / 2) * sum_k k * h_{k,i,j} with 0-based bin index
/// k. Input is [1,T,H,W] or [B,1,T,H,W]; output [H,W] or [B,H,W]. Every
/// pixel's distribution must sum to 1 within 1e-4 or the call is rejected.
template <typename S>
Tensor<S> softargmax_depth(GradientTape<S>& tape, const Tensor<S>& h_hat,
                           double delta_ps, double c = kSpeedOfLight);

/// Copies a depth tensor [H,W] (or [1,H,W] / [1,1,H,W]) into a DepthMap.
DepthMap to_depth_map(const Tensor<float>& z);

/// Classical per-pixel decoder: scans every integer bin shift of the pulse
/// and keeps the shift maximizing the Poisson log-likelihood
///   sum_t h_t * log(A * p(t - s) + n) - sum_t (A * p(t - s) + n),
/// where n is the known per-bin noise rate and the signal amplitude is
/// estimated as A = max(total_counts - T*n, tiny). Returns the shift's
/// depth s * delta * c / 2; pixels with no photons at all get a quiet-NaN
/// sentinel (excluded by the metrics). Ties keep the smallest shift.
DepthMap mle_depth(const HistogramCube& h, const PulseWaveform& pulse,
                   double noise_per_bin, double delta_ps,
                   double c = kSpeedOfLight);

/// Decomposition of an [nx, ny] image into fixed-size patches. Interior
/// patches tile the image exactly; when a dimension is not divisible by
/// the patch size, the leftover edge patch is reflect-padded (mirror
/// without repeating the edge row) up to full patch size on input and
/// cropped back to `rows x cols` on output, so every output pixel is
/// written exactly once.
struct TilePlan {
  struct Tile {
    std::int64_t oi = 0, oj = 0;  ///< origin of the kept region
    std::int64_t rows = 0, cols = 0;  ///< kept extent (== patch unless edge)
  };
  std::int64_t nx = 0, ny = 0;
  std::int64_t patch_h = 0, patch_w = 0;
  std::vector<Tile> tiles;
};

/// Regular grid of patch origins covering [0,nx) x [0,ny). Requires
/// 1 <= patch <= image extent on each axis.
TilePlan make_tile_plan(std::int64_t nx, std::int64_t ny,
                        std::int64_t patch_h, std::int64_t patch_w);

/// Per-patch depth predictor: [1, T, patch_h, patch_w] float counts in,
/// [patch_h, patch_w] depths out.
using PatchPredictor = std::function<Tensor<float>(const Tensor<float>&)>;

/// Runs `predict` on every patch of the plan (edge patches reflect-padded)
/// and stitches the cropped results into one full-size depth map. Patches
/// are independent; the result does not depend on evaluation order.
DepthMap tile_and_stitch(const HistogramCube& cube, const TilePlan& plan,
                         const PatchPredictor& predict);

/// Network inference over a full cube: tiles with the config's patch size,
/// runs the forward pass per patch without recording gradients, and decodes
/// depths with softargmax_depth at the cube's bin width.
DepthMap predict_depth_map(const HistogramCube& cube,
                           const ParameterStore<float>& params,
                           const StinConfig& cfg);

}  // namespace photon_da
