#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "photon_da/rng.hpp"
#include "photon_da/types.hpp"

namespace photon_da {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact

/// Discretized emission waveform; samples are unit-normalized intensities
/// per time bin.
struct PulseWaveform {
  std::vector<double> samples;
  double bin_size_ps = 0.0;
};

/// Acquisition settings for one histogram cube.
struct SimConfig {
  std::int64_t t_bins = 1024;  ///< histogram length T
  double delta_ps = 80.0;      ///< bin width in picoseconds
  std::int64_t n_illum = 1;    ///< illuminations per pixel
  double eta = 1.0;            ///< detector efficiency in (0, 1]
  double signal_mean = 2.0;    ///< expected signal photons per pixel
  double noise_mean = 2.0;     ///< expected noise photons per pixel
  std::uint64_t seed = 0;

  void validate() const;

  /// Depth spanned by one bin: delta * c / 2 (round trip).
  double bin_depth_m() const {
    return delta_ps * 1e-12 * kSpeedOfLight / 2.0;
  }
  /// Unambiguous depth range [0, T * delta * c / 2).
  double range_m() const { return bin_depth_m() * static_cast<double>(t_bins); }
};

/// Ground-truth surface: depth in meters plus reflectivity per pixel.
struct SceneSample {
  DepthMap depth;
  std::vector<float> albedo;  // row-major [nx, ny], in [0, 1]
};

/// Expected photon counts per voxel, t-major [T, Nx, Ny].
struct RateCube {
  std::int64_t t_bins = 0, nx = 0, ny = 0;
  std::vector<double> rate;
  /// Fraction of total expected signal photons lost to histogram-edge
  /// clipping of the shifted pulse.
  double clipped_fraction = 0.0;
  SimConfig meta;
};

/// Photon-count histograms, t-major [T, Nx, Ny].
struct HistogramCube {
  std::int64_t t_bins = 0, nx = 0, ny = 0;
  std::vector<std::uint32_t> counts;
  SimConfig meta;
};

/// Gaussian pulse with sigma = fwhm / (2 sqrt(2 ln 2)) bins, centered on an
/// odd support, normalized to sum 1. Rejects supports capturing less than
/// 99.9% of the full discrete mass.
PulseWaveform gaussian_pulse(double fwhm_ps, double delta_ps,
                             int support_bins);

/// (signal_scale, noise_per_bin): signal_scale converts unit relative albedo
/// into expected signal photons once multiplied by n_illum * eta, i.e.
/// signal_scale = signal_mean / (n_illum * eta); noise_per_bin is
/// noise_mean / T spread uniformly.
std::pair<double, double> calibrate_sbr(const PulseWaveform& pulse,
                                        const SimConfig& cfg);

/// Per-voxel Poisson rates: the pulse shifted to each pixel's round-trip
/// time (bin-center sampling, linear interpolation) times the calibrated
/// signal scale and relative albedo a/a_mean, plus uniform noise. Per pixel,
/// sum_t rate = signal_mean * a/a_mean + noise_mean up to edge clipping.
/// A non-empty noise_profile (length T, nonnegative, summing to 1) replaces
/// the uniform noise shape.
RateCube rate_cube(const SceneSample& scene, const PulseWaveform& pulse,
                   const SimConfig& cfg,
                   std::span<const double> noise_profile = {});

/// Draws every voxel independently from Poisson(rate) on a counter-based
/// stream keyed by (seed, voxel index), so results are identical for any
/// parallel schedule.
HistogramCube sample_histogram(const RateCube& rates, std::uint64_t seed);

/// One Poisson draw consuming randomness only from rng.
std::uint32_t poisson_sample(double lambda, PhiloxRng& rng);

/// bin = floor(2 z / (delta c)); rejects depths outside [0, range) with the
/// offending pixel's coordinates.
BinIndexMap quantize_depth(const DepthMap& depth, double delta_ps,
                           std::int64_t t_bins, double c = kSpeedOfLight);

enum class SceneKind { kPlanes, kSteps, kSpheres, kPerlin };

/// Deterministic piecewise-smooth synthetic scene with depths inside
/// [z_min, z_max] and albedo in [0.5, 1].
SceneSample synth_scene(SceneKind kind, std::int64_t nx, std::int64_t ny,
                        double z_min, double z_max, std::uint64_t seed);

}  // namespace photon_da
