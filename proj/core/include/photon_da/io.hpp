#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "photon_da/metrics.hpp"
#include "photon_da/simulator.hpp"
#include "photon_da/stin.hpp"
#include "photon_da/trainer.hpp"
#include "photon_da/types.hpp"

namespace photon_da {

// ---------------------------------------------------------------------------
// Binary artifact formats. All integers are little-endian regardless of the
// host. Every file is a fixed header followed by a body; any shortfall in
// the body is reported as a "truncated payload" error, extra bytes as
// trailing garbage. Writers create the file atomically (temp + rename).
//
// Cube file (.phdc):  "PHDC", version u16, T/Nx/Ny u32, dtype tag u16
//   (0 = u16 counts, 1 = u32 counts), counts (t-major, then row-major
//   pixels), u32 metadata length, metadata JSON (simulation snapshot, seed,
//   and an optional creation timestamp).
// Depth file (.phdz): "PHDZ", version u16, Nx/Ny u32, float32 row-major
//   payload (NaN marks empty pixels), u32 metadata length, metadata JSON.
// Checkpoint (.phck): "PHCK", version u16, u32 header-JSON length, JSON
//   (network geometry, training seed, parameter manifest in storage order,
//   optional creation timestamp), float32 parameter blobs in that order.
//
// The `created` argument is an optional ISO-8601 stamp stored in the
// metadata. The default (empty) omits it, which keeps artifacts bit-exactly
// reproducible from their inputs; pass a stamp only where that trumps
// reproducibility.

/// Writes `cube` (header + counts + metadata). Counts are stored as u16
/// unless wide_counts is set; a count above 65535 with narrow storage is
/// rejected with a pointer at the wide option.
void write_cube(const HistogramCube& cube, const std::string& path,
                bool wide_counts = false, const std::string& created = "");

/// Reads a cube file back; the result compares bitwise equal to what was
/// written (counts and simulation metadata alike).
HistogramCube read_cube(const std::string& path);

/// Writes a depth map as float32, preserving every bit including NaNs.
void write_depth(const DepthMap& depth, const std::string& path,
                 const std::string& created = "");

DepthMap read_depth(const std::string& path);

/// A trained parameter store with everything needed to resume or infer:
/// the network geometry and the seed state of the training stream.
struct Checkpoint {
  ParameterStore<float> params;
  StinConfig net;
  std::uint64_t seed = 0;
};

void write_checkpoint(const Checkpoint& ck, const std::string& path,
                      const std::string& created = "");

Checkpoint read_checkpoint(const std::string& path);

/// Loads a plain-text sample profile (pulse waveform or noise shape): one
/// non-negative sample per line, blank lines and '#' comments ignored.
/// The result is normalized to sum 1; an all-zero or malformed file is
/// rejected.
std::vector<double> read_profile(const std::string& path);

/// Exports a depth map as a 16-bit binary PGM (min-max scaled to 0..65535,
/// non-finite pixels to 0) plus a "<path>.minmax.txt" sidecar holding the
/// scaling range so readers can invert it.
void write_graymap(const DepthMap& depth, const std::string& path);

/// Whole-file text helpers with the same discipline as the binary writers:
/// write_text lands atomically (temp + rename), read_text rejects missing
/// files with a ValidationError naming the path.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

// ---------------------------------------------------------------------------
// Run configuration: a line-oriented "key = value" file with [section]
// headers, '#'/';' comments, and strict key checking (unknown or duplicate
// keys are rejected). Every command writes back the resolved configuration
// it actually ran with, so a run is reproducible from that copy alone.

/// One simulated regime: expected signal photons per pixel and expected
/// background photons per pixel (an "s:n" pair in config files).
struct SbrPoint {
  double signal = 2.0;
  double noise = 2.0;
};

struct RunConfig {
  // [sim] — observation model and pulse.
  SimConfig sim;
  double pulse_fwhm_ps = 400.0;
  int pulse_support = 21;

  // [scene] — synthetic geometry.
  std::int64_t scene_nx = 16;
  std::int64_t scene_ny = 16;
  double z_min = 0.2;
  double z_max = 1.3;

  // [dataset] — regime mixtures and sample counts for simulate.
  std::vector<SbrPoint> source_sbr = {{2.0, 2.0}, {5.0, 2.0}, {10.0, 2.0}};
  std::vector<SbrPoint> target_sbr = {{2.0, 50.0}, {2.0, 100.0}};
  std::int64_t source_count = 8;
  std::int64_t target_count = 4;

  // [net] — reconstruction network geometry (t_bins mirrors [sim]).
  StinConfig net = StinConfig::desk_scale();

  // [train] — optimization schedule (the seed is derived from [run] seed).
  TrainConfig train;

  // [run] — master seed and output directory.
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  // [paths] — command inputs.
  std::string dataset_dir;      ///< simulate output consumed by training
  std::string target_dir;       ///< unlabeled cubes for adaptation
  std::string checkpoint;       ///< model input for adapt/predict
  std::string input_dir;        ///< cubes to predict on
  std::string predictions_dir;  ///< predicted depth maps for eval
  std::string truth_dir;        ///< ground-truth depth maps for eval
};

/// Parses config text; unknown keys, duplicate keys, keys outside a
/// section, and malformed values are rejected with line numbers. Derived
/// network geometry is resolved (net.t_bins follows sim.t_bins).
RunConfig parse_run_config(const std::string& text);

/// parse_run_config over the contents of `path`.
RunConfig load_run_config(const std::string& path);

/// Canonical full dump of a configuration; parsing it back yields the same
/// configuration (doubles are rendered with round-trip precision).
std::string render_run_config(const RunConfig& cfg);

}  // namespace photon_da
