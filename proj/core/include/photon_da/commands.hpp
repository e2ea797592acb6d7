#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "photon_da/io.hpp"
#include "photon_da/metrics.hpp"
#include "photon_da/trainer.hpp"

namespace photon_da {

// ---------------------------------------------------------------------------
// Command layer: each function is one end-to-end CLI verb operating on a
// resolved RunConfig. Every command creates its output directory, writes the
// resolved configuration it actually ran with (resolved_config.txt), and is
// reproducible from that copy plus the seed: running it twice produces
// byte-identical artifacts. Commands never modify their inputs.
//
// Error model: bad configuration or malformed inputs throw ValidationError;
// numerical failures (divergence, non-finite losses) throw NumericError.
// run_cli maps those to exit codes 1 and 2.

/// One dataset sample as recorded in manifest.json. Paths are relative to
/// the manifest's directory; depth is empty for unlabeled target samples.
struct ManifestEntry {
  std::string cube;
  std::string depth;
  std::uint64_t seed = 0;  ///< photon draw seed (also in the cube metadata)
  double signal = 0.0;     ///< expected signal photons per pixel
  double noise = 0.0;      ///< expected background photons per pixel
};

/// Contents of a simulate run: labeled source samples and unlabeled target
/// samples, in index order.
struct DatasetManifest {
  std::vector<ManifestEntry> source;
  std::vector<ManifestEntry> target;
};

DatasetManifest read_manifest(const std::string& path);

/// Simulates the configured dataset under cfg.out_dir: labeled source
/// cubes (cube_NNNN.phdc + depth_NNNN.phdz under source/), unlabeled target
/// cubes (under target/), manifest.json, and resolved_config.txt. Regimes
/// from source_sbr/target_sbr are spread round-robin over the samples and
/// then shuffled; scene geometry cycles through the synthetic kinds. Every
/// sample's seeds derive from the master seed and its global index, so any
/// sample can be regenerated in isolation.
DatasetManifest cmd_simulate(const RunConfig& cfg);

/// Loads the labeled source samples from cfg.dataset_dir (a cmd_simulate
/// output directory) and returns them ready for training; bin labels come
/// from quantizing each depth map at its cube's bin width.
std::vector<LabeledSample> load_source_samples(const std::string& dataset_dir);

/// Supervised pretraining on the source dataset. Writes pretrained.phck,
/// pretrain_trace.csv, optional checkpoint_epoch_NNNN.phck snapshots, and
/// resolved_config.txt under cfg.out_dir. Returns the training result.
TrainResult cmd_pretrain(const RunConfig& cfg);

/// Domain-adversarial adaptation: starts from cfg.checkpoint (whose stored
/// network geometry is authoritative), pairs the labeled source dataset
/// with the unlabeled cubes in cfg.target_dir, and writes adapted.phck,
/// adapt_trace.csv, and resolved_config.txt under cfg.out_dir. Refuses a
/// target directory containing depth files: adaptation must never see
/// target labels.
TrainResult cmd_adapt(const RunConfig& cfg);

/// Runs inference with cfg.checkpoint on every cube in cfg.input_dir and
/// writes <stem>.phdz plus a 16-bit graymap <stem>.pgm per cube under
/// cfg.out_dir. Returns the written depth-map paths in input order.
std::vector<std::string> cmd_predict(const RunConfig& cfg);

/// Compares predictions against ground truth: the sorted .phdz lists of
/// cfg.predictions_dir and cfg.truth_dir are paired in order, all pixels
/// pooled, and one report computed and written to cfg.out_dir/eval.csv.
EvalReport cmd_eval(const RunConfig& cfg);

/// Runs the finite-difference gradient suite and prints one table row per
/// operation to `out`. Returns true when every operation passes.
bool cmd_gradcheck(std::ostream& out);

/// Parses `photon-da <verb> --config FILE [--seed N] [--out DIR]` and
/// dispatches. Returns the process exit code: 0 success, 1 validation or
/// usage error, 2 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace photon_da
