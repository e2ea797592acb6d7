#include "photon_da/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "photon_da/errors.hpp"
#include "photon_da/gradcheck.hpp"
#include "photon_da/inference.hpp"
#include "photon_da/rng.hpp"
#include "photon_da/simulator.hpp"

namespace photon_da {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw ValidationError(message);
}

// Seed-stream salts: every derived stream gets its own constant so no two
// consumers of the master seed can collide.
constexpr std::uint64_t kRegimeShuffleSalt = 0x51;
constexpr std::uint64_t kInitSalt = 0xA11;
constexpr std::uint64_t kPretrainSalt = 0xB22;
constexpr std::uint64_t kAdaptSalt = 0xC33;

std::string indexed_name(const char* prefix, std::int64_t k,
                         const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%04lld.%s", prefix,
                static_cast<long long>(k), ext);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail("cannot create directory '" + dir + "': " + ec.message());
}

std::vector<std::string> list_files(const std::string& dir,
                                    const std::string& ext) {
  if (!fs::is_directory(dir)) fail("'" + dir + "' is not a directory");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ext)
      out.push_back(entry.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

/// Round-robin regime assignment shuffled so regimes do not correlate with
/// scene kind (which also cycles by index).
std::vector<std::size_t> shuffled_regimes(std::int64_t count,
                                          std::size_t regimes,
                                          PhiloxRng& rng) {
  std::vector<std::size_t> out(static_cast<std::size_t>(count));
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = k % regimes;
  for (std::size_t k = out.size(); k > 1; --k)
    std::swap(out[k - 1], out[static_cast<std::size_t>(rng.uniform_int(k))]);
  return out;
}

SceneKind kind_for(std::int64_t global_index) {
  constexpr SceneKind kinds[] = {SceneKind::kPlanes, SceneKind::kSteps,
                                 SceneKind::kSpheres, SceneKind::kPerlin};
  return kinds[global_index % 4];
}

json entry_to_json(const ManifestEntry& e, bool labeled) {
  json j{{"cube", e.cube},
         {"seed", e.seed},
         {"signal", e.signal},
         {"noise", e.noise}};
  if (labeled) j["depth"] = e.depth;
  return j;
}

ManifestEntry entry_from_json(const json& j, const std::string& where) {
  ManifestEntry e;
  try {
    e.cube = j.at("cube").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.signal = j.at("signal").get<double>();
    e.noise = j.at("noise").get<double>();
    if (j.contains("depth")) e.depth = j.at("depth").get<std::string>();
  } catch (const json::exception& ex) {
    fail(where + ": malformed manifest entry: " + ex.what());
  }
  return e;
}

void write_resolved_config(const RunConfig& cfg) {
  write_text((fs::path(cfg.out_dir) / "resolved_config.txt").string(),
             render_run_config(cfg));
}

void require_path(const std::string& value, const char* key,
                  const char* verb) {
  if (value.empty())
    fail(std::string(verb) + " requires [paths] " + key +
         " in the configuration");
}

Checkpoint load_model(const std::string& path) {
  Checkpoint ck = read_checkpoint(path);
  ck.net.validate();
  return ck;
}

}  // namespace

// ---------------------------------------------------------------------------
// simulate

DatasetManifest cmd_simulate(const RunConfig& cfg) {
  if (cfg.source_count <= 0)
    fail("dataset source_count must be positive, got " +
         std::to_string(cfg.source_count));
  if (cfg.target_count < 0)
    fail("dataset target_count must be non-negative, got " +
         std::to_string(cfg.target_count));
  if (cfg.source_sbr.empty()) fail("dataset source_sbr holds no regimes");
  if (cfg.target_count > 0 && cfg.target_sbr.empty())
    fail("dataset target_sbr holds no regimes");
  if (!(cfg.z_min >= 0.0) || !(cfg.z_min < cfg.z_max))
    fail("scene depth range [" + std::to_string(cfg.z_min) + ", " +
         std::to_string(cfg.z_max) + ") is not an increasing non-negative "
         "interval");
  if (cfg.z_max >= cfg.sim.range_m())
    fail("scene z_max " + std::to_string(cfg.z_max) +
         " m exceeds the unambiguous range " +
         std::to_string(cfg.sim.range_m()) + " m of " +
         std::to_string(cfg.sim.t_bins) + " bins at " +
         std::to_string(cfg.sim.delta_ps) + " ps");

  const PulseWaveform pulse =
      gaussian_pulse(cfg.pulse_fwhm_ps, cfg.sim.delta_ps, cfg.pulse_support);

  PhiloxRng regime_rng(derive_seed(cfg.seed, kRegimeShuffleSalt), 0);
  const auto src_regime =
      shuffled_regimes(cfg.source_count, cfg.source_sbr.size(), regime_rng);
  const auto tgt_regime =
      cfg.target_count > 0
          ? shuffled_regimes(cfg.target_count, cfg.target_sbr.size(),
                             regime_rng)
          : std::vector<std::size_t>{};

  ensure_dir((fs::path(cfg.out_dir) / "source").string());
  if (cfg.target_count > 0)
    ensure_dir((fs::path(cfg.out_dir) / "target").string());

  DatasetManifest manifest;
  auto make_sample = [&](std::int64_t global, const SbrPoint& sbr) {
    const std::uint64_t scene_seed = derive_seed(cfg.seed, 2 * global);
    const std::uint64_t draw_seed = derive_seed(cfg.seed, 2 * global + 1);
    const SceneSample scene =
        synth_scene(kind_for(global), cfg.scene_nx, cfg.scene_ny, cfg.z_min,
                    cfg.z_max, scene_seed);
    SimConfig sim = cfg.sim;
    sim.signal_mean = sbr.signal;
    sim.noise_mean = sbr.noise;
    sim.seed = draw_seed;
    sim.validate();
    const RateCube rates = rate_cube(scene, pulse, sim);
    return std::pair(sample_histogram(rates, draw_seed), scene.depth);
  };

  for (std::int64_t k = 0; k < cfg.source_count; ++k) {
    const SbrPoint sbr = cfg.source_sbr[src_regime[static_cast<std::size_t>(k)]];
    auto [cube, depth] = make_sample(k, sbr);
    ManifestEntry e;
    e.cube = "source/" + indexed_name("cube", k, "phdc");
    e.depth = "source/" + indexed_name("depth", k, "phdz");
    e.seed = cube.meta.seed;
    e.signal = sbr.signal;
    e.noise = sbr.noise;
    write_cube(cube, (fs::path(cfg.out_dir) / e.cube).string());
    write_depth(depth, (fs::path(cfg.out_dir) / e.depth).string());
    manifest.source.push_back(std::move(e));
  }
  for (std::int64_t k = 0; k < cfg.target_count; ++k) {
    const SbrPoint sbr = cfg.target_sbr[tgt_regime[static_cast<std::size_t>(k)]];
    auto [cube, depth] = make_sample(cfg.source_count + k, sbr);
    (void)depth;  // target samples stay unlabeled on disk
    ManifestEntry e;
    e.cube = "target/" + indexed_name("cube", k, "phdc");
    e.seed = cube.meta.seed;
    e.signal = sbr.signal;
    e.noise = sbr.noise;
    write_cube(cube, (fs::path(cfg.out_dir) / e.cube).string());
    manifest.target.push_back(std::move(e));
  }

  json doc{{"source", json::array()}, {"target", json::array()}};
  for (const auto& e : manifest.source)
    doc["source"].push_back(entry_to_json(e, /*labeled=*/true));
  for (const auto& e : manifest.target)
    doc["target"].push_back(entry_to_json(e, /*labeled=*/false));
  write_text((fs::path(cfg.out_dir) / "manifest.json").string(),
             doc.dump(2) + "\n");
  write_resolved_config(cfg);
  return manifest;
}

DatasetManifest read_manifest(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail("manifest '" + path + "' is not valid JSON: " + e.what());
  }
  DatasetManifest m;
  try {
    for (const json& j : doc.at("source"))
      m.source.push_back(entry_from_json(j, path));
    for (const json& j : doc.at("target"))
      m.target.push_back(entry_from_json(j, path));
  } catch (const json::exception& e) {
    fail("manifest '" + path + "' is missing a sample list: " + e.what());
  }
  for (const auto& e : m.source)
    if (e.depth.empty())
      fail("manifest '" + path + "' lists source cube '" + e.cube +
           "' without a depth file");
  return m;
}

std::vector<LabeledSample> load_source_samples(
    const std::string& dataset_dir) {
  const fs::path root(dataset_dir);
  const DatasetManifest manifest =
      read_manifest((root / "manifest.json").string());
  if (manifest.source.empty())
    fail("dataset '" + dataset_dir + "' holds no source samples");
  std::vector<LabeledSample> samples;
  samples.reserve(manifest.source.size());
  for (const auto& e : manifest.source) {
    LabeledSample s;
    s.cube = read_cube((root / e.cube).string());
    const DepthMap depth = read_depth((root / e.depth).string());
    s.bins = quantize_depth(depth, s.cube.meta.delta_ps, s.cube.t_bins);
    samples.push_back(std::move(s));
  }
  return samples;
}

// ---------------------------------------------------------------------------
// pretrain

TrainResult cmd_pretrain(const RunConfig& cfg) {
  require_path(cfg.dataset_dir, "dataset_dir", "pretrain");
  cfg.net.validate();
  const std::vector<LabeledSample> samples =
      load_source_samples(cfg.dataset_dir);

  const ParameterStore<float> initial =
      init_stin_parameters<float>(cfg.net, derive_seed(cfg.seed, kInitSalt));
  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, kPretrainSalt);

  ensure_dir(cfg.out_dir);
  const CheckpointHook hook = [&](std::int64_t epoch,
                                  const ParameterStore<float>& params) {
    Checkpoint snap{params, cfg.net, cfg.seed};
    write_checkpoint(
        snap,
        (fs::path(cfg.out_dir) / indexed_name("checkpoint_epoch", epoch,
                                              "phck"))
            .string());
  };

  TrainResult result = pretrain(initial, samples, tc, cfg.net, hook);

  write_checkpoint(Checkpoint{result.params, cfg.net, cfg.seed},
                   (fs::path(cfg.out_dir) / "pretrained.phck").string());
  write_text((fs::path(cfg.out_dir) / "pretrain_trace.csv").string(),
             trace_to_csv(result.trace));
  write_resolved_config(cfg);
  return result;
}

// ---------------------------------------------------------------------------
// adapt

TrainResult cmd_adapt(const RunConfig& cfg) {
  require_path(cfg.checkpoint, "checkpoint", "adapt");
  require_path(cfg.dataset_dir, "dataset_dir", "adapt");
  require_path(cfg.target_dir, "target_dir", "adapt");

  const Checkpoint ck = load_model(cfg.checkpoint);
  const std::vector<LabeledSample> source =
      load_source_samples(cfg.dataset_dir);

  // The target regime is unlabeled by definition; a depth file in the
  // target directory means label leakage, not a convenience.
  const auto leaked = list_files(cfg.target_dir, ".phdz");
  if (!leaked.empty())
    fail("target directory '" + cfg.target_dir + "' holds depth file '" +
         leaked.front() + "'; adaptation must not see target labels");
  const auto cube_paths = list_files(cfg.target_dir, ".phdc");
  if (cube_paths.empty())
    fail("target directory '" + cfg.target_dir + "' holds no cube files");

  DomainBatch batch;
  batch.source = source;
  batch.target.reserve(cube_paths.size());
  for (const auto& p : cube_paths) batch.target.push_back(read_cube(p));

  TrainConfig tc = cfg.train;
  tc.seed = derive_seed(cfg.seed, kAdaptSalt);

  ensure_dir(cfg.out_dir);
  TrainResult result = dann_adapt(ck.params, batch, tc, ck.net);

  write_checkpoint(Checkpoint{result.params, ck.net, cfg.seed},
                   (fs::path(cfg.out_dir) / "adapted.phck").string());
  write_text((fs::path(cfg.out_dir) / "adapt_trace.csv").string(),
             trace_to_csv(result.trace));
  write_resolved_config(cfg);
  return result;
}

// ---------------------------------------------------------------------------
// predict

std::vector<std::string> cmd_predict(const RunConfig& cfg) {
  require_path(cfg.checkpoint, "checkpoint", "predict");
  require_path(cfg.input_dir, "input_dir", "predict");

  const Checkpoint ck = load_model(cfg.checkpoint);
  const auto cube_paths = list_files(cfg.input_dir, ".phdc");
  if (cube_paths.empty())
    fail("input directory '" + cfg.input_dir + "' holds no cube files");

  ensure_dir(cfg.out_dir);
  std::vector<std::string> written;
  for (const auto& p : cube_paths) {
    const HistogramCube cube = read_cube(p);
    const DepthMap depth = predict_depth_map(cube, ck.params, ck.net);
    const std::string stem = fs::path(p).stem().string();
    const std::string out =
        (fs::path(cfg.out_dir) / (stem + ".phdz")).string();
    write_depth(depth, out);
    write_graymap(depth, (fs::path(cfg.out_dir) / (stem + ".pgm")).string());
    written.push_back(out);
  }
  write_resolved_config(cfg);
  return written;
}

// ---------------------------------------------------------------------------
// eval

EvalReport cmd_eval(const RunConfig& cfg) {
  require_path(cfg.predictions_dir, "predictions_dir", "eval");
  require_path(cfg.truth_dir, "truth_dir", "eval");

  const auto pred_paths = list_files(cfg.predictions_dir, ".phdz");
  const auto truth_paths = list_files(cfg.truth_dir, ".phdz");
  if (pred_paths.empty())
    fail("predictions directory '" + cfg.predictions_dir +
         "' holds no depth maps");
  if (pred_paths.size() != truth_paths.size())
    fail("predictions ('" + cfg.predictions_dir + "', " +
         std::to_string(pred_paths.size()) + " maps) and truth ('" +
         cfg.truth_dir + "', " + std::to_string(truth_paths.size()) +
         " maps) do not pair up");

  // Pool every pixel of every pair into one flat comparison so the report
  // weighs each pixel equally regardless of how maps are sliced into files.
  DepthMap all_truth, all_pred;
  all_truth.ny = all_pred.ny = 1;
  for (std::size_t k = 0; k < pred_paths.size(); ++k) {
    const DepthMap pred = read_depth(pred_paths[k]);
    const DepthMap truth = read_depth(truth_paths[k]);
    if (pred.nx != truth.nx || pred.ny != truth.ny)
      fail("prediction '" + pred_paths[k] + "' is [" +
           std::to_string(pred.nx) + ", " + std::to_string(pred.ny) +
           "] but truth '" + truth_paths[k] + "' is [" +
           std::to_string(truth.nx) + ", " + std::to_string(truth.ny) + "]");
    all_pred.z.insert(all_pred.z.end(), pred.z.begin(), pred.z.end());
    all_truth.z.insert(all_truth.z.end(), truth.z.begin(), truth.z.end());
  }
  all_pred.nx = static_cast<std::int64_t>(all_pred.z.size());
  all_truth.nx = static_cast<std::int64_t>(all_truth.z.size());

  const EvalReport report = evaluate(all_truth, all_pred);
  ensure_dir(cfg.out_dir);
  write_text((fs::path(cfg.out_dir) / "eval.csv").string(), report.to_csv());
  write_resolved_config(cfg);
  return report;
}

// ---------------------------------------------------------------------------
// gradcheck

bool cmd_gradcheck(std::ostream& out) {
  const std::vector<GradCheckReport> reports = run_gradient_suite();
  bool all_pass = true;
  out << std::left << std::setw(26) << "operation" << std::right
      << std::setw(10) << "instances" << std::setw(14) << "max rel err"
      << "  verdict\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(26) << r.op << std::right << std::setw(10)
        << r.instances << std::setw(14) << std::scientific
        << std::setprecision(3) << r.max_rel_err << std::defaultfloat
        << "  " << (r.pass ? "PASS" : "FAIL") << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass;
}

// ---------------------------------------------------------------------------
// CLI

int run_cli(int argc, char** argv) {
  CLI::App app{
      "photon-da: simulate photon-counting depth data, train the "
      "reconstruction network, adapt it to a new noise regime, and "
      "evaluate predictions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;

  auto add_verb = [&](const char* name, const char* help,
                      bool needs_config) {
    CLI::App* cmd = app.add_subcommand(name, help);
    if (needs_config) {
      cmd->add_option("--config", config_path,
                      "run configuration file (key = value with [sections])")
          ->required();
      cmd->add_option("--seed", seed_override,
                      "override the master seed from the config");
      cmd->add_option("--out", out_override,
                      "override the output directory from the config");
    }
    return cmd;
  };

  CLI::App* simulate =
      add_verb("simulate", "generate labeled source and unlabeled target "
                           "histogram cubes", true);
  CLI::App* pretrain_cmd =
      add_verb("pretrain", "train the network on the labeled source dataset",
               true);
  CLI::App* adapt =
      add_verb("adapt", "domain-adversarial adaptation to unlabeled target "
                        "cubes", true);
  CLI::App* predict =
      add_verb("predict", "reconstruct depth maps for every cube in a "
                          "directory", true);
  CLI::App* eval =
      add_verb("eval", "score predicted depth maps against ground truth",
               true);
  CLI::App* gradcheck = add_verb(
      "gradcheck", "finite-difference check of every gradient operation",
      false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gradcheck->parsed()) return cmd_gradcheck(std::cout) ? 0 : 2;

    RunConfig cfg = load_run_config(config_path);
    if (!app.get_subcommands().empty()) {
      CLI::App* verb = app.get_subcommands().front();
      if (verb->count("--seed") > 0) cfg.seed = seed_override;
      if (verb->count("--out") > 0) cfg.out_dir = out_override;
    }

    if (simulate->parsed()) {
      const DatasetManifest m = cmd_simulate(cfg);
      std::cout << "wrote " << m.source.size() << " labeled source and "
                << m.target.size() << " unlabeled target samples to "
                << cfg.out_dir << "\n";
    } else if (pretrain_cmd->parsed()) {
      const TrainResult r = cmd_pretrain(cfg);
      std::cout << "pretrained for " << r.epoch_loss.size()
                << " epochs (final epoch loss "
                << (r.epoch_loss.empty() ? 0.0 : r.epoch_loss.back())
                << "); wrote " << cfg.out_dir << "/pretrained.phck\n";
    } else if (adapt->parsed()) {
      const TrainResult r = cmd_adapt(cfg);
      std::cout << "adapted for " << r.trace.size()
                << " iterations; wrote " << cfg.out_dir << "/adapted.phck\n";
    } else if (predict->parsed()) {
      const auto written = cmd_predict(cfg);
      std::cout << "wrote " << written.size() << " depth maps to "
                << cfg.out_dir << "\n";
    } else if (eval->parsed()) {
      const EvalReport report = cmd_eval(cfg);
      std::cout << report.to_table() << "wrote " << cfg.out_dir
                << "/eval.csv\n";
    }
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace photon_da
