// File formats, text loaders, and run-configuration parsing: every artifact
// must round trip bitwise, regenerate byte-identically from the same inputs,
// and reject corrupt or malformed files with errors that name the problem.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "photon_da/errors.hpp"
#include "photon_da/io.hpp"
#include "photon_da/stin.hpp"

using namespace photon_da;

namespace {

std::filesystem::path test_dir() {
  static const std::filesystem::path dir = [] {
    auto d = std::filesystem::temp_directory_path() / "photon_da_io_tests";
    std::filesystem::remove_all(d);
    std::filesystem::create_directories(d);
    return d;
  }();
  return dir;
}

std::string path_in(const std::string& name) {
  return (test_dir() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  REQUIRE(out.good());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t u32_at(const std::string& bytes, std::size_t off) {
  REQUIRE(off + 4 <= bytes.size());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + off;
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

HistogramCube make_cube(std::int64_t t, std::int64_t nx, std::int64_t ny,
                        std::uint32_t modulus) {
  HistogramCube cube;
  cube.t_bins = t;
  cube.nx = nx;
  cube.ny = ny;
  cube.counts.resize(static_cast<std::size_t>(t * nx * ny));
  for (std::size_t k = 0; k < cube.counts.size(); ++k)
    cube.counts[k] =
        static_cast<std::uint32_t>((k * 2654435761u) % modulus);
  cube.meta.t_bins = t;
  cube.meta.delta_ps = 40.0;
  cube.meta.n_illum = 3;
  cube.meta.eta = 0.75;
  cube.meta.signal_mean = 2.5;
  cube.meta.noise_mean = 7.25;
  cube.meta.seed = 0xabcdef12u;
  return cube;
}

}  // namespace

TEST_CASE("cube files round trip bitwise and regenerate byte-identically") {
  const HistogramCube cube = make_cube(128, 16, 16, 1000);
  const std::string path = path_in("cube_roundtrip.phdc");
  write_cube(cube, path);

  const HistogramCube back = read_cube(path);
  CHECK(back.t_bins == cube.t_bins);
  CHECK(back.nx == cube.nx);
  CHECK(back.ny == cube.ny);
  REQUIRE(back.counts.size() == cube.counts.size());
  CHECK(std::memcmp(back.counts.data(), cube.counts.data(),
                    cube.counts.size() * sizeof(std::uint32_t)) == 0);
  CHECK(back.meta.t_bins == cube.meta.t_bins);
  CHECK(back.meta.delta_ps == cube.meta.delta_ps);
  CHECK(back.meta.n_illum == cube.meta.n_illum);
  CHECK(back.meta.eta == cube.meta.eta);
  CHECK(back.meta.signal_mean == cube.meta.signal_mean);
  CHECK(back.meta.noise_mean == cube.meta.noise_mean);
  CHECK(back.meta.seed == cube.meta.seed);

  // Writing the same cube again produces the identical byte stream, so
  // regenerated datasets can be compared by file hash.
  const std::string again = path_in("cube_roundtrip2.phdc");
  write_cube(cube, again);
  CHECK(slurp(path) == slurp(again));

  // A timestamp is opt-in precisely because it breaks that identity.
  const std::string stamped = path_in("cube_stamped.phdc");
  write_cube(cube, stamped, false, "2026-08-16T00:00:00Z");
  const std::string stamped_bytes = slurp(stamped);
  CHECK(stamped_bytes != slurp(path));
  CHECK(stamped_bytes.find("\"created\"") != std::string::npos);
  CHECK(slurp(path).find("\"created\"") == std::string::npos);
  const HistogramCube from_stamped = read_cube(stamped);
  CHECK(from_stamped.counts == cube.counts);
}

TEST_CASE("cube counts are little-endian and t-major at fixed offsets") {
  HistogramCube cube = make_cube(1, 1, 2, 1000);
  cube.counts = {258u, 1u};  // 0x0102 and 0x0001
  const std::string path = path_in("cube_le.phdc");
  write_cube(cube, path);
  const std::string bytes = slurp(path);

  // Fixed header: magic(4) version(2) T(4) Nx(4) Ny(4) dtype(2) = 20 bytes.
  CHECK(bytes.substr(0, 4) == "PHDC");
  CHECK(u32_at(bytes, 6) == 1u);   // T
  CHECK(u32_at(bytes, 10) == 1u);  // Nx
  CHECK(u32_at(bytes, 14) == 2u);  // Ny
  CHECK(static_cast<unsigned char>(bytes[18]) == 0);  // narrow counts
  CHECK(static_cast<unsigned char>(bytes[20]) == 0x02);
  CHECK(static_cast<unsigned char>(bytes[21]) == 0x01);
  CHECK(static_cast<unsigned char>(bytes[22]) == 0x01);
  CHECK(static_cast<unsigned char>(bytes[23]) == 0x00);
}

TEST_CASE("narrow cube layout: 1024x32x32 counts occupy exactly 2 MiB") {
  const HistogramCube cube = make_cube(1024, 32, 32, 1000);
  const std::string path = path_in("cube_layout.phdc");
  write_cube(cube, path);
  const std::string bytes = slurp(path);

  // 1024 * 32 * 32 voxels at two bytes each, right after the 20-byte header.
  const std::size_t counts_bytes = 1024u * 32u * 32u * 2u;
  CHECK(counts_bytes == 2097152u);
  const std::uint32_t json_len = u32_at(bytes, 20 + counts_bytes);
  CHECK(bytes.size() == 20 + counts_bytes + 4 + json_len);

  const HistogramCube back = read_cube(path);
  CHECK(back.counts == cube.counts);
}

TEST_CASE("wide counts store u32 values; narrow storage rejects overflow") {
  HistogramCube cube = make_cube(4, 3, 3, 100000);
  cube.counts[7] = 70000u;  // needs more than 16 bits
  const std::string wide = path_in("cube_wide.phdc");
  write_cube(cube, wide, /*wide_counts=*/true);
  const HistogramCube back = read_cube(wide);
  CHECK(back.counts == cube.counts);
  CHECK(slurp(wide).size() ==
        20 + cube.counts.size() * 4 + 4 +
            static_cast<std::size_t>(
                u32_at(slurp(wide), 20 + cube.counts.size() * 4)));

  CHECK_THROWS_WITH_AS(write_cube(cube, path_in("cube_overflow.phdc")),
                       doctest::Contains("wide_counts"), ValidationError);
}

TEST_CASE("corrupt cube files fail with errors naming the defect") {
  const HistogramCube cube = make_cube(8, 4, 4, 1000);
  const std::string path = path_in("cube_corrupt_base.phdc");
  write_cube(cube, path);
  const std::string good = slurp(path);

  auto mutate = [&](const std::string& name, auto&& edit) {
    std::string bytes = good;
    edit(bytes);
    const std::string p = path_in(name);
    spit(p, bytes);
    return p;
  };

  SUBCASE("bad magic") {
    const auto p = mutate("bad_magic.phdc", [](std::string& b) { b[0] = 'Q'; });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("bad magic"),
                         ValidationError);
  }
  SUBCASE("unsupported version") {
    const auto p =
        mutate("bad_version.phdc", [](std::string& b) { b[4] = 9; });
    CHECK_THROWS_WITH_AS(read_cube(p),
                         doctest::Contains("unsupported version 9"),
                         ValidationError);
  }
  SUBCASE("one missing byte at the tail is a truncated payload") {
    const auto p = mutate("trunc_tail.phdc",
                          [](std::string& b) { b.pop_back(); });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("truncated payload"),
                         ValidationError);
  }
  SUBCASE("cut inside the counts block is a truncated payload") {
    const auto p = mutate("trunc_counts.phdc",
                          [](std::string& b) { b.resize(20 + 10); });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("truncated payload"),
                         ValidationError);
  }
  SUBCASE("extra bytes after the metadata are trailing garbage") {
    const auto p = mutate("trailing.phdc",
                          [](std::string& b) { b.push_back('x'); });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("trailing"),
                         ValidationError);
  }
  SUBCASE("zero dimension in the header") {
    const auto p = mutate("zero_dim.phdc", [](std::string& b) {
      b[6] = b[7] = b[8] = b[9] = 0;  // T = 0
    });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("dimension is zero"),
                         ValidationError);
  }
  SUBCASE("unknown count dtype tag") {
    const auto p =
        mutate("bad_tag.phdc", [](std::string& b) { b[18] = 7; });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("dtype tag 7"),
                         ValidationError);
  }
  SUBCASE("huge claimed dimensions cannot wrap the size check") {
    const auto p = mutate("huge_dims.phdc", [](std::string& b) {
      for (int k = 6; k < 18; ++k) b[k] = static_cast<char>(0xff);
    });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("truncated payload"),
                         ValidationError);
  }
  SUBCASE("metadata disagreeing with the header is rejected") {
    const auto p = mutate("meta_mismatch.phdc", [](std::string& b) {
      const auto at = b.find("\"t_bins\":8");
      REQUIRE(at != std::string::npos);
      b[at + std::string("\"t_bins\":").size()] = '9';
    });
    CHECK_THROWS_WITH_AS(read_cube(p), doctest::Contains("disagrees"),
                         ValidationError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(read_cube(path_in("does_not_exist.phdc")),
                         doctest::Contains("cannot open"), ValidationError);
  }
  SUBCASE("size mismatch between counts and dims is rejected on write") {
    HistogramCube bad = cube;
    bad.counts.pop_back();
    CHECK_THROWS_AS(write_cube(bad, path_in("bad_size.phdc")),
                    ValidationError);
  }
}

TEST_CASE("depth maps round trip float bits including NaN") {
  DepthMap depth;
  depth.nx = 2;
  depth.ny = 3;
  depth.z = {0.25f, -1.5f, std::numeric_limits<float>::quiet_NaN(),
             3.0e-12f, 1.0f / 3.0f, 1250.75f};
  const std::string path = path_in("depth_roundtrip.phdz");
  write_depth(depth, path);
  const DepthMap back = read_depth(path);
  CHECK(back.nx == depth.nx);
  CHECK(back.ny == depth.ny);
  REQUIRE(back.z.size() == depth.z.size());
  CHECK(std::memcmp(back.z.data(), depth.z.data(),
                    depth.z.size() * sizeof(float)) == 0);

  const std::string again = path_in("depth_roundtrip2.phdz");
  write_depth(depth, again);
  CHECK(slurp(path) == slurp(again));

  SUBCASE("header and truncation discipline match the cube format") {
    std::string bytes = slurp(path);
    CHECK(bytes.substr(0, 4) == "PHDZ");
    bytes.pop_back();
    const std::string p = path_in("depth_trunc.phdz");
    spit(p, bytes);
    CHECK_THROWS_WITH_AS(read_depth(p), doctest::Contains("truncated payload"),
                         ValidationError);
  }
  SUBCASE("wrong magic is rejected") {
    CHECK_THROWS_WITH_AS(read_depth(path_in("cube_roundtrip.phdc")),
                         doctest::Contains("bad magic"), ValidationError);
  }
}

TEST_CASE("checkpoints preserve parameter order, bits, geometry, and seed") {
  StinConfig net = StinConfig::desk_scale();
  net.patch = {4, 4};
  net = net.with_derived();
  Checkpoint ck;
  ck.net = net;
  ck.seed = 0x5eed0123456789abull;
  ck.params = init_stin_parameters<float>(net, 77);

  const std::string path = path_in("model.phck");
  write_checkpoint(ck, path);
  const Checkpoint back = read_checkpoint(path);

  CHECK(back.seed == ck.seed);
  CHECK(back.net.t_bins == net.t_bins);
  CHECK(back.net.n_t == net.n_t);
  CHECK(back.net.n_s == net.n_s);
  CHECK(back.net.trunk_channels == net.trunk_channels);
  CHECK(back.net.pools == net.pools);
  CHECK(back.net.patch == net.patch);
  // Derived geometry is recomputed on load, not trusted from the file.
  CHECK(back.net.head_flatten == net.head_flatten);

  REQUIRE(back.params.order == ck.params.order);
  for (const auto& p : ck.params.order) {
    const auto& a = ck.params.at(p);
    const auto& b = back.params.at(p);
    REQUIRE(b.shape() == a.shape());
    CHECK(std::memcmp(b.values().data(), a.values().data(),
                      static_cast<std::size_t>(a.size()) * sizeof(float)) ==
          0);
    CHECK(b.requires_grad());  // loaded models must be trainable
  }

  const std::string again = path_in("model2.phck");
  write_checkpoint(ck, again);
  CHECK(slurp(path) == slurp(again));

  SUBCASE("truncated blob region") {
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() - 3);
    const std::string p = path_in("model_trunc.phck");
    spit(p, bytes);
    CHECK_THROWS_WITH_AS(read_checkpoint(p),
                         doctest::Contains("truncated payload"),
                         ValidationError);
  }
  SUBCASE("trailing garbage after the blobs") {
    std::string bytes = slurp(path);
    bytes += "zz";
    const std::string p = path_in("model_trail.phck");
    spit(p, bytes);
    CHECK_THROWS_WITH_AS(read_checkpoint(p), doctest::Contains("trailing"),
                         ValidationError);
  }
}

TEST_CASE("profile loader normalizes text samples and rejects bad input") {
  const std::string path = path_in("pulse.txt");
  spit(path,
       "# instrument response\n"
       "0.5\n"
       "\n"
       "  1.5  ; inline comment\n"
       "2.0\n");
  const std::vector<double> prof = read_profile(path);
  REQUIRE(prof.size() == 3);
  CHECK(prof[0] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(prof[1] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(prof[2] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(prof[0] + prof[1] + prof[2] == doctest::Approx(1.0).epsilon(1e-15));

  SUBCASE("negative sample") {
    const std::string p = path_in("neg.txt");
    spit(p, "1.0\n-0.25\n");
    CHECK_THROWS_WITH_AS(read_profile(p), doctest::Contains("negative"),
                         ValidationError);
  }
  SUBCASE("non-numeric line") {
    const std::string p = path_in("text.txt");
    spit(p, "1.0\nbroad\n");
    CHECK_THROWS_WITH_AS(read_profile(p), doctest::Contains("line 2"),
                         ValidationError);
  }
  SUBCASE("comment-only file holds no samples") {
    const std::string p = path_in("empty.txt");
    spit(p, "# nothing\n\n");
    CHECK_THROWS_WITH_AS(read_profile(p), doctest::Contains("no samples"),
                         ValidationError);
  }
  SUBCASE("all-zero profile cannot be normalized") {
    const std::string p = path_in("zeros.txt");
    spit(p, "0\n0\n0\n");
    CHECK_THROWS_WITH_AS(read_profile(p), doctest::Contains("sums to zero"),
                         ValidationError);
  }
  SUBCASE("two samples on one line") {
    const std::string p = path_in("pair.txt");
    spit(p, "1.0 2.0\n");
    CHECK_THROWS_WITH_AS(read_profile(p), doctest::Contains("one sample"),
                         ValidationError);
  }
}

TEST_CASE("graymap export scales min-max into 16-bit PGM plus a sidecar") {
  DepthMap depth;
  depth.nx = 2;
  depth.ny = 3;
  depth.z = {0.0f, 0.5f, 1.0f, std::numeric_limits<float>::quiet_NaN(),
             0.25f, 0.75f};
  const std::string path = path_in("depth.pgm");
  write_graymap(depth, path);
  const std::string bytes = slurp(path);

  const std::string header = "P5\n3 2\n65535\n";
  REQUIRE(bytes.size() == header.size() + 6 * 2);
  CHECK(bytes.substr(0, header.size()) == header);
  auto sample = [&](int k) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) +
                    header.size() + 2 * k;
    return static_cast<int>((p[0] << 8) | p[1]);  // big-endian per PGM
  };
  CHECK(sample(0) == 0);
  CHECK(sample(1) == 32768);  // round(0.5 * 65535)
  CHECK(sample(2) == 65535);
  CHECK(sample(3) == 0);  // NaN maps to black
  CHECK(sample(4) == 16384);
  CHECK(sample(5) == 49151);

  const std::string sidecar = slurp(path + ".minmax.txt");
  CHECK(sidecar == "min 0\nmax 1\n");

  SUBCASE("constant map is all black with equal bounds") {
    DepthMap flat;
    flat.nx = flat.ny = 2;
    flat.z = {2.5f, 2.5f, 2.5f, 2.5f};
    const std::string p = path_in("flat.pgm");
    write_graymap(flat, p);
    const std::string b = slurp(p);
    const std::string h = "P5\n2 2\n65535\n";
    REQUIRE(b.size() == h.size() + 8);
    for (std::size_t k = h.size(); k < b.size(); ++k) CHECK(b[k] == 0);
    CHECK(slurp(p + ".minmax.txt") == "min 2.5\nmax 2.5\n");
  }
}

TEST_CASE("run config: defaults, full parse, and render fixed point") {
  const RunConfig def;
  CHECK(def.sim.t_bins == 1024);
  CHECK(def.source_sbr.size() == 3);
  CHECK(def.target_sbr.size() == 2);

  const std::string text =
      "# run description\n"
      "[sim]\n"
      "t_bins = 128\n"
      "delta_ps = 40\n"
      "n_illum = 2\n"
      "eta = 0.8\n"
      "pulse_fwhm_ps = 160\n"
      "pulse_support = 7\n"
      "[scene]\n"
      "nx = 8\n"
      "ny = 12  ; columns\n"
      "z_min = 0.3\n"
      "z_max = 1.1\n"
      "[dataset]\n"
      "source_sbr = 2:2, 5:2, 10:2\n"
      "target_sbr = 2:50, 2:100\n"
      "source_count = 6\n"
      "target_count = 4\n"
      "[net]\n"
      "n_t = 5\n"
      "n_s = 3\n"
      "trunk_channels = 4, 8\n"
      "pools = 1\n"
      "patch_h = 4\n"
      "patch_w = 4\n"
      "[train]\n"
      "epochs = 3\n"
      "batch_size = 2\n"
      "lr = 0.002\n"
      "lambda_tv = 0.0001\n"
      "lambda_a = 0.25\n"
      "checkpoint_every = 2\n"
      "max_adapt_iters = 17\n"
      "[run]\n"
      "seed = 99\n"
      "out_dir = runs/demo\n"
      "[paths]\n"
      "dataset_dir = data/source\n"
      "checkpoint = runs/demo/pretrained.phck\n";
  const RunConfig cfg = parse_run_config(text);

  CHECK(cfg.sim.t_bins == 128);
  CHECK(cfg.sim.delta_ps == 40.0);
  CHECK(cfg.sim.n_illum == 2);
  CHECK(cfg.sim.eta == 0.8);
  CHECK(cfg.pulse_fwhm_ps == 160.0);
  CHECK(cfg.pulse_support == 7);
  CHECK(cfg.scene_nx == 8);
  CHECK(cfg.scene_ny == 12);
  CHECK(cfg.z_min == 0.3);
  CHECK(cfg.z_max == 1.1);
  REQUIRE(cfg.source_sbr.size() == 3);
  CHECK(cfg.source_sbr[1].signal == 5.0);
  CHECK(cfg.source_sbr[1].noise == 2.0);
  REQUIRE(cfg.target_sbr.size() == 2);
  CHECK(cfg.target_sbr[1].noise == 100.0);
  CHECK(cfg.source_count == 6);
  CHECK(cfg.target_count == 4);
  CHECK(cfg.net.n_t == 5);
  CHECK(cfg.net.trunk_channels == std::vector<int>{4, 8});
  CHECK(cfg.net.patch == std::array<std::int64_t, 2>{4, 4});
  CHECK(cfg.net.t_bins == 128);  // mirrors [sim] t_bins
  CHECK(cfg.net.head_flatten > 0);  // derived geometry resolved
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.train.batch_size == 2);
  CHECK(cfg.train.lr == 0.002);
  CHECK(cfg.train.lambda_tv == 0.0001);
  CHECK(cfg.train.lambda_a == 0.25);
  CHECK(cfg.train.checkpoint_every == 2);
  CHECK(cfg.train.max_adapt_iters == 17);
  CHECK(cfg.seed == 99);
  CHECK(cfg.out_dir == "runs/demo");
  CHECK(cfg.dataset_dir == "data/source");
  CHECK(cfg.checkpoint == "runs/demo/pretrained.phck");

  // render -> parse -> render is a fixed point, so the resolved copy a
  // command writes reproduces the run exactly.
  const std::string rendered = render_run_config(cfg);
  const RunConfig reparsed = parse_run_config(rendered);
  CHECK(render_run_config(reparsed) == rendered);
  CHECK(parse_run_config(render_run_config(def)).sim.t_bins == def.sim.t_bins);
}

TEST_CASE("run config rejects malformed input with line numbers") {
  SUBCASE("unknown section") {
    CHECK_THROWS_WITH_AS(parse_run_config("[nope]\n"),
                         doctest::Contains("unknown section"),
                         ValidationError);
  }
  SUBCASE("unknown key names its section and line") {
    CHECK_THROWS_WITH_AS(parse_run_config("[sim]\nbogus = 1\n"),
                         doctest::Contains("line 2"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_run_config("[sim]\nbogus = 1\n"),
                         doctest::Contains("unknown key 'bogus'"),
                         ValidationError);
  }
  SUBCASE("key valid in another section is still rejected") {
    CHECK_THROWS_WITH_AS(parse_run_config("[sim]\nepochs = 3\n"),
                         doctest::Contains("unknown key 'epochs'"),
                         ValidationError);
  }
  SUBCASE("duplicate key") {
    CHECK_THROWS_WITH_AS(
        parse_run_config("[sim]\nt_bins = 4\nt_bins = 8\n"),
        doctest::Contains("duplicate key 't_bins'"), ValidationError);
  }
  SUBCASE("key before any section") {
    CHECK_THROWS_WITH_AS(parse_run_config("t_bins = 4\n"),
                         doctest::Contains("before any"), ValidationError);
  }
  SUBCASE("missing equals sign") {
    CHECK_THROWS_WITH_AS(parse_run_config("[sim]\nt_bins 4\n"),
                         doctest::Contains("key = value"), ValidationError);
  }
  SUBCASE("unterminated section header") {
    CHECK_THROWS_WITH_AS(parse_run_config("[sim\n"),
                         doctest::Contains("malformed section"),
                         ValidationError);
  }
  SUBCASE("non-numeric value") {
    CHECK_THROWS_WITH_AS(parse_run_config("[sim]\nt_bins = many\n"),
                         doctest::Contains("expected an integer"),
                         ValidationError);
  }
  SUBCASE("negative master seed") {
    CHECK_THROWS_WITH_AS(parse_run_config("[run]\nseed = -4\n"),
                         doctest::Contains("non-negative"), ValidationError);
  }
  SUBCASE("malformed signal:noise pair") {
    CHECK_THROWS_WITH_AS(parse_run_config("[dataset]\nsource_sbr = 2:\n"),
                         doctest::Contains("signal:noise"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_run_config("[dataset]\nsource_sbr = 2;2\n"),
                         doctest::Contains("signal:noise"), ValidationError);
  }
  SUBCASE("missing config file") {
    CHECK_THROWS_WITH_AS(load_run_config(path_in("missing.cfg")),
                         doctest::Contains("cannot open"), ValidationError);
  }
}
