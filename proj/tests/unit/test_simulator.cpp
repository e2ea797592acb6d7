// Observation-model tests. Golden values were computed independently from
// the documented formulas (Gaussian discretization, linear-interpolation
// shift, Poisson moments) and frozen here; the simulator must reproduce
// them, not the other way round.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "photon_da/simulator.hpp"

using namespace photon_da;

namespace {

SceneSample flat_scene(std::int64_t nx, std::int64_t ny, float z, float a) {
  SceneSample s;
  s.depth.nx = nx;
  s.depth.ny = ny;
  s.depth.z.assign(static_cast<std::size_t>(nx * ny), z);
  s.albedo.assign(static_cast<std::size_t>(nx * ny), a);
  return s;
}

double pixel_sum(const RateCube& r, std::int64_t i, std::int64_t j) {
  double s = 0.0;
  for (std::int64_t t = 0; t < r.t_bins; ++t)
    s += r.rate[static_cast<std::size_t>((t * r.nx + i) * r.ny + j)];
  return s;
}

}  // namespace

TEST_CASE("gaussian_pulse: shape, normalization, mass gate") {
  const auto p = gaussian_pulse(400.0, 80.0, 21);
  REQUIRE(p.samples.size() == 21);
  CHECK(p.bin_size_ps == 80.0);

  double sum = 0.0;
  for (double v : p.samples) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

  // Even function: mirrored samples are computed from identical
  // expressions, so they match bit for bit.
  for (int k = 1; k <= 10; ++k) CHECK(p.samples[10 - k] == p.samples[10 + k]);

  // sigma = fwhm/delta / (2 sqrt(2 ln 2)) = 2.1233045007200477 bins; the
  // neighbor/peak ratio pins it: exp(-0.5/sigma^2).
  CHECK(p.samples[11] / p.samples[10] ==
        doctest::Approx(0.8950250709279725).epsilon(1e-12));

  // Support 15 captures 99.96% of the discrete mass and passes; support 13
  // captures 99.80% and must be rejected.
  CHECK_NOTHROW((void)gaussian_pulse(400.0, 80.0, 15));
  CHECK_THROWS_AS((void)gaussian_pulse(400.0, 80.0, 13), ValidationError);
  CHECK_THROWS_AS((void)gaussian_pulse(400.0, 80.0, 20), ValidationError);
  CHECK_THROWS_AS((void)gaussian_pulse(-1.0, 80.0, 21), ValidationError);
  CHECK_THROWS_AS((void)gaussian_pulse(400.0, 0.0, 21), ValidationError);
}

TEST_CASE("calibrate_sbr: per-bin noise and signal scale") {
  const auto pulse = gaussian_pulse(400.0, 80.0, 21);
  SimConfig cfg;
  cfg.t_bins = 1024;
  cfg.signal_mean = 2.0;
  cfg.noise_mean = 50.0;
  auto [sig, noise] = calibrate_sbr(pulse, cfg);
  CHECK(noise == 0.048828125);  // 50/1024 exactly
  CHECK(sig == 2.0);            // n_illum = 1, eta = 1

  cfg.noise_mean = 0.0;
  CHECK(calibrate_sbr(pulse, cfg).second == 0.0);

  // The calibration folds detector efficiency and illumination count into
  // one factor: n * eta * scale recovers the requested mean.
  cfg.n_illum = 4;
  cfg.eta = 0.5;
  auto [sig2, noise2] = calibrate_sbr(pulse, cfg);
  CHECK(static_cast<double>(cfg.n_illum) * cfg.eta * sig2 ==
        doctest::Approx(2.0).epsilon(1e-12));
  (void)noise2;

  cfg.eta = 1.5;
  CHECK_THROWS_AS(calibrate_sbr(pulse, cfg), ValidationError);
}

TEST_CASE("config validation rejects each bad field") {
  SimConfig good;
  CHECK_NOTHROW(good.validate());
  auto bad = good;
  bad.t_bins = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = good;
  bad.delta_ps = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = good;
  bad.eta = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = good;
  bad.eta = 1.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = good;
  bad.signal_mean = 0.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = good;
  bad.noise_mean = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = good;
  bad.n_illum = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("quantize_depth: floor rule and range errors") {
  // Bin depth at 80 ps is 0.011991698 m.
  DepthMap d;
  d.nx = 2;
  d.ny = 2;
  d.z = {0.0f, 0.6f, 1.2f, 0.3f};
  const auto bins = quantize_depth(d, 80.0, 1024);
  CHECK(bins.at(0, 0) == 0);
  CHECK(bins.at(0, 1) == 50);   // tau = 50.0346
  CHECK(bins.at(1, 0) == 100);  // tau = 100.0692
  CHECK(bins.at(1, 1) == 25);   // tau = 25.0173

  // Monotonic in depth.
  DepthMap ramp;
  ramp.nx = 1;
  ramp.ny = 64;
  for (int j = 0; j < 64; ++j)
    ramp.z.push_back(0.01f + 0.18f * static_cast<float>(j));
  const auto rb = quantize_depth(ramp, 80.0, 1024);
  for (int j = 1; j < 64; ++j) CHECK(rb.at(0, j) >= rb.at(0, j - 1));

  DepthMap neg = d;
  neg.at(1, 0) = -0.01f;
  try {
    (void)quantize_depth(neg, 80.0, 1024);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("(1, 0)") != std::string::npos);
  }

  DepthMap far = d;
  far.at(0, 1) = 13.0f;  // range at T=1024 is 12.28 m
  CHECK_THROWS_AS((void)quantize_depth(far, 80.0, 1024), ValidationError);
  CHECK_NOTHROW((void)quantize_depth(far, 80.0, 2048));
}

TEST_CASE("rate_cube: calibration contracts") {
  const auto pulse = gaussian_pulse(400.0, 80.0, 21);
  SimConfig cfg;
  cfg.t_bins = 1024;
  cfg.signal_mean = 2.0;
  cfg.noise_mean = 0.0;

  // Zero albedo and zero noise: rates vanish identically.
  auto dark = flat_scene(3, 3, 0.6f, 0.0f);
  auto r0 = rate_cube(dark, pulse, cfg);
  for (double v : r0.rate) CHECK(v == 0.0);

  // Unit albedo: per-pixel expected photons equal the configured mean.
  auto bright = flat_scene(3, 3, 0.6f, 1.0f);
  auto r1 = rate_cube(bright, pulse, cfg);
  CHECK(r1.t_bins == 1024);
  for (std::int64_t i = 0; i < 3; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      CHECK(pixel_sum(r1, i, j) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(r1.clipped_fraction < 1e-9);

  // Mixed albedo with noise: sum_t = s * a/a_mean + m within 0.1%.
  SceneSample mixed = flat_scene(2, 2, 0.6f, 1.0f);
  mixed.albedo = {0.5f, 1.0f, 0.75f, 0.25f};  // mean 0.625
  cfg.noise_mean = 3.0;
  auto r2 = rate_cube(mixed, pulse, cfg);
  const double a_mean = 0.625;
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 2; ++j) {
      const double a = mixed.albedo[static_cast<std::size_t>(i * 2 + j)];
      const double want = 2.0 * a / a_mean + 3.0;
      CHECK(pixel_sum(r2, i, j) == doctest::Approx(want).epsilon(1e-3));
    }

  // All-zero albedo with noise: exactly the uniform noise floor.
  cfg.t_bins = 16;
  cfg.noise_mean = 4.0;
  auto r3 = rate_cube(flat_scene(2, 2, 0.05f, 0.0f), pulse, cfg);
  for (double v : r3.rate) CHECK(v == 0.25);
}

TEST_CASE("rate_cube: frozen shifted-pulse column") {
  // T=16, fwhm 160 ps, support 9; depth chosen so the round-trip shift is
  // exactly 6.3 bins. Values from the independent interpolation oracle.
  SimConfig cfg;
  cfg.t_bins = 16;
  cfg.delta_ps = 80.0;
  cfg.signal_mean = 1.0;
  cfg.noise_mean = 0.0;
  const auto pulse = gaussian_pulse(160.0, 80.0, 9);
  auto scene = flat_scene(1, 1, 0.075547699416f, 1.0f);
  // Single float pixel: the stored depth rounds; feed the double through a
  // double-precision map instead.
  scene.depth.z[0] = static_cast<float>(0.075547699416);

  auto r = rate_cube(scene, pulse, cfg);
  const double expect[] = {
      0.00660540989951406,    // t = 3
      0.07045770559481662,    // t = 4
      0.2818308223792664,     // t = 5
      0.42274623356889945,    // t = 6
      0.19375869038574559,    // t = 7
      0.02366938547325869,    // t = 8
      0.000735367898969338,   // t = 9
  };
  // Float storage of the depth perturbs tau by ~1e-8 bins; the column
  // tolerance absorbs it.
  for (int t = 3; t <= 9; ++t)
    CHECK(r.rate[static_cast<std::size_t>(t)] ==
          doctest::Approx(expect[t - 3]).epsilon(1e-6));
  CHECK(pixel_sum(r, 0, 0) == doctest::Approx(1.0).epsilon(1e-9));

  // Peak lands on the quantized bin.
  std::int64_t argmax = 0;
  for (std::int64_t t = 1; t < 16; ++t)
    if (r.rate[static_cast<std::size_t>(t)] >
        r.rate[static_cast<std::size_t>(argmax)])
      argmax = t;
  const auto bins = quantize_depth(scene.depth, 80.0, 16);
  CHECK(argmax == bins.at(0, 0));
  CHECK(argmax == 6);
}

TEST_CASE("rate_cube: peak bin matches quantization on random depths") {
  SimConfig cfg;
  cfg.t_bins = 256;
  cfg.signal_mean = 2.0;
  cfg.noise_mean = 0.0;
  const auto pulse = gaussian_pulse(400.0, 80.0, 21);
  PhiloxRng rng(909);
  const double bin_m = cfg.bin_depth_m();

  int exact = 0;
  const int trials = 100;
  for (int n = 0; n < trials; ++n) {
    // Keep the pulse support away from the histogram edges.
    const double z = rng.uniform(12.0 * bin_m, (256.0 - 12.0) * bin_m);
    auto scene = flat_scene(1, 1, static_cast<float>(z), 1.0f);
    auto r = rate_cube(scene, pulse, cfg);
    std::int64_t argmax = 0;
    for (std::int64_t t = 1; t < 256; ++t)
      if (r.rate[static_cast<std::size_t>(t)] >
          r.rate[static_cast<std::size_t>(argmax)])
        argmax = t;
    const auto q = quantize_depth(scene.depth, 80.0, 256);
    CHECK(std::abs(argmax - q.at(0, 0)) <= 1);
    if (argmax == q.at(0, 0)) ++exact;
  }
  CHECK(exact >= 90);  // only straddling fractions may land one off
}

TEST_CASE("rate_cube: edge clipping is reported") {
  SimConfig cfg;
  cfg.t_bins = 64;
  cfg.signal_mean = 2.0;
  cfg.noise_mean = 0.0;
  const auto pulse = gaussian_pulse(400.0, 80.0, 21);
  // Depth at one bin: roughly half the pulse falls before bin 0.
  auto scene = flat_scene(1, 1, static_cast<float>(cfg.bin_depth_m()), 1.0f);
  auto r = rate_cube(scene, pulse, cfg);
  CHECK(r.clipped_fraction > 0.3);
  CHECK(r.clipped_fraction < 0.5);
  CHECK(pixel_sum(r, 0, 0) ==
        doctest::Approx(2.0 * (1.0 - r.clipped_fraction)).epsilon(1e-9));
}

TEST_CASE("rate_cube: structured noise profile") {
  SimConfig cfg;
  cfg.t_bins = 4;
  cfg.signal_mean = 1.0;
  cfg.noise_mean = 8.0;
  const auto pulse = gaussian_pulse(160.0, 80.0, 9);
  auto scene = flat_scene(1, 1, 0.02f, 0.0f);  // noise only

  const std::vector<double> profile = {0.5, 0.25, 0.25, 0.0};
  auto r = rate_cube(scene, pulse, cfg, profile);
  CHECK(r.rate[0] == 4.0);
  CHECK(r.rate[1] == 2.0);
  CHECK(r.rate[2] == 2.0);
  CHECK(r.rate[3] == 0.0);

  const std::vector<double> wrong_len = {0.5, 0.5};
  CHECK_THROWS_AS(rate_cube(scene, pulse, cfg, wrong_len), ValidationError);
  const std::vector<double> not_normal = {0.5, 0.25, 0.25, 0.25};
  CHECK_THROWS_AS(rate_cube(scene, pulse, cfg, not_normal), ValidationError);
  const std::vector<double> negative = {1.5, -0.5, 0.0, 0.0};
  CHECK_THROWS_AS(rate_cube(scene, pulse, cfg, negative), ValidationError);
}

TEST_CASE("rate_cube: rejects out-of-range scene depth") {
  SimConfig cfg;
  cfg.t_bins = 64;  // range 0.767 m
  const auto pulse = gaussian_pulse(400.0, 80.0, 21);
  auto scene = flat_scene(2, 2, 0.3f, 1.0f);
  scene.depth.at(0, 1) = 0.9f;
  CHECK_THROWS_AS(rate_cube(scene, pulse, cfg), ValidationError);
}

TEST_CASE("poisson_sample: degenerate, small, and split regimes") {
  PhiloxRng rng(11);
  for (int i = 0; i < 100; ++i) CHECK(poisson_sample(0.0, rng) == 0);

  double acc = 0.0;
  const int n_small = 100000;
  for (int i = 0; i < n_small; ++i) acc += poisson_sample(0.05, rng);
  CHECK(std::abs(acc / n_small - 0.05) < 0.0022);  // 3 sigma

  // lambda beyond the direct-inversion regime goes through halving.
  double acc_big = 0.0;
  const int n_big = 2000;
  for (int i = 0; i < n_big; ++i) acc_big += poisson_sample(200.0, rng);
  CHECK(std::abs(acc_big / n_big - 200.0) < 0.95);  // 3 sigma

  CHECK_THROWS_AS(poisson_sample(-1.0, rng), ValidationError);
}

TEST_CASE("sample_histogram: moments, determinism, shape") {
  RateCube r;
  r.t_bins = 40;
  r.nx = 50;
  r.ny = 50;
  r.rate.assign(100000, 3.0);

  auto h1 = sample_histogram(r, 42);
  auto h2 = sample_histogram(r, 42);
  auto h3 = sample_histogram(r, 43);
  REQUIRE(h1.counts.size() == 100000);
  CHECK(std::memcmp(h1.counts.data(), h2.counts.data(),
                    h1.counts.size() * sizeof(std::uint32_t)) == 0);
  CHECK(std::memcmp(h1.counts.data(), h3.counts.data(),
                    h1.counts.size() * sizeof(std::uint32_t)) != 0);

  // Poisson moments: mean and variance both converge to the rate.
  double mean = 0.0;
  for (auto c : h1.counts) mean += c;
  mean /= static_cast<double>(h1.counts.size());
  double var = 0.0;
  for (auto c : h1.counts) var += (c - mean) * (c - mean);
  var /= static_cast<double>(h1.counts.size());
  CHECK(std::abs(mean - 3.0) < 0.017);  // 3 sigma at N = 1e5
  CHECK(std::abs(var - 3.0) < 0.045);

  // Zero rates give zero counts; full-scale patch shape is preserved.
  RateCube zeros;
  zeros.t_bins = 1024;
  zeros.nx = 32;
  zeros.ny = 32;
  zeros.rate.assign(1024 * 32 * 32, 0.0);
  auto hz = sample_histogram(zeros, 7);
  CHECK(hz.t_bins == 1024);
  CHECK(hz.nx == 32);
  CHECK(hz.ny == 32);
  REQUIRE(hz.counts.size() == static_cast<std::size_t>(1024) * 32 * 32);
  for (std::size_t i = 0; i < hz.counts.size(); i += 997)
    CHECK(hz.counts[i] == 0);

  RateCube bad = r;
  bad.rate[5] = -0.5;
  CHECK_THROWS_AS(sample_histogram(bad, 1), ValidationError);
}

TEST_CASE("synth_scene: planes are planar and everything stays in range") {
  auto s = synth_scene(SceneKind::kPlanes, 24, 16, 0.5, 2.0, 123);
  REQUIRE(s.depth.nx == 24);
  REQUIRE(s.depth.ny == 16);
  REQUIRE(s.albedo.size() == 24 * 16);

  // Constant first differences along both axes.
  const float dj = s.depth.at(0, 1) - s.depth.at(0, 0);
  const float di = s.depth.at(1, 0) - s.depth.at(0, 0);
  for (std::int64_t i = 0; i < 24; ++i)
    for (std::int64_t j = 1; j < 16; ++j)
      CHECK(s.depth.at(i, j) - s.depth.at(i, j - 1) ==
            doctest::Approx(dj).epsilon(1e-4));
  for (std::int64_t i = 1; i < 24; ++i)
    CHECK(s.depth.at(i, 0) - s.depth.at(i - 1, 0) ==
          doctest::Approx(di).epsilon(1e-4));
}

TEST_CASE("synth_scene: all kinds honor range, albedo band, determinism") {
  for (SceneKind kind : {SceneKind::kPlanes, SceneKind::kSteps,
                         SceneKind::kSpheres, SceneKind::kPerlin}) {
    auto a = synth_scene(kind, 20, 20, 0.5, 2.5, 77);
    auto b = synth_scene(kind, 20, 20, 0.5, 2.5, 77);
    auto c = synth_scene(kind, 20, 20, 0.5, 2.5, 78);
    CHECK(std::memcmp(a.depth.z.data(), b.depth.z.data(),
                      a.depth.z.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(a.depth.z.data(), c.depth.z.data(),
                      a.depth.z.size() * sizeof(float)) != 0);
    for (float z : a.depth.z) {
      CHECK(z >= 0.5f);
      CHECK(z <= 2.5f);
    }
    for (float al : a.albedo) {
      CHECK(al >= 0.5f);
      CHECK(al <= 1.0f);
    }
  }

  // Step scenes contain genuine discontinuities.
  auto st = synth_scene(SceneKind::kSteps, 32, 32, 0.5, 2.5, 5);
  float max_jump = 0.0f;
  for (std::int64_t i = 0; i < 32; ++i)
    for (std::int64_t j = 1; j < 32; ++j)
      max_jump = std::max(max_jump, std::abs(st.depth.at(i, j) -
                                             st.depth.at(i, j - 1)));
  CHECK(max_jump > 0.1f);

  CHECK_THROWS_AS(synth_scene(SceneKind::kPlanes, 8, 8, 2.0, 1.0, 1),
                  ValidationError);
}
