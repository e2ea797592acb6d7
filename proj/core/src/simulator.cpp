#include "photon_da/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>

#include "photon_da/parallel.hpp"

namespace photon_da {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

/// Round-trip time of flight expressed in histogram bins: 2 z / (delta c).
double round_trip_bins(double z_m, double delta_ps, double c) {
  return 2.0 * z_m / (delta_ps * 1e-12 * c);
}

/// Linear interpolation of the pulse samples at fractional index u, zero
/// outside the support. Summed over any unit-spaced grid covering the
/// support this preserves the total mass exactly.
double shape_at(const std::vector<double>& p, double u) {
  const auto k = static_cast<std::int64_t>(p.size());
  if (u <= -1.0 || u >= static_cast<double>(k)) return 0.0;
  const double fl = std::floor(u);
  const auto idx = static_cast<std::int64_t>(fl);
  const double f = u - fl;
  const double a =
      (idx >= 0 && idx < k) ? p[static_cast<std::size_t>(idx)] : 0.0;
  const double b = (idx + 1 >= 0 && idx + 1 < k)
                       ? p[static_cast<std::size_t>(idx + 1)]
                       : 0.0;
  return (1.0 - f) * a + f * b;
}

void check_scene(const SceneSample& scene) {
  const std::int64_t nx = scene.depth.nx, ny = scene.depth.ny;
  if (nx < 1 || ny < 1 ||
      scene.depth.z.size() != static_cast<std::size_t>(nx * ny)) {
    std::ostringstream os;
    os << "rate_cube: depth map claims " << nx << " x " << ny << " but holds "
       << scene.depth.z.size() << " values";
    fail(os.str());
  }
  if (scene.albedo.size() != static_cast<std::size_t>(nx * ny)) {
    std::ostringstream os;
    os << "rate_cube: albedo holds " << scene.albedo.size()
       << " values for a " << nx << " x " << ny << " depth map";
    fail(os.str());
  }
  for (std::int64_t i = 0; i < nx; ++i)
    for (std::int64_t j = 0; j < ny; ++j) {
      const float a = scene.albedo[static_cast<std::size_t>(i * ny + j)];
      if (!(a >= 0.0f) || !(a <= 1.0f)) {
        std::ostringstream os;
        os << "rate_cube: albedo " << a << " at pixel (" << i << ", " << j
           << ") is outside [0, 1]";
        fail(os.str());
      }
    }
}

void check_pulse(const PulseWaveform& pulse, const SimConfig& cfg,
                 const char* where) {
  if (pulse.samples.empty()) fail(std::string(where) + ": empty pulse");
  if (pulse.bin_size_ps != cfg.delta_ps) {
    std::ostringstream os;
    os << where << ": pulse bin size " << pulse.bin_size_ps
       << " ps does not match configured " << cfg.delta_ps << " ps";
    fail(os.str());
  }
}

/// Two-octave lattice value noise in [0, 1], consuming a fixed number of
/// draws from rng regardless of the map size.
std::vector<double> value_noise(std::int64_t nx, std::int64_t ny,
                                PhiloxRng& rng) {
  constexpr int kG1 = 5, kG2 = 9;
  double lat1[kG1 * kG1];
  double lat2[kG2 * kG2];
  for (double& v : lat1) v = rng.uniform();
  for (double& v : lat2) v = rng.uniform();

  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  auto bilinear = [&](const double* lat, int g, double u, double v) {
    double x = u * (g - 1), y = v * (g - 1);
    int ix = std::min(static_cast<int>(x), g - 2);
    int iy = std::min(static_cast<int>(y), g - 2);
    const double fx = smooth(x - ix), fy = smooth(y - iy);
    const double a = lat[ix * g + iy], b = lat[ix * g + iy + 1];
    const double c = lat[(ix + 1) * g + iy], d = lat[(ix + 1) * g + iy + 1];
    const double top = a + (b - a) * fy, bot = c + (d - c) * fy;
    return top + (bot - top) * fx;
  };

  std::vector<double> out(static_cast<std::size_t>(nx * ny));
  for (std::int64_t i = 0; i < nx; ++i) {
    const double u =
        nx > 1 ? static_cast<double>(i) / static_cast<double>(nx - 1) : 0.0;
    for (std::int64_t j = 0; j < ny; ++j) {
      const double v =
          ny > 1 ? static_cast<double>(j) / static_cast<double>(ny - 1) : 0.0;
      const double n1 = bilinear(lat1, kG1, u, v);
      const double n2 = bilinear(lat2, kG2, u, v);
      out[static_cast<std::size_t>(i * ny + j)] = (n1 + 0.5 * n2) / 1.5;
    }
  }
  return out;
}

}  // namespace

void SimConfig::validate() const {
  std::ostringstream os;
  if (t_bins < 1) {
    os << "SimConfig: t_bins must be at least 1, got " << t_bins;
    fail(os.str());
  }
  if (!(delta_ps > 0.0) || !std::isfinite(delta_ps)) {
    os << "SimConfig: delta_ps must be positive, got " << delta_ps;
    fail(os.str());
  }
  if (n_illum < 1) {
    os << "SimConfig: n_illum must be at least 1, got " << n_illum;
    fail(os.str());
  }
  if (!(eta > 0.0) || !(eta <= 1.0)) {
    os << "SimConfig: eta must lie in (0, 1], got " << eta;
    fail(os.str());
  }
  if (!(signal_mean > 0.0) || !std::isfinite(signal_mean)) {
    os << "SimConfig: signal_mean must be positive, got " << signal_mean;
    fail(os.str());
  }
  if (!(noise_mean >= 0.0) || !std::isfinite(noise_mean)) {
    os << "SimConfig: noise_mean must be nonnegative, got " << noise_mean;
    fail(os.str());
  }
}

PulseWaveform gaussian_pulse(double fwhm_ps, double delta_ps,
                             int support_bins) {
  if (!(fwhm_ps > 0.0) || !std::isfinite(fwhm_ps)) {
    std::ostringstream os;
    os << "gaussian_pulse: fwhm_ps must be positive, got " << fwhm_ps;
    fail(os.str());
  }
  if (!(delta_ps > 0.0) || !std::isfinite(delta_ps)) {
    std::ostringstream os;
    os << "gaussian_pulse: delta_ps must be positive, got " << delta_ps;
    fail(os.str());
  }
  if (support_bins < 1 || support_bins % 2 == 0) {
    std::ostringstream os;
    os << "gaussian_pulse: support_bins must be a positive odd count, got "
       << support_bins;
    fail(os.str());
  }

  const double sigma =
      fwhm_ps / delta_ps / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  auto g = [sigma](std::int64_t k) {
    const double x = static_cast<double>(k) / sigma;
    return std::exp(-0.5 * x * x);
  };

  const std::int64_t half = support_bins / 2;
  double num = 0.0;
  for (std::int64_t k = -half; k <= half; ++k) num += g(k);

  // Reference mass over a support wide enough that the remaining tail is
  // far below double precision.
  const auto tail = std::max<std::int64_t>(
      half, static_cast<std::int64_t>(std::ceil(20.0 * sigma)));
  double den = 0.0;
  for (std::int64_t k = -tail; k <= tail; ++k) den += g(k);

  const double captured = num / den;
  if (captured < 0.999) {
    std::ostringstream os;
    os << "gaussian_pulse: support of " << support_bins
       << " bins captures only " << captured * 100.0
       << "% of the pulse mass (need 99.9%); widen the support";
    fail(os.str());
  }

  PulseWaveform pulse;
  pulse.bin_size_ps = delta_ps;
  pulse.samples.resize(static_cast<std::size_t>(support_bins));
  for (std::int64_t i = 0; i < support_bins; ++i)
    pulse.samples[static_cast<std::size_t>(i)] = g(i - half) / num;
  return pulse;
}

std::pair<double, double> calibrate_sbr(const PulseWaveform& pulse,
                                        const SimConfig& cfg) {
  cfg.validate();
  check_pulse(pulse, cfg, "calibrate_sbr");
  const double signal_scale =
      cfg.signal_mean / (static_cast<double>(cfg.n_illum) * cfg.eta);
  const double noise_per_bin =
      cfg.noise_mean / static_cast<double>(cfg.t_bins);
  return {signal_scale, noise_per_bin};
}

RateCube rate_cube(const SceneSample& scene, const PulseWaveform& pulse,
                   const SimConfig& cfg,
                   std::span<const double> noise_profile) {
  cfg.validate();
  check_pulse(pulse, cfg, "rate_cube");
  check_scene(scene);

  const std::int64_t nx = scene.depth.nx, ny = scene.depth.ny;
  const std::int64_t t_bins = cfg.t_bins;
  const std::int64_t pix = nx * ny;
  const double range = cfg.range_m();

  // Per-bin noise rates: uniform by default, otherwise shaped by the
  // supplied profile.
  std::vector<double> noise;
  if (!noise_profile.empty()) {
    if (static_cast<std::int64_t>(noise_profile.size()) != t_bins) {
      std::ostringstream os;
      os << "rate_cube: noise profile has " << noise_profile.size()
         << " bins, expected " << t_bins;
      fail(os.str());
    }
    double sum = 0.0;
    for (double v : noise_profile) {
      if (!(v >= 0.0) || !std::isfinite(v))
        fail("rate_cube: noise profile entries must be finite and "
             "nonnegative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "rate_cube: noise profile sums to " << sum << ", expected 1";
      fail(os.str());
    }
    noise.resize(static_cast<std::size_t>(t_bins));
    for (std::int64_t t = 0; t < t_bins; ++t)
      noise[static_cast<std::size_t>(t)] =
          cfg.noise_mean * noise_profile[static_cast<std::size_t>(t)];
  }

  const auto [signal_scale, noise_per_bin] = calibrate_sbr(pulse, cfg);
  const double eff =
      static_cast<double>(cfg.n_illum) * cfg.eta * signal_scale;

  double albedo_sum = 0.0;
  for (float a : scene.albedo) albedo_sum += a;
  const double a_mean = albedo_sum / static_cast<double>(pix);

  for (std::int64_t i = 0; i < nx; ++i)
    for (std::int64_t j = 0; j < ny; ++j) {
      const double z = scene.depth.at(i, j);
      if (!std::isfinite(z) || z < 0.0 || !(z < range)) {
        std::ostringstream os;
        os << "rate_cube: depth " << z << " m at pixel (" << i << ", " << j
           << ") is outside [0, " << range << ")";
        fail(os.str());
      }
    }

  RateCube r;
  r.t_bins = t_bins;
  r.nx = nx;
  r.ny = ny;
  r.meta = cfg;
  if (noise.empty()) {
    r.rate.assign(static_cast<std::size_t>(t_bins * pix), noise_per_bin);
  } else {
    r.rate.resize(static_cast<std::size_t>(t_bins * pix));
    for (std::int64_t t = 0; t < t_bins; ++t) {
      double* plane = r.rate.data() + t * pix;
      std::fill(plane, plane + pix, noise[static_cast<std::size_t>(t)]);
    }
  }

  const std::int64_t k_len = static_cast<std::int64_t>(pulse.samples.size());
  const std::int64_t half = (k_len - 1) / 2;
  const double mid = static_cast<double>(half);
  std::vector<double> lost(static_cast<std::size_t>(pix), 0.0);
  std::vector<double> weight(static_cast<std::size_t>(pix), 0.0);
  double* rate = r.rate.data();
  const std::vector<double>& samples = pulse.samples;

  parallel_for(pix, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t p = lo; p < hi; ++p) {
      const double a = scene.albedo[static_cast<std::size_t>(p)];
      const double scale = a_mean > 0.0 ? eff * (a / a_mean) : 0.0;
      if (scale == 0.0) continue;
      const double z = scene.depth.z[static_cast<std::size_t>(p)];
      const double tau = round_trip_bins(z, cfg.delta_ps, kSpeedOfLight);
      const auto t0 = static_cast<std::int64_t>(std::floor(tau));
      const std::int64_t t_lo = std::max<std::int64_t>(0, t0 - half - 1);
      const std::int64_t t_hi =
          std::min<std::int64_t>(t_bins - 1, t0 + half + 1);
      double captured = 0.0;
      for (std::int64_t t = t_lo; t <= t_hi; ++t) {
        const double sh =
            shape_at(samples, mid + static_cast<double>(t) + 0.5 - tau);
        captured += sh;
        rate[t * pix + p] += scale * sh;
      }
      lost[static_cast<std::size_t>(p)] =
          scale * std::max(0.0, 1.0 - captured);
      weight[static_cast<std::size_t>(p)] = scale;
    }
  });

  double lost_sum = 0.0, weight_sum = 0.0;
  for (std::int64_t p = 0; p < pix; ++p) {
    lost_sum += lost[static_cast<std::size_t>(p)];
    weight_sum += weight[static_cast<std::size_t>(p)];
  }
  r.clipped_fraction = weight_sum > 0.0 ? lost_sum / weight_sum : 0.0;
  return r;
}

std::uint32_t poisson_sample(double lambda, PhiloxRng& rng) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    std::ostringstream os;
    os << "poisson_sample: rate must be finite and nonnegative, got "
       << lambda;
    fail(os.str());
  }
  if (lambda == 0.0) return 0;
  // Large rates split recursively: the sum of independent Poisson draws
  // with halved rates has the requested distribution, and each half stays
  // in the regime where product inversion is exact and fast.
  if (lambda > 30.0) {
    const double h = 0.5 * lambda;
    const std::uint32_t a = poisson_sample(h, rng);
    const std::uint32_t b = poisson_sample(lambda - h, rng);
    return a + b;
  }
  const double limit = std::exp(-lambda);
  std::uint32_t k = 0;
  double prod = rng.uniform();
  while (prod > limit) {
    ++k;
    prod *= rng.uniform();
  }
  return k;
}

HistogramCube sample_histogram(const RateCube& rates, std::uint64_t seed) {
  if (rates.t_bins < 1 || rates.nx < 1 || rates.ny < 1)
    fail("sample_histogram: rate cube has empty dimensions");
  const std::int64_t total = rates.t_bins * rates.nx * rates.ny;
  if (rates.rate.size() != static_cast<std::size_t>(total)) {
    std::ostringstream os;
    os << "sample_histogram: rate cube claims " << total << " voxels but "
       << "holds " << rates.rate.size();
    fail(os.str());
  }
  for (std::int64_t v = 0; v < total; ++v) {
    const double lam = rates.rate[static_cast<std::size_t>(v)];
    if (!(lam >= 0.0) || !std::isfinite(lam)) {
      std::ostringstream os;
      os << "sample_histogram: rate " << lam << " at voxel " << v
         << " must be finite and nonnegative";
      fail(os.str());
    }
  }

  HistogramCube h;
  h.t_bins = rates.t_bins;
  h.nx = rates.nx;
  h.ny = rates.ny;
  h.meta = rates.meta;
  h.counts.resize(static_cast<std::size_t>(total));

  std::uint32_t* counts = h.counts.data();
  const double* rate = rates.rate.data();
  parallel_for(total, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t v = lo; v < hi; ++v) {
      PhiloxRng rng(seed, static_cast<std::uint64_t>(v));
      counts[v] = poisson_sample(rate[v], rng);
    }
  });
  return h;
}

BinIndexMap quantize_depth(const DepthMap& depth, double delta_ps,
                           std::int64_t t_bins, double c) {
  if (!(delta_ps > 0.0) || !std::isfinite(delta_ps)) {
    std::ostringstream os;
    os << "quantize_depth: delta_ps must be positive, got " << delta_ps;
    fail(os.str());
  }
  if (t_bins < 1) {
    std::ostringstream os;
    os << "quantize_depth: t_bins must be at least 1, got " << t_bins;
    fail(os.str());
  }
  if (!(c > 0.0)) fail("quantize_depth: propagation speed must be positive");
  const std::int64_t nx = depth.nx, ny = depth.ny;
  if (nx < 1 || ny < 1 || depth.z.size() != static_cast<std::size_t>(nx * ny))
    fail("quantize_depth: malformed depth map");

  BinIndexMap out;
  out.nx = nx;
  out.ny = ny;
  out.bin.resize(static_cast<std::size_t>(nx * ny));
  for (std::int64_t i = 0; i < nx; ++i)
    for (std::int64_t j = 0; j < ny; ++j) {
      const double z = depth.at(i, j);
      const double tau = round_trip_bins(z, delta_ps, c);
      if (!std::isfinite(z) || z < 0.0 ||
          !(tau < static_cast<double>(t_bins))) {
        std::ostringstream os;
        os << "quantize_depth: depth " << z << " m at pixel (" << i << ", "
           << j << ") falls outside bins [0, " << t_bins << ")";
        fail(os.str());
      }
      out.at(i, j) = static_cast<std::int32_t>(std::floor(tau));
    }
  return out;
}

SceneSample synth_scene(SceneKind kind, std::int64_t nx, std::int64_t ny,
                        double z_min, double z_max, std::uint64_t seed) {
  if (nx < 1 || ny < 1) {
    std::ostringstream os;
    os << "synth_scene: grid must be at least 1 x 1, got " << nx << " x "
       << ny;
    fail(os.str());
  }
  if (!std::isfinite(z_min) || !std::isfinite(z_max) || !(z_min >= 0.0) ||
      !(z_max > z_min)) {
    std::ostringstream os;
    os << "synth_scene: need 0 <= z_min < z_max, got [" << z_min << ", "
       << z_max << "]";
    fail(os.str());
  }

  const double span = z_max - z_min;
  PhiloxRng rng(seed);           // geometry stream
  PhiloxRng albedo_rng(seed, 1); // reflectivity stream

  SceneSample s;
  s.depth.nx = nx;
  s.depth.ny = ny;
  s.depth.z.resize(static_cast<std::size_t>(nx * ny));
  auto set_z = [&](std::int64_t i, std::int64_t j, double z) {
    s.depth.at(i, j) = std::clamp(static_cast<float>(z),
                                  static_cast<float>(z_min),
                                  static_cast<float>(z_max));
  };

  switch (kind) {
    case SceneKind::kPlanes: {
      // Tilted plane; gradients are scaled so the far corner stays inside
      // the range without clamping.
      const double u = rng.uniform();
      const double gx = span * u / static_cast<double>(nx);
      const double gy = span * (1.0 - u) / static_cast<double>(ny);
      for (std::int64_t i = 0; i < nx; ++i)
        for (std::int64_t j = 0; j < ny; ++j)
          set_z(i, j, z_min + gx * static_cast<double>(i) +
                          gy * static_cast<double>(j));
      break;
    }
    case SceneKind::kSteps: {
      const double base = z_min + span * rng.uniform(0.15, 0.5);
      for (std::int64_t i = 0; i < nx; ++i)
        for (std::int64_t j = 0; j < ny; ++j) set_z(i, j, base);
      const int n_rect = 4 + static_cast<int>(rng.uniform_int(5));
      for (int r = 0; r < n_rect; ++r) {
        const auto i0 =
            static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(nx)));
        const auto j0 =
            static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(ny)));
        const auto i1 = i0 + 1 +
                        static_cast<std::int64_t>(rng.uniform_int(
                            static_cast<std::uint64_t>(nx - i0)));
        const auto j1 = j0 + 1 +
                        static_cast<std::int64_t>(rng.uniform_int(
                            static_cast<std::uint64_t>(ny - j0)));
        const double level = z_min + span * rng.uniform(0.05, 0.95);
        for (std::int64_t i = i0; i < i1; ++i)
          for (std::int64_t j = j0; j < j1; ++j) set_z(i, j, level);
      }
      break;
    }
    case SceneKind::kSpheres: {
      const double back = z_max - 0.05 * span;
      for (std::int64_t i = 0; i < nx; ++i)
        for (std::int64_t j = 0; j < ny; ++j) set_z(i, j, back);
      const double dim = static_cast<double>(std::min(nx, ny));
      const int n_sph = 3 + static_cast<int>(rng.uniform_int(3));
      for (int m = 0; m < n_sph; ++m) {
        const double ci = rng.uniform(0.0, static_cast<double>(nx));
        const double cj = rng.uniform(0.0, static_cast<double>(ny));
        const double rad = rng.uniform(dim / 6.0, dim / 2.5);
        const double h = span * rng.uniform(0.25, 0.7);
        for (std::int64_t i = 0; i < nx; ++i)
          for (std::int64_t j = 0; j < ny; ++j) {
            const double di = (static_cast<double>(i) - ci) / rad;
            const double dj = (static_cast<double>(j) - cj) / rad;
            const double d2 = di * di + dj * dj;
            if (d2 >= 1.0) continue;
            const double cand = back - h * std::sqrt(1.0 - d2);
            if (cand < s.depth.at(i, j)) set_z(i, j, cand);
          }
      }
      break;
    }
    case SceneKind::kPerlin: {
      auto v = value_noise(nx, ny, rng);
      double lo = v[0], hi = v[0];
      for (double x : v) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      const double spread = hi - lo;
      for (std::int64_t i = 0; i < nx; ++i)
        for (std::int64_t j = 0; j < ny; ++j) {
          const double raw = v[static_cast<std::size_t>(i * ny + j)];
          const double t = spread > 1e-12 ? (raw - lo) / spread : 0.5;
          set_z(i, j, z_min + span * t);
        }
      break;
    }
  }

  const auto a = value_noise(nx, ny, albedo_rng);
  s.albedo.resize(static_cast<std::size_t>(nx * ny));
  for (std::size_t p = 0; p < s.albedo.size(); ++p)
    s.albedo[p] = std::clamp(static_cast<float>(0.5 + 0.5 * a[p]), 0.5f, 1.0f);
  return s;
}

}  // namespace photon_da
