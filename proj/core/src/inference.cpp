#include "photon_da/inference.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "photon_da/ops.hpp"
#include "photon_da/parallel.hpp"

namespace photon_da {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

template <typename S>
Tensor<S> softargmax_depth_impl(GradientTape<S>& tape, const Tensor<S>& h_hat,
                                double delta_ps, double c) {
  const auto& shape = h_hat.shape();
  if (shape.size() != 4 && shape.size() != 5)
    fail("softargmax_depth: input must be [1,T,H,W] or [B,1,T,H,W], got " +
         shape_str(shape));
  if (delta_ps <= 0.0) fail("softargmax_depth: delta_ps must be positive");
  const bool batched = shape.size() == 5;
  const std::int64_t batch = batched ? shape[0] : 1;
  const std::size_t c_axis = shape.size() - 4;
  if (shape[c_axis] != 1)
    fail("softargmax_depth: input must have a single channel, got " +
         shape_str(shape));
  const std::int64_t t_bins = shape[c_axis + 1];
  const std::int64_t h = shape[c_axis + 2], w = shape[c_axis + 3];
  const std::int64_t plane = h * w;
  const double bin_depth = delta_ps * 1e-12 * c / 2.0;

  const S* hv = h_hat.values().data();
  std::vector<S> z(static_cast<std::size_t>(batch * plane));
  for (std::int64_t b = 0; b < batch; ++b)
    for (std::int64_t p = 0; p < plane; ++p) {
      double sum = 0.0, mean_k = 0.0;
      for (std::int64_t k = 0; k < t_bins; ++k) {
        const double v =
            static_cast<double>(hv[(b * t_bins + k) * plane + p]);
        sum += v;
        mean_k += static_cast<double>(k) * v;
      }
      if (std::abs(sum - 1.0) > 1e-4) {
        std::ostringstream os;
        os << "softargmax_depth: distribution at pixel (" << p / w << ", "
           << p % w << ") sums to " << sum << ", not 1";
        fail(os.str());
      }
      z[static_cast<std::size_t>(b * plane + p)] =
          static_cast<S>(bin_depth * mean_k);
    }

  Shape out_shape = batched ? Shape{batch, h, w} : Shape{h, w};
  auto out = Tensor<S>::from_data(std::move(out_shape), std::move(z),
                                  detail::track(tape, h_hat));
  if (out.requires_grad()) {
    auto ht = h_hat;
    auto ot = out;
    tape.record([ht, ot, batch, t_bins, plane, bin_depth]() {
      if (!ht.requires_grad()) return;
      const S* go = ot.impl()->grad.data();
      S* gh = ht.impl()->grad.data();
      for (std::int64_t b = 0; b < batch; ++b)
        for (std::int64_t k = 0; k < t_bins; ++k) {
          const S coef = static_cast<S>(bin_depth * static_cast<double>(k));
          for (std::int64_t p = 0; p < plane; ++p)
            gh[(b * t_bins + k) * plane + p] += coef * go[b * plane + p];
        }
    });
  }
  return out;
}

void check_cube(const HistogramCube& h) {
  if (h.t_bins < 1 || h.nx < 1 || h.ny < 1)
    fail("histogram cube has empty dimensions");
  if (h.counts.size() != static_cast<std::size_t>(h.t_bins * h.nx * h.ny))
    fail("histogram cube payload does not match its dimensions");
}

}  // namespace

#define PHOTON_DA_DEFINE_SOFTARGMAX(S)                                       \
  template <>                                                                \
  Tensor<S> softargmax_depth<S>(GradientTape<S>& tape,                       \
                                const Tensor<S>& h_hat, double delta_ps,     \
                                double c) {                                  \
    return softargmax_depth_impl(tape, h_hat, delta_ps, c);                  \
  }

PHOTON_DA_DEFINE_SOFTARGMAX(float)
PHOTON_DA_DEFINE_SOFTARGMAX(double)

#undef PHOTON_DA_DEFINE_SOFTARGMAX

DepthMap to_depth_map(const Tensor<float>& z) {
  Shape s = z.shape();
  while (s.size() > 2 && s.front() == 1) s.erase(s.begin());
  if (s.size() != 2)
    fail("depth tensor must be [H,W] up to leading unit axes, got " +
         shape_str(z.shape()));
  DepthMap m;
  m.nx = s[0];
  m.ny = s[1];
  const auto v = z.values();
  m.z.assign(v.begin(), v.end());
  return m;
}

DepthMap mle_depth(const HistogramCube& h, const PulseWaveform& pulse,
                   double noise_per_bin, double delta_ps, double c) {
  check_cube(h);
  if (pulse.samples.empty() || pulse.samples.size() % 2 == 0)
    fail("mle_depth: pulse must have a nonempty odd support");
  if (pulse.bin_size_ps != delta_ps)
    fail("mle_depth: pulse bin size does not match delta_ps");
  double mass = 0.0;
  for (double p : pulse.samples) mass += p;
  if (std::abs(mass - 1.0) > 1e-6)
    fail("mle_depth: pulse must be normalized to unit mass");
  if (noise_per_bin < 0.0)
    fail("mle_depth: noise_per_bin must be nonnegative");
  if (delta_ps <= 0.0) fail("mle_depth: delta_ps must be positive");

  const std::int64_t T = h.t_bins;
  const auto half = static_cast<std::int64_t>(pulse.samples.size() / 2);
  const double bin_depth = delta_ps * 1e-12 * c / 2.0;

  // Pulse mass captured inside [0,T) for every shift; flat in the
  // interior, tapering where the window crosses an edge.
  std::vector<double> captured(static_cast<std::size_t>(T));
  for (std::int64_t s = 0; s < T; ++s) {
    double cap = 0.0;
    for (std::int64_t k = -half; k <= half; ++k)
      if (s + k >= 0 && s + k < T)
        cap += pulse.samples[static_cast<std::size_t>(k + half)];
    captured[static_cast<std::size_t>(s)] = cap;
  }

  DepthMap out;
  out.nx = h.nx;
  out.ny = h.ny;
  out.z.assign(static_cast<std::size_t>(h.nx * h.ny),
               std::numeric_limits<float>::quiet_NaN());
  const std::int64_t plane = h.nx * h.ny;

  parallel_for(plane, [&](std::int64_t lo, std::int64_t hi) {
    std::vector<std::int64_t> photon_bins;
    for (std::int64_t p = lo; p < hi; ++p) {
      photon_bins.clear();
      double total = 0.0;
      for (std::int64_t t = 0; t < T; ++t) {
        const auto n = h.counts[static_cast<std::size_t>(t * plane + p)];
        if (n > 0) {
          photon_bins.push_back(t);
          total += static_cast<double>(n);
        }
      }
      if (photon_bins.empty()) continue;  // sentinel stays
      const double amp =
          std::max(total - static_cast<double>(T) * noise_per_bin, 1e-6);
      double best_ll = -std::numeric_limits<double>::infinity();
      std::int64_t best_s = 0;
      for (std::int64_t s = 0; s < T; ++s) {
        double ll =
            -amp * captured[static_cast<std::size_t>(s)] -
            noise_per_bin * static_cast<double>(T);
        for (const std::int64_t t : photon_bins) {
          const std::int64_t k = t - s;
          double lam = noise_per_bin;
          if (k >= -half && k <= half)
            lam += amp * pulse.samples[static_cast<std::size_t>(k + half)];
          const auto n = static_cast<double>(
              h.counts[static_cast<std::size_t>(t * plane + p)]);
          ll += lam > 0.0 ? n * std::log(lam) : n * -1e30;
        }
        if (ll > best_ll) {
          best_ll = ll;
          best_s = s;
        }
      }
      out.z[static_cast<std::size_t>(p)] =
          static_cast<float>(bin_depth * static_cast<double>(best_s));
    }
  });
  return out;
}

TilePlan make_tile_plan(std::int64_t nx, std::int64_t ny,
                        std::int64_t patch_h, std::int64_t patch_w) {
  if (nx < 1 || ny < 1) fail("tile plan: image extents must be positive");
  if (patch_h < 1 || patch_w < 1)
    fail("tile plan: patch extents must be positive");
  if (patch_h > nx || patch_w > ny) {
    std::ostringstream os;
    os << "tile plan: patch " << patch_h << " x " << patch_w
       << " exceeds image " << nx << " x " << ny;
    fail(os.str());
  }
  TilePlan plan;
  plan.nx = nx;
  plan.ny = ny;
  plan.patch_h = patch_h;
  plan.patch_w = patch_w;
  for (std::int64_t oi = 0; oi < nx; oi += patch_h)
    for (std::int64_t oj = 0; oj < ny; oj += patch_w)
      plan.tiles.push_back({oi, oj, std::min(patch_h, nx - oi),
                            std::min(patch_w, ny - oj)});
  return plan;
}

namespace {

/// Mirror an out-of-range index back into [0, n) without repeating the
/// edge sample (valid for overhang < n).
std::int64_t reflect(std::int64_t x, std::int64_t n) {
  return x < n ? x : 2 * (n - 1) - x;
}

}  // namespace

DepthMap tile_and_stitch(const HistogramCube& cube, const TilePlan& plan,
                         const PatchPredictor& predict) {
  check_cube(cube);
  if (plan.nx != cube.nx || plan.ny != cube.ny) {
    std::ostringstream os;
    os << "tile plan " << plan.nx << " x " << plan.ny
       << " does not cover cube " << cube.nx << " x " << cube.ny;
    fail(os.str());
  }
  if (plan.tiles.empty()) fail("tile plan has no tiles");
  if (!predict) fail("tile_and_stitch: empty predictor");

  const std::int64_t T = cube.t_bins;
  const std::int64_t plane = cube.nx * cube.ny;
  DepthMap out;
  out.nx = cube.nx;
  out.ny = cube.ny;
  out.z.assign(static_cast<std::size_t>(plane),
               std::numeric_limits<float>::quiet_NaN());

  for (const auto& tile : plan.tiles) {
    auto patch = Tensor<float>::zeros({1, T, plan.patch_h, plan.patch_w});
    auto pv = patch.values();
    for (std::int64_t t = 0; t < T; ++t)
      for (std::int64_t i = 0; i < plan.patch_h; ++i) {
        const std::int64_t gi = reflect(tile.oi + i, cube.nx);
        for (std::int64_t j = 0; j < plan.patch_w; ++j) {
          const std::int64_t gj = reflect(tile.oj + j, cube.ny);
          pv[(t * plan.patch_h + i) * plan.patch_w + j] =
              static_cast<float>(cube.counts[static_cast<std::size_t>(
                  t * plane + gi * cube.ny + gj)]);
        }
      }
    auto depth = predict(patch);
    if (depth.shape() != Shape{plan.patch_h, plan.patch_w})
      fail("tile_and_stitch: predictor returned " +
           shape_str(depth.shape()) + ", expected [patch_h, patch_w]");
    const auto dv = depth.values();
    for (std::int64_t i = 0; i < tile.rows; ++i)
      for (std::int64_t j = 0; j < tile.cols; ++j)
        out.z[static_cast<std::size_t>((tile.oi + i) * cube.ny + tile.oj +
                                       j)] =
            dv[i * plan.patch_w + j];
  }
  return out;
}

DepthMap predict_depth_map(const HistogramCube& cube,
                           const ParameterStore<float>& params,
                           const StinConfig& cfg) {
  const auto full = cfg.with_derived();
  if (cube.t_bins != full.t_bins) {
    std::ostringstream os;
    os << "cube has " << cube.t_bins << " time bins but the network expects "
       << full.t_bins;
    fail(os.str());
  }
  const double delta_ps = cube.meta.delta_ps;
  auto plan = make_tile_plan(cube.nx, cube.ny, full.patch[0], full.patch[1]);
  auto predictor = [&params, &full, delta_ps](const Tensor<float>& patch) {
    GradientTape<float> tape;
    tape.set_recording(false);
    auto h_hat = stin_forward(tape, patch, params, full);
    return softargmax_depth(tape, h_hat, delta_ps);
  };
  return tile_and_stitch(cube, plan, predictor);
}

}  // namespace photon_da
