#include "photon_da/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "photon_da/inference.hpp"
#include "photon_da/objectives.hpp"
#include "photon_da/ops.hpp"
#include "photon_da/rng.hpp"

namespace photon_da {
namespace {

using Fn = std::function<Tensor<double>(GradientTape<double>&,
                                        const std::vector<Tensor<double>>&)>;

struct Instance {
  Fn fn;
  std::vector<Tensor<double>> inputs;
};

Tensor<double> rnd(PhiloxRng& rng, Shape shape, double lo, double hi,
                   bool grad = true) {
  std::vector<double> data(static_cast<std::size_t>(numel(shape)));
  for (auto& v : data) v = rng.uniform(lo, hi);
  return Tensor<double>::from_data(std::move(shape), std::move(data), grad);
}

/// Values on a coarse grid plus a small per-index ramp: any two elements
/// differ by at least 2e-4, far beyond the probe step, so max-pool argmax
/// and |a-b| creases cannot flip during finite differencing.
Tensor<double> rnd_tie_safe(PhiloxRng& rng, Shape shape, bool grad = true) {
  std::vector<double> data(static_cast<std::size_t>(numel(shape)));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double base = std::round(rng.uniform(-1.0, 1.0) * 25.0) / 25.0;
    data[i] = base + static_cast<double>(1 + (i % 64)) * 2e-4;
  }
  return Tensor<double>::from_data(std::move(shape), std::move(data), grad);
}

/// Magnitudes kept at least 0.05 from zero so relu's kink is never probed.
Tensor<double> rnd_kink_safe(PhiloxRng& rng, Shape shape, bool grad = true) {
  std::vector<double> data(static_cast<std::size_t>(numel(shape)));
  for (auto& v : data) {
    const double u = rng.uniform(-1.0, 1.0);
    v = (u < 0 ? -1.0 : 1.0) * (0.05 + 0.95 * std::abs(u));
  }
  return Tensor<double>::from_data(std::move(shape), std::move(data), grad);
}

std::int64_t pick(PhiloxRng& rng, std::initializer_list<std::int64_t> choices) {
  const auto i = rng.uniform_int(choices.size());
  return *(choices.begin() + i);
}

Instance make_conv3d(PhiloxRng& rng) {
  const std::int64_t B = pick(rng, {1, 2}), Ci = pick(rng, {1, 2});
  const std::int64_t Co = pick(rng, {1, 3});
  const std::int64_t T = pick(rng, {3, 5}), H = pick(rng, {3, 4}),
                     W = pick(rng, {3, 4});
  const int kt = static_cast<int>(pick(rng, {1, 3}));
  const int kh = static_cast<int>(pick(rng, {1, 3}));
  const int kw = static_cast<int>(pick(rng, {1, 3}));
  const Dims3 pad = {kt / 2, kh / 2, kw / 2};
  Instance in;
  in.inputs = {rnd(rng, {B, Ci, T, H, W}, -1, 1),
               rnd(rng, {Co, Ci, kt, kh, kw}, -1, 1), rnd(rng, {Co}, -1, 1)};
  in.fn = [pad](GradientTape<double>& tape,
                const std::vector<Tensor<double>>& x) {
    return conv3d(tape, x[0], x[1], x[2], pad);
  };
  return in;
}

Instance make_deconv3d(PhiloxRng& rng) {
  const std::int64_t B = pick(rng, {1, 2}), Ci = pick(rng, {1, 2});
  const std::int64_t Co = pick(rng, {1, 2});
  const std::int64_t T = pick(rng, {2, 3}), H = pick(rng, {3, 4}),
                     W = pick(rng, {3, 4});
  const bool up = rng.uniform() < 0.5;
  const Dims3 stride = up ? Dims3{2, 1, 1} : Dims3{1, 1, 1};
  const Dims3 pad = up ? Dims3{2, 1, 1} : Dims3{1, 1, 1};
  const int kt = up ? 6 : 3;
  Instance in;
  in.inputs = {rnd(rng, {B, Ci, T, H, W}, -1, 1),
               rnd(rng, {Ci, Co, kt, 3, 3}, -1, 1), rnd(rng, {Co}, -1, 1)};
  in.fn = [stride, pad](GradientTape<double>& tape,
                        const std::vector<Tensor<double>>& x) {
    return deconv3d(tape, x[0], x[1], x[2], stride, pad);
  };
  return in;
}

Instance make_pool(PhiloxRng& rng, PoolMode mode) {
  const std::int64_t B = pick(rng, {1, 2}), C = pick(rng, {1, 3});
  const std::int64_t T = pick(rng, {2, 4}), H = pick(rng, {2, 4}),
                     W = pick(rng, {2, 4});
  const Dims3 k = {static_cast<int>(pick(rng, {1, 2})),
                   static_cast<int>(pick(rng, {1, 2})),
                   static_cast<int>(pick(rng, {1, 2}))};
  Instance in;
  in.inputs = {mode == PoolMode::kMax ? rnd_tie_safe(rng, {B, C, T, H, W})
                                      : rnd(rng, {B, C, T, H, W}, -1, 1)};
  in.fn = [mode, k](GradientTape<double>& tape,
                    const std::vector<Tensor<double>>& x) {
    return pool3d(tape, x[0], mode, k);
  };
  return in;
}

Instance make_group_norm(PhiloxRng& rng) {
  const std::int64_t B = pick(rng, {1, 2});
  const std::int64_t C = pick(rng, {2, 4, 6});
  const int groups = static_cast<int>(C % 4 == 0 ? pick(rng, {2, 4})
                                                 : pick(rng, {1, 2}));
  Instance in;
  in.inputs = {rnd(rng, {B, C, 3, 3, 3}, -2, 2), rnd(rng, {C}, 0.5, 1.5),
               rnd(rng, {C}, -0.5, 0.5)};
  in.fn = [groups](GradientTape<double>& tape,
                   const std::vector<Tensor<double>>& x) {
    return group_norm(tape, x[0], groups, x[1], x[2], 1e-5);
  };
  return in;
}

Instance make_relu(PhiloxRng& rng) {
  Instance in;
  in.inputs = {rnd_kink_safe(rng, {pick(rng, {1, 2}), 2, 3, 3, 3})};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return relu(tape, x[0]);
  };
  return in;
}

Instance make_sigmoid(PhiloxRng& rng) {
  Instance in;
  in.inputs = {rnd(rng, {pick(rng, {2, 3}), 4}, -4, 4)};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    // Rank-2 input exercises sigmoid through the generic path.
    return sigmoid(tape, x[0]);
  };
  return in;
}

Instance make_softmax(PhiloxRng& rng) {
  const std::int64_t B = pick(rng, {1, 2}), T = pick(rng, {4, 8});
  Instance in;
  in.inputs = {rnd(rng, {B, 1, T, 3, 3}, -3, 3)};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return softmax_temporal(tape, x[0]);
  };
  return in;
}

Instance make_linear(PhiloxRng& rng) {
  const std::int64_t N = pick(rng, {3, 6}), M = pick(rng, {2, 4});
  const bool batched = rng.uniform() < 0.5;
  Instance in;
  in.inputs = {batched ? rnd(rng, {pick(rng, {2, 3}), N}, -1, 1)
                       : rnd(rng, {N}, -1, 1),
               rnd(rng, {M, N}, -1, 1), rnd(rng, {M}, -1, 1)};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return linear(tape, x[0], x[1], x[2]);
  };
  return in;
}

Instance make_concat(PhiloxRng& rng) {
  const std::int64_t parts = pick(rng, {2, 3});
  Instance in;
  for (std::int64_t p = 0; p < parts; ++p)
    in.inputs.push_back(rnd(rng, {pick(rng, {1, 2}), 2, 3, 3}, -1, 1));
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return concat_channels(tape, x);
  };
  return in;
}

Instance make_reshape(PhiloxRng& rng) {
  Instance in;
  in.inputs = {rnd(rng, {2, 3, 4}, -1, 1)};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return reshape(tape, x[0], {4, 6});
  };
  return in;
}

Instance make_scale_add(PhiloxRng& rng) {
  const double ca = rng.uniform(-2.0, 2.0), cb = rng.uniform(-2.0, 2.0);
  Instance in;
  in.inputs = {rnd(rng, {3, 4}, -1, 1), rnd(rng, {3, 4}, -1, 1)};
  in.fn = [ca, cb](GradientTape<double>& tape,
                   const std::vector<Tensor<double>>& x) {
    return scale_add(tape, x[0], x[1], ca, cb);
  };
  return in;
}

Instance make_ce_loss(PhiloxRng& rng) {
  const std::int64_t B = pick(rng, {1, 2}), T = pick(rng, {4, 6});
  const std::int64_t H = pick(rng, {2, 3}), W = pick(rng, {2, 3});
  std::vector<BinIndexMap> targets;
  for (std::int64_t b = 0; b < B; ++b) {
    BinIndexMap m;
    m.nx = H;
    m.ny = W;
    m.bin.resize(static_cast<std::size_t>(H * W));
    for (auto& v : m.bin)
      v = static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(T)));
    targets.push_back(std::move(m));
  }
  Instance in;
  // Values well above the 1e-12 log floor keep 1/v finite and the probe
  // step far from the floor's gradient cutoff.
  in.inputs = {B == 1 ? rnd(rng, {1, T, H, W}, 0.2, 1.5)
                      : rnd(rng, {B, 1, T, H, W}, 0.2, 1.5)};
  in.fn = [targets](GradientTape<double>& tape,
                    const std::vector<Tensor<double>>& x) {
    return ce_loss(tape, x[0], targets);
  };
  return in;
}

/// Checkerboard plus small jitter: every pixel is a strict local extremum
/// of its map, so the signs of its incident differences all agree and the
/// analytic gradient never cancels to zero. (A cancelled entry would pit
/// pure roundoff noise in the central difference against the relative-error
/// floor.) Differences stay near 1, far from the |.| crease.
Tensor<double> rnd_checker(PhiloxRng& rng, std::int64_t batch, std::int64_t h,
                           std::int64_t w) {
  Shape shape = batch > 0 ? Shape{batch, h, w} : Shape{h, w};
  std::vector<double> data(static_cast<std::size_t>(numel(shape)));
  std::size_t k = 0;
  for (std::int64_t b = 0; b < std::max<std::int64_t>(batch, 1); ++b)
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j, ++k)
        data[k] = ((i + j) % 2 ? 0.5 : -0.5) + rng.uniform(-0.04, 0.04);
  return Tensor<double>::from_data(std::move(shape), std::move(data), true);
}

Instance make_tv_loss(PhiloxRng& rng) {
  const bool batched = rng.uniform() < 0.5;
  Instance in;
  in.inputs = {batched ? rnd_checker(rng, 2, 4, 4)
                       : rnd_checker(rng, 0, 5, 6)};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return tv_loss(tape, x[0]);
  };
  return in;
}

Instance make_softargmax_depth(PhiloxRng& rng) {
  const std::int64_t T = pick(rng, {4, 8});
  const std::int64_t H = pick(rng, {2, 3}), W = pick(rng, {2, 3});
  auto h = rnd(rng, {1, T, H, W}, 0.1, 1.0);
  // Normalize each pixel's temporal distribution; the 1e-5 probe step
  // stays inside the op's 1e-4 normalization tolerance.
  auto v = h.values();
  for (std::int64_t p = 0; p < H * W; ++p) {
    double s = 0.0;
    for (std::int64_t k = 0; k < T; ++k) s += v[k * H * W + p];
    for (std::int64_t k = 0; k < T; ++k) v[k * H * W + p] /= s;
  }
  Instance in;
  in.inputs = {h};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return softargmax_depth(tape, x[0], 80.0);
  };
  return in;
}

Instance make_adversarial(PhiloxRng& rng) {
  Instance in;
  // Probabilities kept inside (0.1, 0.9): far from the clamp boundaries,
  // so the logs stay smooth across the finite-difference probe.
  in.inputs = {rnd(rng, {3}, 0.1, 0.9), rnd(rng, {2}, 0.1, 0.9)};
  in.fn = [](GradientTape<double>& tape,
             const std::vector<Tensor<double>>& x) {
    return adversarial_loss(tape, x[0], x[1]);
  };
  return in;
}

}  // namespace

double max_gradient_error(const Fn& fn, std::vector<Tensor<double>> inputs,
                          double step, std::uint64_t projection_seed) {
  for (auto& t : inputs)
    if (t.requires_grad()) t.zero_grad();

  GradientTape<double> tape;
  Tensor<double> out = fn(tape, inputs);

  PhiloxRng prng(projection_seed);
  std::vector<double> w(static_cast<std::size_t>(out.size()));
  for (auto& v : w) v = prng.uniform(-1.0, 1.0);

  auto flat = reshape(tape, out, {out.size()});
  auto wrow = Tensor<double>::from_data({1, out.size()}, w);
  auto loss = linear(tape, flat, wrow, Tensor<double>::zeros({1}));
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (auto& t : inputs)
    analytic.emplace_back(t.requires_grad()
                              ? std::vector<double>(t.grad().begin(),
                                                    t.grad().end())
                              : std::vector<double>());

  const auto project = [&w](const Tensor<double>& o) {
    double s = 0.0;
    const auto vals = o.values();
    for (std::size_t i = 0; i < vals.size(); ++i) s += w[i] * vals[i];
    return s;
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    if (!t.requires_grad()) continue;
    auto vals = t.values();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double orig = vals[j];
      vals[j] = orig + step;
      GradientTape<double> t_plus;
      t_plus.set_recording(false);
      const double lp = project(fn(t_plus, inputs));
      vals[j] = orig - step;
      GradientTape<double> t_minus;
      t_minus.set_recording(false);
      const double lm = project(fn(t_minus, inputs));
      vals[j] = orig;
      const double fd = (lp - lm) / (2.0 * step);
      const double an = analytic[k][j];
      const double rel =
          std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

std::vector<GradCheckReport> run_gradient_suite(
    const GradCheckOptions& options) {
  using Builder = Instance (*)(PhiloxRng&);
  const std::pair<const char*, Builder> builders[] = {
      {"conv3d", &make_conv3d},
      {"deconv3d", &make_deconv3d},
      {"pool3d_max",
       +[](PhiloxRng& rng) { return make_pool(rng, PoolMode::kMax); }},
      {"pool3d_avg",
       +[](PhiloxRng& rng) { return make_pool(rng, PoolMode::kAverage); }},
      {"group_norm", &make_group_norm},
      {"relu", &make_relu},
      {"sigmoid", &make_sigmoid},
      {"softmax_temporal", &make_softmax},
      {"linear", &make_linear},
      {"concat_channels", &make_concat},
      {"reshape", &make_reshape},
      {"scale_add", &make_scale_add},
      {"ce_loss", &make_ce_loss},
      {"tv_loss", &make_tv_loss},
      {"adversarial_loss", &make_adversarial},
      {"softargmax_depth", &make_softargmax_depth},
  };

  std::vector<GradCheckReport> reports;
  std::uint64_t op_index = 0;
  for (const auto& [name, make] : builders) {
    ++op_index;
    PhiloxRng rng(options.seed, op_index);
    GradCheckReport r;
    r.op = name;
    r.instances = options.instances;
    for (int i = 0; i < options.instances; ++i) {
      Instance inst = make(rng);
      const double err =
          max_gradient_error(inst.fn, std::move(inst.inputs), options.step,
                             derive_seed(options.seed, op_index * 1000 + i));
      r.max_rel_err = std::max(r.max_rel_err, err);
    }
    r.pass = r.max_rel_err < options.tolerance;
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace photon_da
