#include "photon_da/stin.hpp"

#include <cmath>
#include <sstream>

#include "photon_da/rng.hpp"

namespace photon_da {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

/// Channel groups used by every normalization layer: 4 when the width
/// allows equal groups, otherwise a single group.
int norm_groups(std::int64_t channels) {
  return channels % 4 == 0 ? 4 : 1;
}

struct ConvSpec {
  int kt, kh, kw;
};

/// Kernel chain of one branch: a 1x1x1 bottleneck first, then temporal
/// (n_t x 1 x 1) and spatial (1 x n_s x n_s) factors in branch-specific
/// orders of increasing depth.
std::vector<ConvSpec> branch_plan(int branch, int n_t, int n_s) {
  switch (branch) {
    case 1:
      return {{1, 1, 1}};
    case 2:
      return {{1, 1, 1}, {n_t, 1, 1}, {1, n_s, n_s}};
    case 3:
      return {{1, 1, 1}, {1, n_s, n_s}, {n_t, 1, 1}};
    default:
      return {{1, 1, 1}, {1, n_s, n_s}, {1, n_s, n_s}, {n_t, 1, 1}};
  }
}

/// One learnable unit: a conv, deconv, or fully connected layer, plus an
/// optional channel norm. Enumerated in architectural order; this single
/// walk defines parameter creation order, paths, and the total count.
struct UnitSpec {
  std::string path;
  Shape weight;             // conv [co,ci,kt,kh,kw]; deconv [ci,co,...]
  std::int64_t bias_len;    // output channels / features
  std::int64_t norm_len;    // 0 when the unit has no norm
  std::int64_t fan_in;
};

std::vector<UnitSpec> unit_specs(const StinConfig& raw) {
  const StinConfig cfg = raw.with_derived();
  std::vector<UnitSpec> units;

  const auto& tc = cfg.trunk_channels;
  std::int64_t c_in = 1;
  for (std::size_t k = 0; k < tc.size(); ++k) {
    const std::int64_t c_out = tc[k];
    const std::int64_t c_b = c_out / 4;
    for (int b = 1; b <= 4; ++b) {
      const auto plan = branch_plan(b, cfg.n_t, cfg.n_s);
      std::int64_t in = c_in;
      for (std::size_t j = 0; j < plan.size(); ++j) {
        const auto& ks = plan[j];
        UnitSpec u;
        u.path = "extractor.block" + std::to_string(k + 1) + ".branch" +
                 std::to_string(b) + ".conv" + std::to_string(j + 1);
        u.weight = {c_b, in, ks.kt, ks.kh, ks.kw};
        u.bias_len = c_b;
        u.norm_len = c_b;
        u.fan_in = in * ks.kt * ks.kh * ks.kw;
        units.push_back(std::move(u));
        in = c_b;
      }
    }
    c_in = c_out;
  }

  // Upsampling path: one temporal-doubling deconv per pool, walking the
  // trunk widths back down.
  const int n_s = cfg.n_s;
  for (std::size_t i = 0; i + 1 < tc.size(); ++i) {
    const std::int64_t ci = tc[tc.size() - 1 - i];
    const std::int64_t co = tc[tc.size() - 2 - i];
    UnitSpec u;
    u.path = "reconstructor.deconv" + std::to_string(i + 1);
    u.weight = {ci, co, 6, n_s, n_s};
    u.bias_len = co;
    u.norm_len = co;
    u.fan_in = ci * 6 * n_s * n_s;
    units.push_back(std::move(u));
  }
  {
    UnitSpec u;
    u.path = "reconstructor.head";
    u.weight = {1, tc.front(), 1, 1, 1};
    u.bias_len = 1;
    u.norm_len = 0;
    u.fan_in = tc.front();
    units.push_back(std::move(u));
  }

  const std::int64_t widths[4] = {cfg.head_flatten, cfg.head_fc1,
                                  cfg.head_fc2, 1};
  for (int i = 0; i < 3; ++i) {
    UnitSpec u;
    u.path = "discriminator.fc" + std::to_string(i + 1);
    u.weight = {widths[i + 1], widths[i]};
    u.bias_len = widths[i + 1];
    u.norm_len = 0;
    u.fan_in = widths[i];
    units.push_back(std::move(u));
  }
  return units;
}

/// conv3d -> group_norm -> relu with parameters under `path`.
template <typename S>
Tensor<S> conv_unit(GradientTape<S>& tape, const Tensor<S>& x,
                    const ParameterStore<S>& params, const std::string& path,
                    Dims3 padding) {
  auto y = conv3d(tape, x, params.at(path + ".weight"),
                  params.at(path + ".bias"), padding);
  const auto& gamma = params.at(path + ".gamma");
  auto n = group_norm(tape, y, norm_groups(gamma.size()), gamma,
                      params.at(path + ".beta"));
  return relu(tape, n);
}

template <typename S>
Tensor<S> st_block_impl(GradientTape<S>& tape, const Tensor<S>& input,
                        const ParameterStore<S>& params,
                        const std::string& prefix, const StinConfig& cfg,
                        int c_out) {
  if (c_out < 4 || c_out % 4 != 0) {
    std::ostringstream os;
    os << "st_block: output width " << c_out
       << " must be a positive multiple of 4 (four equal branches)";
    fail(os.str());
  }
  std::vector<Tensor<S>> branches;
  branches.reserve(4);
  for (int b = 1; b <= 4; ++b) {
    const auto plan = branch_plan(b, cfg.n_t, cfg.n_s);
    Tensor<S> cur = input;
    for (std::size_t j = 0; j < plan.size(); ++j) {
      const auto& ks = plan[j];
      const Dims3 pad = {(ks.kt - 1) / 2, (ks.kh - 1) / 2, (ks.kw - 1) / 2};
      cur = conv_unit(tape, cur,
                      params, prefix + ".branch" + std::to_string(b) +
                                  ".conv" + std::to_string(j + 1),
                      pad);
    }
    branches.push_back(cur);
  }
  return concat_channels(tape, branches);
}

template <typename S>
Tensor<S> feature_extract_impl(GradientTape<S>& tape, const Tensor<S>& input,
                               const ParameterStore<S>& params,
                               const StinConfig& cfg) {
  cfg.validate();
  const auto& shape = input.shape();
  if (shape.size() != 4 && shape.size() != 5)
    fail("feature_extract: input must be [C,T,H,W] or [B,C,T,H,W], got " +
         shape_str(shape));
  const std::size_t c_axis = shape.size() - 4;
  if (shape[c_axis] != 1)
    fail("feature_extract: input must have one channel, got " +
         shape_str(shape));
  const std::int64_t t_len = shape[c_axis + 1];
  if (t_len % (std::int64_t(1) << cfg.pools) != 0) {
    std::ostringstream os;
    os << "feature_extract: temporal length " << t_len
       << " is not divisible by 2^" << cfg.pools;
    fail(os.str());
  }

  Tensor<S> cur = input;
  for (std::size_t k = 0; k < cfg.trunk_channels.size(); ++k) {
    cur = st_block_impl(tape, cur, params,
                        "extractor.block" + std::to_string(k + 1), cfg,
                        cfg.trunk_channels[k]);
    if (static_cast<int>(k) < cfg.pools)
      cur = pool3d(tape, cur, PoolMode::kMax, {2, 1, 1});
  }
  return cur;
}

template <typename S>
Tensor<S> discriminate_impl(GradientTape<S>& tape, const Tensor<S>& latent,
                            const ParameterStore<S>& params,
                            const StinConfig& raw) {
  const StinConfig cfg = raw.with_derived();
  const auto& shape = latent.shape();
  if (shape.size() != 4 && shape.size() != 5)
    fail("discriminate: latent must be [C,T,H,W] or [B,C,T,H,W], got " +
         shape_str(shape));
  const bool batched = shape.size() == 5;
  const std::int64_t batch = batched ? shape[0] : 1;

  auto pooled = pool3d(tape, latent, PoolMode::kAverage, cfg.head_pool);
  const std::int64_t flat = pooled.size() / batch;
  if (flat != cfg.head_flatten) {
    std::ostringstream os;
    os << "discriminate: latent " << shape_str(shape) << " flattens to "
       << flat << " features, expected " << cfg.head_flatten;
    fail(os.str());
  }
  auto v = reshape(tape, pooled,
                   batched ? Shape{batch, flat} : Shape{flat});
  auto h1 = relu(tape, linear(tape, v, params.at("discriminator.fc1.weight"),
                              params.at("discriminator.fc1.bias")));
  auto h2 = relu(tape, linear(tape, h1,
                              params.at("discriminator.fc2.weight"),
                              params.at("discriminator.fc2.bias")));
  auto h3 = linear(tape, h2, params.at("discriminator.fc3.weight"),
                   params.at("discriminator.fc3.bias"));
  auto p = sigmoid(tape, h3);
  return reshape(tape, p, batched ? Shape{batch} : Shape{1});
}

template <typename S>
Tensor<S> reconstruct_impl(GradientTape<S>& tape, const Tensor<S>& latent,
                           const ParameterStore<S>& params,
                           const StinConfig& cfg) {
  cfg.validate();
  const auto& shape = latent.shape();
  if (shape.size() != 4 && shape.size() != 5)
    fail("reconstruct: latent must be [C,T,H,W] or [B,C,T,H,W], got " +
         shape_str(shape));
  const std::size_t c_axis = shape.size() - 4;
  const auto& tc = cfg.trunk_channels;
  if (shape[c_axis] != tc.back()) {
    std::ostringstream os;
    os << "reconstruct: latent " << shape_str(shape) << " should have "
       << tc.back() << " channels";
    fail(os.str());
  }

  const int sp = (cfg.n_s - 1) / 2;
  Tensor<S> cur = latent;
  for (std::size_t i = 0; i + 1 < tc.size(); ++i) {
    const std::string path = "reconstructor.deconv" + std::to_string(i + 1);
    cur = deconv3d(tape, cur, params.at(path + ".weight"),
                   params.at(path + ".bias"), {2, 1, 1}, {2, sp, sp});
    const auto& gamma = params.at(path + ".gamma");
    cur = relu(tape, group_norm(tape, cur, norm_groups(gamma.size()), gamma,
                                params.at(path + ".beta")));
  }
  cur = conv3d(tape, cur, params.at("reconstructor.head.weight"),
               params.at("reconstructor.head.bias"), {0, 0, 0});
  return softmax_temporal(tape, cur);
}

}  // namespace

void StinConfig::validate() const {
  std::ostringstream os;
  if (t_bins < 1) {
    os << "StinConfig: t_bins must be positive, got " << t_bins;
    fail(os.str());
  }
  if (trunk_channels.empty()) fail("StinConfig: trunk_channels is empty");
  for (int c : trunk_channels)
    if (c < 4 || c % 4 != 0) {
      os << "StinConfig: trunk width " << c
         << " must be a positive multiple of 4";
      fail(os.str());
    }
  if (pools < 0 || pools > 32) {
    os << "StinConfig: pools must lie in [0, 32], got " << pools;
    fail(os.str());
  }
  if (t_bins % (std::int64_t(1) << pools) != 0) {
    os << "StinConfig: t_bins " << t_bins << " is not divisible by 2^"
       << pools;
    fail(os.str());
  }
  if (n_t < 1 || n_t % 2 == 0 || n_s < 1 || n_s % 2 == 0) {
    os << "StinConfig: kernels must be odd and positive, got n_t=" << n_t
       << " n_s=" << n_s;
    fail(os.str());
  }
  if (patch[0] < 1 || patch[1] < 1) {
    os << "StinConfig: patch must be positive, got " << patch[0] << " x "
       << patch[1];
    fail(os.str());
  }
}

StinConfig StinConfig::with_derived() const {
  validate();
  StinConfig out = *this;
  const std::int64_t t_latent = t_bins >> pools;
  const std::int64_t h = patch[0], w = patch[1];
  const std::int64_t ph = (h == 32 && w == 32) ? 8 : h;
  const std::int64_t pw = (h == 32 && w == 32) ? 8 : w;
  if (h % ph != 0 || w % pw != 0) {
    std::ostringstream os;
    os << "StinConfig: patch " << h << " x " << w
       << " is not divisible by the head pool " << ph << " x " << pw;
    fail(os.str());
  }
  out.head_pool = {1, static_cast<int>(ph), static_cast<int>(pw)};
  out.head_flatten =
      trunk_channels.back() * t_latent * (h / ph) * (w / pw);
  out.head_fc1 = std::max<std::int64_t>(1, out.head_flatten / 12);
  out.head_fc2 =
      std::min<std::int64_t>(128, std::max<std::int64_t>(1, out.head_flatten / 48));
  return out;
}

StinConfig StinConfig::full_scale() {
  return StinConfig{}.with_derived();
}

StinConfig StinConfig::desk_scale() {
  StinConfig c;
  c.t_bins = 128;
  c.patch = {16, 16};
  return c.with_derived();
}

std::int64_t stin_parameter_count(const StinConfig& cfg) {
  std::int64_t n = 0;
  for (const auto& u : unit_specs(cfg))
    n += numel(u.weight) + u.bias_len + 2 * u.norm_len;
  return n;
}

std::vector<std::pair<std::string, Shape>> stin_layer_shapes(
    const StinConfig& raw) {
  const StinConfig cfg = raw.with_derived();
  std::vector<std::pair<std::string, Shape>> rows;
  const std::int64_t h = cfg.patch[0], w = cfg.patch[1];

  std::int64_t t = cfg.t_bins;
  const auto& tc = cfg.trunk_channels;
  for (std::size_t k = 0; k < tc.size(); ++k) {
    rows.emplace_back("extractor.block" + std::to_string(k + 1),
                      Shape{tc[k], t, h, w});
    if (static_cast<int>(k) < cfg.pools) {
      t /= 2;
      rows.emplace_back("extractor.pool" + std::to_string(k + 1),
                        Shape{tc[k], t, h, w});
    }
  }

  rows.emplace_back("discriminator.pool",
                    Shape{tc.back(), t, h / cfg.head_pool[1],
                          w / cfg.head_pool[2]});
  rows.emplace_back("discriminator.flatten", Shape{cfg.head_flatten});
  rows.emplace_back("discriminator.fc1", Shape{cfg.head_fc1});
  rows.emplace_back("discriminator.fc2", Shape{cfg.head_fc2});
  rows.emplace_back("discriminator.fc3", Shape{1});

  std::int64_t tr = t;
  for (std::size_t i = 0; i + 1 < tc.size(); ++i) {
    tr *= 2;
    rows.emplace_back("reconstructor.deconv" + std::to_string(i + 1),
                      Shape{tc[tc.size() - 2 - i], tr, h, w});
  }
  rows.emplace_back("reconstructor.head", Shape{1, tr, h, w});
  return rows;
}

template <typename S>
ParameterStore<S> init_stin_parameters(const StinConfig& cfg,
                                       std::uint64_t seed) {
  ParameterStore<S> store;
  PhiloxRng rng(seed);
  for (const auto& u : unit_specs(cfg)) {
    const double bound = std::sqrt(1.0 / static_cast<double>(u.fan_in));
    auto w = Tensor<S>::zeros(u.weight);
    for (auto& v : w.values())
      v = static_cast<S>(rng.uniform(-bound, bound));
    store.add(u.path + ".weight", std::move(w));
    auto b = Tensor<S>::zeros({u.bias_len});
    for (auto& v : b.values())
      v = static_cast<S>(rng.uniform(-bound, bound));
    store.add(u.path + ".bias", std::move(b));
    if (u.norm_len > 0) {
      store.add(u.path + ".gamma",
                Tensor<S>::full({u.norm_len}, static_cast<S>(1)));
      store.add(u.path + ".beta", Tensor<S>::zeros({u.norm_len}));
    }
  }
  return store;
}

template <typename S>
Tensor<S> st_block(GradientTape<S>& tape, const Tensor<S>& input,
                   const ParameterStore<S>& params, const std::string& prefix,
                   const StinConfig& cfg, int c_out) {
  return st_block_impl(tape, input, params, prefix, cfg, c_out);
}

template <typename S>
Tensor<S> feature_extract(GradientTape<S>& tape, const Tensor<S>& input,
                          const ParameterStore<S>& params,
                          const StinConfig& cfg) {
  return feature_extract_impl(tape, input, params, cfg);
}

template <typename S>
Tensor<S> discriminate(GradientTape<S>& tape, const Tensor<S>& latent,
                       const ParameterStore<S>& params,
                       const StinConfig& cfg) {
  return discriminate_impl(tape, latent, params, cfg);
}

template <typename S>
Tensor<S> reconstruct(GradientTape<S>& tape, const Tensor<S>& latent,
                      const ParameterStore<S>& params, const StinConfig& cfg) {
  return reconstruct_impl(tape, latent, params, cfg);
}

template <typename S>
Tensor<S> stin_forward(GradientTape<S>& tape, const Tensor<S>& cube,
                       const ParameterStore<S>& params,
                       const StinConfig& cfg) {
  return reconstruct_impl(tape, feature_extract_impl(tape, cube, params, cfg),
                          params, cfg);
}

#define PHOTON_DA_DEFINE_STIN(S)                                             \
  template ParameterStore<S> init_stin_parameters<S>(const StinConfig&,      \
                                                     std::uint64_t);         \
  template Tensor<S> st_block<S>(GradientTape<S>&, const Tensor<S>&,         \
                                 const ParameterStore<S>&,                   \
                                 const std::string&, const StinConfig&,      \
                                 int);                                       \
  template Tensor<S> feature_extract<S>(GradientTape<S>&, const Tensor<S>&,  \
                                        const ParameterStore<S>&,            \
                                        const StinConfig&);                  \
  template Tensor<S> discriminate<S>(GradientTape<S>&, const Tensor<S>&,     \
                                     const ParameterStore<S>&,               \
                                     const StinConfig&);                     \
  template Tensor<S> reconstruct<S>(GradientTape<S>&, const Tensor<S>&,      \
                                    const ParameterStore<S>&,                \
                                    const StinConfig&);                      \
  template Tensor<S> stin_forward<S>(GradientTape<S>&, const Tensor<S>&,     \
                                     const ParameterStore<S>&,               \
                                     const StinConfig&);

PHOTON_DA_DEFINE_STIN(float)
PHOTON_DA_DEFINE_STIN(double)

#undef PHOTON_DA_DEFINE_STIN

}  // namespace photon_da
