#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "photon_da/ops.hpp"
#include "photon_da/tensor.hpp"

namespace photon_da {

/// Geometry of the spatiotemporal reconstruction network: a trunk of
/// four-branch conv blocks with temporal-halving max pools, a
/// domain-probability head, and a deconvolutional upsampling path back to
/// full temporal resolution.
struct StinConfig {
  std::int64_t t_bins = 1024;  ///< temporal bins of the input cube
  int n_t = 7;                 ///< temporal kernel of branch convs
  int n_s = 3;                 ///< spatial kernel of branch convs
  std::vector<int> trunk_channels = {4, 8, 12, 16, 24, 32, 40, 48};
  int pools = 7;  ///< number of temporal-halving max pools
  std::array<std::int64_t, 2> patch = {32, 32};  ///< (H, W) training patch

  // Derived domain-head geometry, filled by with_derived(): the average
  // pool kernel, the flattened width, and the two hidden layer widths.
  std::array<int, 3> head_pool = {0, 0, 0};
  std::int64_t head_flatten = 0;
  std::int64_t head_fc1 = 0;
  std::int64_t head_fc2 = 0;

  /// Validates the raw fields and returns a copy with the derived
  /// domain-head geometry filled in. The pool covers an 8x8 spatial tile
  /// for 32x32 patches and the full spatial extent otherwise; hidden
  /// widths are flatten/12 and min(128, flatten/48), floored at 1.
  StinConfig with_derived() const;

  void validate() const;

  /// Full-scale configuration: T=1024 on 32x32 patches.
  static StinConfig full_scale();
  /// Desk-scale configuration: T=128 on 16x16 patches (same trunk).
  static StinConfig desk_scale();
};

/// Named parameter collection with stable creation order. Paths follow
/// "extractor.block3.branch2.conv1.weight",
/// "reconstructor.deconv5.gamma", "discriminator.fc2.bias", ...
template <typename S>
struct ParameterStore {
  std::vector<std::string> order;
  std::unordered_map<std::string, Tensor<S>> values;

  Tensor<S>& add(const std::string& path, Tensor<S> t) {
    if (values.count(path))
      throw ValidationError("ParameterStore: duplicate path " + path);
    order.push_back(path);
    return values.emplace(path, std::move(t)).first->second;
  }
  Tensor<S>& at(const std::string& path) {
    auto it = values.find(path);
    if (it == values.end())
      throw ValidationError("ParameterStore: unknown path " + path);
    return it->second;
  }
  const Tensor<S>& at(const std::string& path) const {
    auto it = values.find(path);
    if (it == values.end())
      throw ValidationError("ParameterStore: unknown path " + path);
    return it->second;
  }
  std::int64_t total_elements() const {
    std::int64_t n = 0;
    for (const auto& path : order) n += at(path).size();
    return n;
  }
};

/// Creates every parameter of the network in architectural order, weights
/// and biases drawn uniformly from ±sqrt(1/fan_in) on a single
/// counter-based stream, norm scales at 1 and shifts at 0.
template <typename S>
ParameterStore<S> init_stin_parameters(const StinConfig& cfg,
                                       std::uint64_t seed);

/// Number of scalar parameters implied by the configuration.
std::int64_t stin_parameter_count(const StinConfig& cfg);

/// (name, shape) of every intermediate activation for a single input cube,
/// computed from the configuration alone. Names: extractor.block1,
/// extractor.pool1, ..., discriminator.flatten, reconstructor.deconv1, ...
std::vector<std::pair<std::string, Shape>> stin_layer_shapes(
    const StinConfig& cfg);

/// Four-branch spatiotemporal block: parallel conv chains of widths
/// c_out/4 (1x1x1 bottleneck first, temporal n_t and spatial n_s factors
/// in branch-specific orders), each conv followed by group norm and relu,
/// concatenated along channels. Shape-preserving in (T, H, W).
template <typename S>
Tensor<S> st_block(GradientTape<S>& tape, const Tensor<S>& input,
                   const ParameterStore<S>& params, const std::string& prefix,
                   const StinConfig& cfg, int c_out);

/// Trunk: alternating st_block / max-pool(2,1,1) over trunk_channels with
/// the final block unpooled. [B,1,T,H,W] -> [B,C_last,T/2^pools,H,W].
template <typename S>
Tensor<S> feature_extract(GradientTape<S>& tape, const Tensor<S>& input,
                          const ParameterStore<S>& params,
                          const StinConfig& cfg);

/// Domain head: average pool, flatten, two hidden relu layers, sigmoid.
/// Returns the probability that each latent came from the target domain,
/// shape [B].
template <typename S>
Tensor<S> discriminate(GradientTape<S>& tape, const Tensor<S>& latent,
                       const ParameterStore<S>& params, const StinConfig& cfg);

/// Upsampling path: seven stride-2 temporal deconvs (each + group norm +
/// relu), a 1x1x1 projection to one channel, and a temporal softmax.
/// [B,C_last,T/2^pools,H,W] -> [B,1,T,H,W], summing to 1 per pixel.
template <typename S>
Tensor<S> reconstruct(GradientTape<S>& tape, const Tensor<S>& latent,
                      const ParameterStore<S>& params, const StinConfig& cfg);

/// reconstruct(feature_extract(cube)): per-pixel temporal distribution
/// with the input's shape.
template <typename S>
Tensor<S> stin_forward(GradientTape<S>& tape, const Tensor<S>& cube,
                       const ParameterStore<S>& params, const StinConfig& cfg);

}  // namespace photon_da
