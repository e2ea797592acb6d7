#pragma once

#include <array>
#include <vector>

#include "photon_da/tensor.hpp"

namespace photon_da {

/// Extents over the (temporal, height, width) axes of a volume, used for
/// kernel sizes, strides, and paddings.
using Dims3 = std::array<int, 3>;

enum class PoolMode { kMax, kAverage };
enum class Activation { kRelu, kSigmoid, kSoftmaxTemporal };

// Volumes are [C, T, H, W] or batched [B, C, T, H, W], row-major.
// Convolution weights are [C_out, C_in, kT, kH, kW]; transposed-convolution
// weights are [C_in, C_out, kT, kH, kW]; biases are [C_out].

// ---- shape arithmetic ----------------------------------------------------
// Pure functions shared by the kernels, the network builder, and the shape
// conformance tests. They validate and throw the same errors as the kernels.

Shape conv3d_output_shape(const Shape& input, const Shape& weight,
                          const Dims3& padding);
Shape deconv3d_output_shape(const Shape& input, const Shape& weight,
                            const Dims3& stride, const Dims3& padding);
Shape pool3d_output_shape(const Shape& input, const Dims3& kernel);

// ---- differentiable operations --------------------------------------------

/// Cross-correlation with stride 1 and zero padding.
template <typename S>
Tensor<S> conv3d(GradientTape<S>& tape, const Tensor<S>& input,
                 const Tensor<S>& weight, const Tensor<S>& bias,
                 const Dims3& padding);

/// Transposed convolution (the adjoint of conv3d in its linear part):
/// output extent per axis is (L-1)*stride - 2*padding + kernel.
template <typename S>
Tensor<S> deconv3d(GradientTape<S>& tape, const Tensor<S>& input,
                   const Tensor<S>& weight, const Tensor<S>& bias,
                   const Dims3& stride, const Dims3& padding);

/// Non-overlapping max or average pooling; each kernel extent must divide
/// the corresponding input extent. Max ties resolve to the first element in
/// scan order.
template <typename S>
Tensor<S> pool3d(GradientTape<S>& tape, const Tensor<S>& input, PoolMode mode,
                 const Dims3& kernel);

/// Group normalization over (channels-in-group, T, H, W) per sample, with
/// per-channel affine parameters gamma and beta.
template <typename S>
Tensor<S> group_norm(GradientTape<S>& tape, const Tensor<S>& input, int groups,
                     const Tensor<S>& gamma, const Tensor<S>& beta,
                     S eps = S(1e-5));

template <typename S>
Tensor<S> relu(GradientTape<S>& tape, const Tensor<S>& input);

template <typename S>
Tensor<S> sigmoid(GradientTape<S>& tape, const Tensor<S>& input);

/// Softmax along the temporal axis of a single-channel volume
/// [B?, 1, T, H, W], computed per (sample, pixel) with max subtraction.
template <typename S>
Tensor<S> softmax_temporal(GradientTape<S>& tape, const Tensor<S>& input);

template <typename S>
Tensor<S> activation(GradientTape<S>& tape, const Tensor<S>& input,
                     Activation kind);

/// Affine map out = weight @ input + bias for input [n] or [B, n],
/// weight [m, n], bias [m].
template <typename S>
Tensor<S> linear(GradientTape<S>& tape, const Tensor<S>& input,
                 const Tensor<S>& weight, const Tensor<S>& bias);

/// Concatenation along the channel axis; all other extents must agree.
template <typename S>
Tensor<S> concat_channels(GradientTape<S>& tape,
                          const std::vector<Tensor<S>>& parts);

/// Element-order-preserving shape change (same element count).
template <typename S>
Tensor<S> reshape(GradientTape<S>& tape, const Tensor<S>& input, Shape target);

/// Elementwise ca*a + cb*b over same-shape tensors.
template <typename S>
Tensor<S> scale_add(GradientTape<S>& tape, const Tensor<S>& a,
                    const Tensor<S>& b, S ca, S cb);

}  // namespace photon_da
