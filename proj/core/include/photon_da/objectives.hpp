#pragma once

#include <vector>

#include "photon_da/tensor.hpp"
#include "photon_da/types.hpp"

namespace photon_da {

/// Default weight of the smoothness term in the supervised loss.
inline constexpr double kLambdaTv = 0.001;
/// Default weight of the domain-confusion term in the adaptation loss.
inline constexpr double kLambdaA = 0.1;

/// A scalar training objective on the tape plus its logged breakdown.
/// The components always recombine to the total: total = ce + lambda_tv*tv
/// (- lambda_a*adv when adaptation is active).
template <typename S>
struct LossValue {
  Tensor<S> total;
  double ce = 0.0;
  double tv = 0.0;
  double adv = 0.0;
};

/// Per-pixel negative log likelihood of the true bin, summed over pixels
/// and averaged over the batch. h_hat is [1,T,H,W] or [B,1,T,H,W] holding
/// per-pixel temporal distributions; targets holds one bin map per batch
/// item. Probabilities are floored at 1e-12 inside the log (zero gradient
/// where the floor is active). Rejects bins outside [0,T).
template <typename S>
Tensor<S> ce_loss(GradientTape<S>& tape, const Tensor<S>& h_hat,
                  const std::vector<BinIndexMap>& targets);

/// Total variation of a depth map tensor [H,W] or [B,H,W]: sum of absolute
/// differences over in-bounds horizontal and vertical neighbor pairs,
/// averaged over the batch. Backward routes the sign of each difference
/// (zero at exact ties).
template <typename S>
Tensor<S> tv_loss(GradientTape<S>& tape, const Tensor<S>& z_hat);

/// ce_loss + lambda_tv * tv_loss, with the breakdown recorded. z_hat must
/// be the differentiable depth read-out of h_hat for the smoothness term
/// to train the network end to end.
template <typename S>
LossValue<S> supervised_loss(GradientTape<S>& tape, const Tensor<S>& h_hat,
                             const std::vector<BinIndexMap>& targets,
                             const Tensor<S>& z_hat, double lambda_tv);

/// Domain-confusion objective: mean log d_src - mean log(1 - d_tgt), where
/// d_* are sigmoid outputs in (0,1) interpreted as the probability of the
/// TARGET domain. Minimized by the discriminator (drives d_src toward 0
/// and d_tgt toward 1); the feature path maximizes it through the
/// negatively weighted term of the total adaptation loss. Inputs are
/// clamped to [1e-7, 1-1e-7] before the logs (zero gradient when clamped).
template <typename S>
Tensor<S> adversarial_loss(GradientTape<S>& tape, const Tensor<S>& d_src,
                           const Tensor<S>& d_tgt);

/// supervised - lambda_a * adversarial. A lambda_a of exactly zero skips
/// the adversarial term entirely, so the result is bit-identical to the
/// supervised loss.
template <typename S>
Tensor<S> total_adaptation_loss(GradientTape<S>& tape,
                                const Tensor<S>& supervised,
                                const Tensor<S>& adversarial,
                                double lambda_a);

}  // namespace photon_da
