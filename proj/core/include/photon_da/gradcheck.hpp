#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "photon_da/tensor.hpp"

namespace photon_da {

struct GradCheckOptions {
  int instances = 20;       ///< randomized instances per operation
  double step = 1e-5;       ///< central-difference step
  double tolerance = 1e-4;  ///< maximum accepted relative error
  std::uint64_t seed = 20260816;
};

struct GradCheckReport {
  std::string op;
  int instances = 0;
  double max_rel_err = 0.0;
  bool pass = false;
};

/// Builds a scalar loss by projecting fn's output against fixed random
/// weights, then compares every tape gradient of `inputs` against central
/// finite differences of that loss. Returns the worst relative error,
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-6).
///
/// fn must be a pure function of `inputs` (same bits in, same bits out);
/// gradients are checked for every input tensor marked requires_grad.
double max_gradient_error(
    const std::function<Tensor<double>(GradientTape<double>&,
                                       const std::vector<Tensor<double>>&)>& fn,
    std::vector<Tensor<double>> inputs, double step,
    std::uint64_t projection_seed);

/// Runs the finite-difference suite over every differentiable operation in
/// the library, in double precision, on randomized small tensors. Inputs
/// near non-differentiable points (relu kinks, pooling ties, absolute-value
/// creases) are nudged away by more than the probe step so the subgradient
/// convention is never sampled.
std::vector<GradCheckReport> run_gradient_suite(
    const GradCheckOptions& options = {});

}  // namespace photon_da
