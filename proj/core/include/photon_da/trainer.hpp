#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "photon_da/objectives.hpp"
#include "photon_da/simulator.hpp"
#include "photon_da/stin.hpp"
#include "photon_da/tensor.hpp"
#include "photon_da/types.hpp"

namespace photon_da {

/// Optimization schedule shared by pretraining and adaptation.
struct TrainConfig {
  std::int64_t epochs = 1;       ///< pretraining passes over the labeled set
  std::int64_t batch_size = 1;   ///< pretraining minibatch size
  double lr = 0.001;             ///< Adam step size (both parameter groups)
  double lambda_tv = kLambdaTv;  ///< smoothness weight in the supervised loss
  double lambda_a = kLambdaA;    ///< domain-confusion weight (adaptation only)
  std::uint64_t seed = 0;        ///< drives shuffling and target sampling
  std::int64_t checkpoint_every = 0;  ///< epochs between hook calls; 0 = off
  std::int64_t max_adapt_iters = 30;  ///< adaptation passes over the source set
};

/// Rejects non-positive counts, non-finite or non-positive learning rates,
/// and negative loss weights.
void validate(const TrainConfig& cfg);

/// Adam optimizer state over a named subset of a parameter store. The subset
/// is fixed at construction; stepping never touches parameters outside it,
/// which is how the discriminator and the feature/reconstruction groups stay
/// partitioned during adversarial training.
template <typename S>
struct AdamState {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<std::string> paths;
  /// First and second moment buffers per owned path, zero-initialized.
  std::unordered_map<std::string, std::pair<std::vector<S>, std::vector<S>>>
      moments;

  AdamState() = default;
  /// Owns `owned` (each path must exist in `params`), moments start at zero.
  AdamState(const ParameterStore<S>& params, std::vector<std::string> owned,
            double lr = 0.001);
};

/// One Adam update on the owned parameters from their accumulated gradients.
/// With bias correction, the first step from fresh state moves each weight by
/// lr * g / (sqrt(g*g) + eps). All gradients are checked for finiteness
/// before any parameter is mutated; a non-finite gradient aborts the step
/// with a diagnostic naming the offending parameter. A zero gradient leaves
/// its parameter bit-exactly unchanged.
template <typename S>
void adam_step(ParameterStore<S>& params, AdamState<S>& state);

/// Builds the scalar training objective for one step on a fresh recording
/// tape. The closure reads whatever parameters it needs at call time, so a
/// later invocation observes earlier optimizer updates.
template <typename S>
using LossFn = std::function<Tensor<S>(GradientTape<S>&)>;

/// Zeroes every gradient in the store, evaluates `fn` on a recording tape,
/// backpropagates, and applies one adam_step to `state`'s owned subset.
/// Returns the loss value. A non-finite loss aborts before backward.
template <typename S>
double minimize_step(ParameterStore<S>& params, AdamState<S>& state,
                     const LossFn<S>& fn);

/// One adversarial round: the discriminator state takes a minimize_step on
/// `d_loss` first, then the feature/reconstruction state takes one on
/// `fr_loss`. Because `fr_loss` runs its forward pass after the first
/// update, it sees the already-updated discriminator. Returns the two loss
/// values (d_loss value, fr_loss value).
template <typename S>
std::pair<double, double> adversarial_iteration(ParameterStore<S>& params,
                                                AdamState<S>& d_state,
                                                AdamState<S>& fr_state,
                                                const LossFn<S>& d_loss,
                                                const LossFn<S>& fr_loss);

/// Paths in `params` whose names start with `prefix`, in creation order.
template <typename S>
std::vector<std::string> paths_with_prefix(const ParameterStore<S>& params,
                                           std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto& path : params.order)
    if (path.size() >= prefix.size() &&
        std::string_view(path).substr(0, prefix.size()) == prefix)
      out.push_back(path);
  return out;
}

/// Deep copy of every parameter (fresh storage, gradients enabled), so the
/// original store is never mutated by training on the clone.
template <typename S>
ParameterStore<S> clone_parameters(const ParameterStore<S>& src) {
  ParameterStore<S> out;
  for (const auto& path : src.order) {
    Tensor<S> t = src.at(path).detached();
    t.enable_grad();
    out.add(path, std::move(t));
  }
  return out;
}

/// A histogram cube with its ground-truth bin map (labeled regime).
struct LabeledSample {
  HistogramCube cube;
  BinIndexMap bins;
};

/// Training data for adaptation: labeled source samples plus unlabeled
/// target cubes. Target cubes carry no depth information anywhere.
struct DomainBatch {
  std::vector<LabeledSample> source;
  std::vector<HistogramCube> target;
};

/// One optimizer iteration in the training log. Pretraining rows carry zero
/// adv and NaN domain probabilities; adaptation rows log the values from the
/// feature/reconstruction step (i.e. against the already-updated
/// discriminator).
struct TraceRow {
  std::int64_t iteration = 0;
  double ce = 0.0;
  double tv = 0.0;
  double adv = 0.0;
  double total = 0.0;
  double d_src = std::numeric_limits<double>::quiet_NaN();
  double d_tgt = std::numeric_limits<double>::quiet_NaN();
};

/// CSV with header "iteration,ce,tv,adv,total,d_src,d_tgt", one row per
/// iteration, 10 significant digits, each line newline-terminated.
std::string trace_to_csv(const std::vector<TraceRow>& rows);

/// Called after every checkpoint_every-th epoch with (epoch index, current
/// parameters). Writing them to disk is the caller's business.
using CheckpointHook =
    std::function<void(std::int64_t, const ParameterStore<float>&)>;

/// Trained parameters plus the full iteration trace and per-epoch mean loss.
struct TrainResult {
  ParameterStore<float> params;
  std::vector<TraceRow> trace;
  std::vector<double> epoch_loss;
};

/// Supervised training on the labeled set: per epoch, shuffles the sample
/// order (deterministically from cfg.seed and the epoch index), forms
/// minibatches of cfg.batch_size (last batch may be smaller), and minimizes
/// ce + lambda_tv * tv over the extractor and reconstructor parameters.
/// The discriminator is untouched. Rejects an empty dataset and samples
/// whose geometry disagrees with each other or with the network
/// configuration (t_bins, patch-sized spatial extent).
TrainResult pretrain(const ParameterStore<float>& initial,
                     const std::vector<LabeledSample>& data,
                     const TrainConfig& cfg, const StinConfig& net,
                     const CheckpointHook& hook = {});

/// Domain-adversarial adaptation from a pretrained store: re-initializes the
/// discriminator afresh (seeded from cfg.seed), then for max_adapt_iters
/// epochs walks the shuffled source set; each source sample is paired with a
/// uniformly drawn target sample (with replacement, independent stream).
/// Per pair the discriminator minimizes the domain-confusion loss, then the
/// extractor+reconstructor group minimizes supervised - lambda_a * confusion
/// on a fresh forward pass against the updated discriminator. Separate Adam
/// states per group. Target cubes never enter the supervised terms. A total
/// loss exceeding 10x the initial total for 50 consecutive iterations aborts
/// with the recent trace in the diagnostic. With lambda_a = 0 the
/// extractor/reconstructor trajectory is bit-identical to continued
/// pretraining at batch size 1 and the same seed.
TrainResult dann_adapt(const ParameterStore<float>& pretrained,
                       const DomainBatch& data, const TrainConfig& cfg,
                       const StinConfig& net, const CheckpointHook& hook = {});

}  // namespace photon_da
