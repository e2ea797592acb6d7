#include "photon_da/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "photon_da/errors.hpp"
#include "photon_da/inference.hpp"
#include "photon_da/rng.hpp"

namespace photon_da {

namespace {

[[noreturn]] void fail(const std::string& message) {
  throw ValidationError(message);
}

// Seed salts keeping the discriminator re-initialization and the target
// sampling stream independent of the per-epoch shuffling streams.
constexpr std::uint64_t kDiscriminatorInitSalt = 0xd15cu;
constexpr std::uint64_t kTargetDrawSalt = 0x7a72u;

// How many consecutive over-threshold iterations count as divergence, and
// the loss blow-up factor relative to the first iteration.
constexpr int kDivergencePatience = 50;
constexpr double kDivergenceFactor = 10.0;

std::vector<std::int64_t> shuffled_indices(std::int64_t n, std::uint64_t seed,
                                           std::int64_t epoch) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), std::int64_t{0});
  PhiloxRng rng(seed, static_cast<std::uint64_t>(epoch));
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(
        rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

void check_cube_geometry(const HistogramCube& cube, const StinConfig& net,
                         const std::string& what, std::int64_t index) {
  if (cube.t_bins != net.t_bins || cube.nx != net.patch[0] ||
      cube.ny != net.patch[1])
    fail(what + " sample " + std::to_string(index) + " has geometry [" +
         std::to_string(cube.t_bins) + ", " + std::to_string(cube.nx) + ", " +
         std::to_string(cube.ny) + "], expected [" +
         std::to_string(net.t_bins) + ", " + std::to_string(net.patch[0]) +
         ", " + std::to_string(net.patch[1]) + "] from the network config");
  if (static_cast<std::int64_t>(cube.counts.size()) !=
      cube.t_bins * cube.nx * cube.ny)
    fail(what + " sample " + std::to_string(index) + " has " +
         std::to_string(cube.counts.size()) + " counts for geometry [" +
         std::to_string(cube.t_bins) + ", " + std::to_string(cube.nx) + ", " +
         std::to_string(cube.ny) + "]");
}

double checked_delta(const HistogramCube& cube, double delta,
                     const std::string& what, std::int64_t index) {
  const double d = cube.meta.delta_ps;
  if (!(d > 0.0) || !std::isfinite(d))
    fail(what + " sample " + std::to_string(index) +
         " has non-positive bin width " + std::to_string(d));
  if (delta > 0.0 && d != delta)
    fail(what + " sample " + std::to_string(index) + " has bin width " +
         std::to_string(d) + " ps, others use " + std::to_string(delta));
  return d;
}

// Batch of histogram cubes as a float tensor [B, 1, T, H, W]; cube counts
// are already t-major row-major, so each sample is one contiguous copy.
Tensor<float> batch_tensor(const std::vector<const HistogramCube*>& cubes) {
  const std::int64_t b = static_cast<std::int64_t>(cubes.size());
  const std::int64_t t = cubes[0]->t_bins;
  const std::int64_t h = cubes[0]->nx;
  const std::int64_t w = cubes[0]->ny;
  Tensor<float> out = Tensor<float>::zeros({b, 1, t, h, w});
  auto values = out.values();
  const std::int64_t stride = t * h * w;
  for (std::int64_t k = 0; k < b; ++k)
    std::transform(cubes[static_cast<std::size_t>(k)]->counts.begin(),
                   cubes[static_cast<std::size_t>(k)]->counts.end(),
                   values.begin() + k * stride,
                   [](std::uint32_t c) { return static_cast<float>(c); });
  return out;
}

std::vector<std::string> feature_reconstruction_paths(
    const ParameterStore<float>& params) {
  std::vector<std::string> paths = paths_with_prefix(params, "extractor.");
  for (auto& path : paths_with_prefix(params, "reconstructor."))
    paths.push_back(std::move(path));
  if (paths.empty())
    fail("parameter store has no extractor/reconstructor group to train");
  return paths;
}

std::string recent_rows(const std::vector<TraceRow>& rows, std::size_t n) {
  const std::size_t start = rows.size() > n ? rows.size() - n : 0;
  return trace_to_csv(
      std::vector<TraceRow>(rows.begin() + static_cast<std::ptrdiff_t>(start),
                            rows.end()));
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1)
    fail("epochs must be >= 1, got " + std::to_string(cfg.epochs));
  if (cfg.batch_size < 1)
    fail("batch_size must be >= 1, got " + std::to_string(cfg.batch_size));
  if (!std::isfinite(cfg.lr) || cfg.lr <= 0.0)
    fail("learning rate must be positive and finite, got " +
         std::to_string(cfg.lr));
  if (!std::isfinite(cfg.lambda_tv) || cfg.lambda_tv < 0.0)
    fail("lambda_tv must be >= 0, got " + std::to_string(cfg.lambda_tv));
  if (!std::isfinite(cfg.lambda_a) || cfg.lambda_a < 0.0)
    fail("lambda_a must be >= 0, got " + std::to_string(cfg.lambda_a));
  if (cfg.checkpoint_every < 0)
    fail("checkpoint_every must be >= 0, got " +
         std::to_string(cfg.checkpoint_every));
  if (cfg.max_adapt_iters < 1)
    fail("max_adapt_iters must be >= 1, got " +
         std::to_string(cfg.max_adapt_iters));
}

template <typename S>
AdamState<S>::AdamState(const ParameterStore<S>& params,
                        std::vector<std::string> owned, double lr_)
    : lr(lr_), paths(std::move(owned)) {
  if (paths.empty()) fail("optimizer state needs at least one parameter");
  if (!std::isfinite(lr) || lr <= 0.0)
    fail("learning rate must be positive and finite, got " +
         std::to_string(lr));
  for (const auto& path : paths) {
    const Tensor<S>& t = params.at(path);
    if (!t.requires_grad())
      fail("parameter '" + path + "' has no gradient storage enabled");
    if (moments.count(path))
      fail("parameter '" + path + "' listed twice in one optimizer state");
    const auto n = static_cast<std::size_t>(t.size());
    moments.emplace(path, std::make_pair(std::vector<S>(n, S{0}),
                                         std::vector<S>(n, S{0})));
  }
}

template <typename S>
void adam_step(ParameterStore<S>& params, AdamState<S>& state) {
  // All-or-nothing: reject any non-finite gradient before touching weights.
  for (const auto& path : state.paths) {
    const auto g = params.at(path).grad();
    for (const S gk : g)
      if (!std::isfinite(static_cast<double>(gk)))
        throw NumericError("gradient for '" + path +
                           "' is not finite at optimizer step " +
                           std::to_string(state.step + 1) +
                           "; parameters left unchanged");
  }
  ++state.step;
  const double bc1 =
      1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (const auto& path : state.paths) {
    Tensor<S>& t = params.at(path);
    auto theta = t.values();
    const auto g = t.grad();
    auto& [m, v] = state.moments.at(path);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk =
          state.beta1 * static_cast<double>(m[k]) + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * static_cast<double>(v[k]) +
                        (1.0 - state.beta2) * gk * gk;
      m[k] = static_cast<S>(mk);
      v[k] = static_cast<S>(vk);
      const double step_k = state.lr * (mk / bc1) / (std::sqrt(vk / bc2) + state.eps);
      theta[k] = static_cast<S>(static_cast<double>(theta[k]) - step_k);
    }
  }
}

template <typename S>
double minimize_step(ParameterStore<S>& params, AdamState<S>& state,
                     const LossFn<S>& fn) {
  if (!fn) fail("minimize_step requires a loss function");
  for (const auto& path : params.order) params.at(path).zero_grad();
  GradientTape<S> tape;
  tape.set_recording(true);
  Tensor<S> loss = fn(tape);
  if (loss.rank() != 0)
    fail("training loss must be a scalar, got shape " +
         shape_str(loss.shape()));
  const double value = static_cast<double>(loss.item());
  if (!std::isfinite(value))
    throw NumericError("training loss is not finite at optimizer step " +
                       std::to_string(state.step + 1));
  tape.backward(loss);
  adam_step(params, state);
  return value;
}

template <typename S>
std::pair<double, double> adversarial_iteration(ParameterStore<S>& params,
                                                AdamState<S>& d_state,
                                                AdamState<S>& fr_state,
                                                const LossFn<S>& d_loss,
                                                const LossFn<S>& fr_loss) {
  const double d_value = minimize_step(params, d_state, d_loss);
  const double fr_value = minimize_step(params, fr_state, fr_loss);
  return {d_value, fr_value};
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParameterStore<float>&, AdamState<float>&);
template void adam_step<double>(ParameterStore<double>&, AdamState<double>&);
template double minimize_step<float>(ParameterStore<float>&,
                                     AdamState<float>&, const LossFn<float>&);
template double minimize_step<double>(ParameterStore<double>&,
                                      AdamState<double>&,
                                      const LossFn<double>&);
template std::pair<double, double> adversarial_iteration<float>(
    ParameterStore<float>&, AdamState<float>&, AdamState<float>&,
    const LossFn<float>&, const LossFn<float>&);
template std::pair<double, double> adversarial_iteration<double>(
    ParameterStore<double>&, AdamState<double>&, AdamState<double>&,
    const LossFn<double>&, const LossFn<double>&);

std::string trace_to_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os << "iteration,ce,tv,adv,total,d_src,d_tgt\n";
  os << std::setprecision(10);
  for (const auto& row : rows)
    os << row.iteration << ',' << row.ce << ',' << row.tv << ',' << row.adv
       << ',' << row.total << ',' << row.d_src << ',' << row.d_tgt << '\n';
  return os.str();
}

TrainResult pretrain(const ParameterStore<float>& initial,
                     const std::vector<LabeledSample>& data,
                     const TrainConfig& cfg, const StinConfig& net,
                     const CheckpointHook& hook) {
  validate(cfg);
  const StinConfig full = net.with_derived();
  full.validate();
  if (data.empty()) fail("pretraining requires at least one labeled sample");
  double delta = 0.0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto index = static_cast<std::int64_t>(k);
    check_cube_geometry(data[k].cube, full, "source", index);
    if (data[k].bins.nx != data[k].cube.nx ||
        data[k].bins.ny != data[k].cube.ny)
      fail("source sample " + std::to_string(index) + " has a [" +
           std::to_string(data[k].bins.nx) + ", " +
           std::to_string(data[k].bins.ny) + "] bin map for a [" +
           std::to_string(data[k].cube.nx) + ", " +
           std::to_string(data[k].cube.ny) + "] cube");
    delta = checked_delta(data[k].cube, delta, "source", index);
  }

  TrainResult result;
  result.params = clone_parameters(initial);
  AdamState<float> state(result.params,
                         feature_reconstruction_paths(result.params), cfg.lr);

  const auto n = static_cast<std::int64_t>(data.size());
  std::int64_t iteration = 0;
  for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled_indices(n, cfg.seed, epoch);
    double epoch_sum = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
      const std::int64_t b = std::min(cfg.batch_size, n - start);
      std::vector<const HistogramCube*> cubes;
      std::vector<BinIndexMap> targets;
      cubes.reserve(static_cast<std::size_t>(b));
      targets.reserve(static_cast<std::size_t>(b));
      for (std::int64_t k = 0; k < b; ++k) {
        const auto& sample = data[static_cast<std::size_t>(order[
            static_cast<std::size_t>(start + k)])];
        cubes.push_back(&sample.cube);
        targets.push_back(sample.bins);
      }
      const Tensor<float> input = batch_tensor(cubes);
      LossValue<float> parts;
      const LossFn<float> fn = [&](GradientTape<float>& tape) {
        const Tensor<float> h_hat =
            stin_forward(tape, input, result.params, full);
        const Tensor<float> z_hat = softargmax_depth(tape, h_hat, delta);
        parts = supervised_loss(tape, h_hat, targets, z_hat, cfg.lambda_tv);
        return parts.total;
      };
      const double value = minimize_step(result.params, state, fn);
      TraceRow row;
      row.iteration = iteration++;
      row.ce = parts.ce;
      row.tv = parts.tv;
      row.total = value;
      result.trace.push_back(row);
      epoch_sum += value;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(batches));
    if (hook && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0)
      hook(epoch, result.params);
  }
  return result;
}

TrainResult dann_adapt(const ParameterStore<float>& pretrained,
                       const DomainBatch& data, const TrainConfig& cfg,
                       const StinConfig& net, const CheckpointHook& hook) {
  validate(cfg);
  const StinConfig full = net.with_derived();
  full.validate();
  if (data.source.empty())
    fail("adaptation requires at least one labeled source sample");
  if (data.target.empty())
    fail("adaptation requires at least one unlabeled target cube; the "
         "target set is empty");
  double delta = 0.0;
  for (std::size_t k = 0; k < data.source.size(); ++k) {
    const auto index = static_cast<std::int64_t>(k);
    check_cube_geometry(data.source[k].cube, full, "source", index);
    if (data.source[k].bins.nx != data.source[k].cube.nx ||
        data.source[k].bins.ny != data.source[k].cube.ny)
      fail("source sample " + std::to_string(index) +
           " has a bin map whose geometry disagrees with its cube");
    delta = checked_delta(data.source[k].cube, delta, "source", index);
  }
  for (std::size_t k = 0; k < data.target.size(); ++k) {
    const auto index = static_cast<std::int64_t>(k);
    check_cube_geometry(data.target[k], full, "target", index);
    delta = checked_delta(data.target[k], delta, "target", index);
  }

  TrainResult result;
  result.params = clone_parameters(pretrained);

  // The domain head restarts from a fresh random draw; only its paths are
  // overwritten, the transferred extractor/reconstructor weights stay.
  const std::vector<std::string> d_paths =
      paths_with_prefix(result.params, "discriminator.");
  if (d_paths.empty())
    fail("parameter store has no discriminator group to adapt with");
  {
    const ParameterStore<float> fresh = init_stin_parameters<float>(
        full, derive_seed(cfg.seed, kDiscriminatorInitSalt));
    for (const auto& path : d_paths) {
      auto dst = result.params.at(path).values();
      const auto src = fresh.at(path).values();
      if (dst.size() != src.size())
        fail("discriminator parameter '" + path +
             "' does not match the network configuration");
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }

  AdamState<float> d_state(result.params, d_paths, cfg.lr);
  AdamState<float> fr_state(result.params,
                            feature_reconstruction_paths(result.params),
                            cfg.lr);

  const auto ns = static_cast<std::int64_t>(data.source.size());
  const auto nt = static_cast<std::uint64_t>(data.target.size());
  PhiloxRng target_rng(derive_seed(cfg.seed, kTargetDrawSalt), 0);

  std::int64_t iteration = 0;
  double initial_total = 0.0;
  int over_threshold = 0;
  for (std::int64_t epoch = 0; epoch < cfg.max_adapt_iters; ++epoch) {
    const auto order = shuffled_indices(ns, cfg.seed, epoch);
    double epoch_sum = 0.0;
    for (const std::int64_t src_index : order) {
      const auto tgt_index =
          static_cast<std::size_t>(target_rng.uniform_int(nt));
      const LabeledSample& sample =
          data.source[static_cast<std::size_t>(src_index)];
      const Tensor<float> x_src = batch_tensor({&sample.cube});
      const Tensor<float> x_tgt = batch_tensor({&data.target[tgt_index]});
      const std::vector<BinIndexMap> targets{sample.bins};

      const LossFn<float> d_fn = [&](GradientTape<float>& tape) {
        const Tensor<float> latent_src =
            feature_extract(tape, x_src, result.params, full);
        const Tensor<float> latent_tgt =
            feature_extract(tape, x_tgt, result.params, full);
        const Tensor<float> d_src =
            discriminate(tape, latent_src, result.params, full);
        const Tensor<float> d_tgt =
            discriminate(tape, latent_tgt, result.params, full);
        return adversarial_loss(tape, d_src, d_tgt);
      };

      TraceRow row;
      row.iteration = iteration;
      const LossFn<float> fr_fn = [&](GradientTape<float>& tape) {
        const Tensor<float> latent_src =
            feature_extract(tape, x_src, result.params, full);
        const Tensor<float> h_hat =
            reconstruct(tape, latent_src, result.params, full);
        const Tensor<float> z_hat = softargmax_depth(tape, h_hat, delta);
        const LossValue<float> sup =
            supervised_loss(tape, h_hat, targets, z_hat, cfg.lambda_tv);
        const Tensor<float> latent_tgt =
            feature_extract(tape, x_tgt, result.params, full);
        const Tensor<float> d_src =
            discriminate(tape, latent_src, result.params, full);
        const Tensor<float> d_tgt =
            discriminate(tape, latent_tgt, result.params, full);
        const Tensor<float> adv = adversarial_loss(tape, d_src, d_tgt);
        row.ce = sup.ce;
        row.tv = sup.tv;
        row.adv = static_cast<double>(adv.item());
        row.d_src = static_cast<double>(d_src.at({0}));
        row.d_tgt = static_cast<double>(d_tgt.at({0}));
        return total_adaptation_loss(tape, sup.total, adv, cfg.lambda_a);
      };

      const auto [d_value, fr_value] =
          adversarial_iteration(result.params, d_state, fr_state, d_fn, fr_fn);
      (void)d_value;
      row.total = fr_value;
      result.trace.push_back(row);
      epoch_sum += fr_value;

      if (iteration == 0) initial_total = fr_value;
      const double threshold =
          kDivergenceFactor * std::max(std::abs(initial_total), 1e-3);
      if (fr_value > threshold) {
        if (++over_threshold >= kDivergencePatience)
          throw NumericError(
              "adaptation diverged: loss " + std::to_string(fr_value) +
              " exceeded " + std::to_string(kDivergenceFactor) +
              "x the initial " + std::to_string(initial_total) + " for " +
              std::to_string(kDivergencePatience) +
              " consecutive iterations, aborting at iteration " +
              std::to_string(iteration) + "; recent trace:\n" +
              recent_rows(result.trace, 5));
      } else {
        over_threshold = 0;
      }
      ++iteration;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(ns));
    if (hook && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0)
      hook(epoch, result.params);
  }
  return result;
}

}  // namespace photon_da
