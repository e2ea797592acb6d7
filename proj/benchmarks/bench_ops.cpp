#include <benchmark/benchmark.h>

#include "photon_da/ops.hpp"
#include "photon_da/rng.hpp"

namespace {

using namespace photon_da;

Tensor<float> rnd(PhiloxRng& rng, Shape shape, bool grad = false) {
  std::vector<float> data(static_cast<std::size_t>(numel(shape)));
  for (auto& v : data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return Tensor<float>::from_data(std::move(shape), std::move(data), grad);
}

void BM_Conv3dForward(benchmark::State& state) {
  PhiloxRng rng(1);
  auto x = rnd(rng, {1, 4, 128, 16, 16});
  auto w = rnd(rng, {4, 4, 7, 1, 1});
  auto b = rnd(rng, {4});
  GradientTape<float> tape;
  tape.set_recording(false);
  for (auto _ : state) {
    auto y = conv3d(tape, x, w, b, {3, 0, 0});
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_Conv3dForward);

void BM_Conv3dForwardBackward(benchmark::State& state) {
  PhiloxRng rng(2);
  auto x = rnd(rng, {1, 4, 128, 16, 16}, true);
  auto w = rnd(rng, {4, 4, 7, 1, 1}, true);
  auto b = rnd(rng, {4}, true);
  auto ws = rnd(rng, {1, static_cast<std::int64_t>(4) * 128 * 16 * 16});
  auto zb = Tensor<float>::zeros({1});
  for (auto _ : state) {
    GradientTape<float> tape;
    auto y = conv3d(tape, x, w, b, {3, 0, 0});
    auto loss = linear(tape, reshape(tape, y, {y.size()}), ws, zb);
    tape.backward(loss);
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_Conv3dForwardBackward);

void BM_Deconv3dForward(benchmark::State& state) {
  PhiloxRng rng(3);
  auto x = rnd(rng, {1, 48, 1, 16, 16});
  auto w = rnd(rng, {48, 40, 6, 3, 3});
  auto b = rnd(rng, {40});
  GradientTape<float> tape;
  tape.set_recording(false);
  for (auto _ : state) {
    auto y = deconv3d(tape, x, w, b, {2, 1, 1}, {2, 1, 1});
    benchmark::DoNotOptimize(y.values().data());
  }
}
BENCHMARK(BM_Deconv3dForward);

}  // namespace

BENCHMARK_MAIN();
