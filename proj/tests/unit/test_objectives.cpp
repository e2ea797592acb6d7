// Loss-function tests. Analytic values and brute-force oracles are
// recomputed in-test with doubles; the library must match them.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "photon_da/objectives.hpp"
#include "photon_da/rng.hpp"

using namespace photon_da;

namespace {

BinIndexMap make_bins(std::int64_t nx, std::int64_t ny,
                      std::vector<std::int32_t> v) {
  BinIndexMap m;
  m.nx = nx;
  m.ny = ny;
  m.bin = std::move(v);
  return m;
}

/// Column-normalized random distribution cube [1,T,H,W].
Tensor<double> random_dist(std::int64_t t, std::int64_t h, std::int64_t w,
                           std::uint64_t seed, bool grad = false) {
  PhiloxRng rng(seed);
  auto cube = Tensor<double>::zeros({1, t, h, w}, grad);
  auto v = cube.values();
  for (std::int64_t i = 0; i < h; ++i)
    for (std::int64_t j = 0; j < w; ++j) {
      double sum = 0.0;
      for (std::int64_t k = 0; k < t; ++k) {
        const double r = rng.uniform(0.05, 1.0);
        v[static_cast<std::size_t>((k * h + i) * w + j)] = r;
        sum += r;
      }
      for (std::int64_t k = 0; k < t; ++k)
        v[static_cast<std::size_t>((k * h + i) * w + j)] /= sum;
    }
  return cube;
}

}  // namespace

TEST_CASE("ce_loss: analytic points and brute-force oracle") {
  GradientTape<double> tape;
  tape.set_recording(false);

  // Probability 1 on the true bin everywhere -> exactly zero.
  auto onehot = Tensor<double>::zeros({1, 4, 2, 2});
  auto bins = make_bins(2, 2, {0, 1, 2, 3});
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 2; ++j)
      onehot.at({0, static_cast<std::int64_t>(bins.at(i, j)), i, j}) = 1.0;
  CHECK(ce_loss(tape, onehot, {bins}).item() == 0.0);

  // Uniform over 4 bins, single pixel -> -log(1/4).
  auto uni = Tensor<double>::full({1, 4, 1, 1}, 0.25);
  auto one = make_bins(1, 1, {2});
  CHECK(ce_loss(tape, uni, {one}).item() ==
        doctest::Approx(1.3862943611198906).epsilon(1e-12));

  // Random 2x2 case against a direct per-pixel recomputation.
  auto h = random_dist(6, 2, 2, 31);
  auto tb = make_bins(2, 2, {5, 0, 3, 3});
  double want = 0.0;
  for (std::int64_t i = 0; i < 2; ++i)
    for (std::int64_t j = 0; j < 2; ++j)
      want -= std::log(h.at({0, tb.at(i, j), i, j}));
  CHECK(ce_loss(tape, h, {tb}).item() ==
        doctest::Approx(want).epsilon(1e-12));

  // Batched: the mean of the per-item losses.
  auto h2 = random_dist(6, 2, 2, 32);
  auto tb2 = make_bins(2, 2, {1, 2, 4, 0});
  auto hb = Tensor<double>::zeros({2, 1, 6, 2, 2});
  auto dst = hb.values();
  auto s1 = h.values(), s2 = h2.values();
  std::copy(s1.begin(), s1.end(), dst.begin());
  std::copy(s2.begin(), s2.end(), dst.begin() + s1.size());
  const double l1 = ce_loss(tape, h, {tb}).item();
  const double l2 = ce_loss(tape, h2, {tb2}).item();
  CHECK(ce_loss(tape, hb, {tb, tb2}).item() ==
        doctest::Approx(0.5 * (l1 + l2)).epsilon(1e-12));

  auto bad = make_bins(2, 2, {0, 1, 2, 6});
  CHECK_THROWS_AS((void)ce_loss(tape, h, {bad}), ValidationError);
  auto neg = make_bins(2, 2, {0, -1, 2, 3});
  CHECK_THROWS_AS((void)ce_loss(tape, h, {neg}), ValidationError);
  CHECK_THROWS_AS((void)ce_loss(tape, h, {tb, tb2}), ValidationError);
}

TEST_CASE("ce_loss: probability floor and gradient routing") {
  auto h = Tensor<double>::zeros({1, 3, 1, 2}, true);
  h.at({0, 0, 0, 0}) = 0.0;   // floored voxel (target)
  h.at({0, 1, 0, 0}) = 0.6;
  h.at({0, 2, 0, 0}) = 0.4;
  h.at({0, 0, 0, 1}) = 0.25;  // healthy voxel (target)
  h.at({0, 1, 0, 1}) = 0.5;
  h.at({0, 2, 0, 1}) = 0.25;
  auto bins = make_bins(1, 2, {0, 0});

  GradientTape<double> tape;
  auto loss = ce_loss(tape, h, {bins});
  CHECK(loss.item() ==
        doctest::Approx(-std::log(1e-12) - std::log(0.25)).epsilon(1e-12));
  tape.backward(loss);
  CHECK(h.grad()[0] == 0.0);  // floored: no gradient
  const std::size_t healthy = 1;  // flat index of (0,0,0,1)
  CHECK(h.grad()[healthy] == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("tv_loss: hand counts, oracle, invariances") {
  GradientTape<double> tape;
  tape.set_recording(false);

  CHECK(tv_loss(tape, Tensor<double>::full({3, 3}, 1.7)).item() == 0.0);

  auto two = Tensor<double>::from_data({2, 2}, {0.0, 1.0, 0.0, 1.0});
  CHECK(tv_loss(tape, two).item() == 2.0);

  PhiloxRng rng(55);
  auto z = Tensor<double>::zeros({4, 4});
  for (auto& v : z.values()) v = rng.uniform(-2.0, 2.0);
  double want = 0.0;
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j) {
      if (i + 1 < 4) want += std::abs(z.at({i + 1, j}) - z.at({i, j}));
      if (j + 1 < 4) want += std::abs(z.at({i, j + 1}) - z.at({i, j}));
    }
  const double got = tv_loss(tape, z).item();
  CHECK(got == doctest::Approx(want).epsilon(1e-12));

  // Shift invariance and positive-scale linearity.
  auto shifted = z.detached();
  for (auto& v : shifted.values()) v += 0.73;
  CHECK(tv_loss(tape, shifted).item() ==
        doctest::Approx(got).epsilon(1e-9));
  auto scaled = z.detached();
  for (auto& v : scaled.values()) v *= 2.5;
  CHECK(tv_loss(tape, scaled).item() ==
        doctest::Approx(2.5 * got).epsilon(1e-9));

  // Batch mean.
  auto zb = Tensor<double>::zeros({2, 4, 4});
  auto payload = zb.values();
  auto src = z.values();
  std::copy(src.begin(), src.end(), payload.begin());
  std::copy(src.begin(), src.end(), payload.begin() + src.size());
  CHECK(tv_loss(tape, zb).item() == doctest::Approx(got).epsilon(1e-12));
}

TEST_CASE("tv_loss: sign-routed gradients") {
  auto z = Tensor<double>::from_data({1, 2}, {0.0, 1.0}, true);
  GradientTape<double> tape;
  auto loss = tv_loss(tape, z);
  tape.backward(loss);
  CHECK(z.grad()[0] == -1.0);
  CHECK(z.grad()[1] == 1.0);

  auto flat = Tensor<double>::from_data({1, 2}, {0.5, 0.5}, true);
  GradientTape<double> tape2;
  auto l2 = tv_loss(tape2, flat);
  tape2.backward(l2);
  CHECK(flat.grad()[0] == 0.0);  // exact tie: zero subgradient
  CHECK(flat.grad()[1] == 0.0);
}

TEST_CASE("adversarial_loss: analytic values and gradients") {
  GradientTape<double> tape;
  tape.set_recording(false);

  auto p = [](double v, bool grad = false) {
    return Tensor<double>::from_data({1}, {v}, grad);
  };
  CHECK(adversarial_loss(tape, p(0.5), p(0.5)).item() == 0.0);
  CHECK(adversarial_loss(tape, p(0.1), p(0.5)).item() ==
        doctest::Approx(-1.6094379124341003).epsilon(1e-12));
  for (double x : {0.2, 0.35, 0.6, 0.91})
    CHECK(adversarial_loss(tape, p(x), p(1.0 - x)).item() ==
          doctest::Approx(0.0).epsilon(1e-12));

  // d/d(d_src) = 1/d_src, d/d(d_tgt) = 1/(1-d_tgt); both positive.
  auto ds = p(0.3, true);
  auto dt = p(0.25, true);
  GradientTape<double> g;
  auto loss = adversarial_loss(g, ds, dt);
  g.backward(loss);
  CHECK(ds.grad()[0] == doctest::Approx(1.0 / 0.3).epsilon(1e-12));
  CHECK(dt.grad()[0] == doctest::Approx(1.0 / 0.75).epsilon(1e-12));

  // Saturated probabilities clamp: finite value, zero gradient. With
  // d_src=0 and d_tgt=1 both logs see ~1e-7 and nearly cancel; the
  // residual is only the double rounding of 1 - (1 - 1e-7).
  auto lo = p(0.0, true);
  auto hi = p(1.0, true);
  GradientTape<double> g2;
  auto l2 = adversarial_loss(g2, lo, hi);
  CHECK(std::abs(l2.item()) < 1e-8);
  CHECK(std::isfinite(
      adversarial_loss(tape, p(0.0), p(0.0)).item()));
  g2.backward(l2);
  CHECK(lo.grad()[0] == 0.0);
  CHECK(hi.grad()[0] == 0.0);

  // Batched probabilities average per side.
  auto vs = Tensor<double>::from_data({2}, {0.2, 0.4});
  auto vt = Tensor<double>::from_data({3}, {0.5, 0.6, 0.7});
  const double want = 0.5 * (std::log(0.2) + std::log(0.4)) -
                      (std::log(0.5) + std::log(0.4) + std::log(0.3)) / 3.0;
  CHECK(adversarial_loss(tape, vs, vt).item() ==
        doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("supervised and total losses recombine") {
  GradientTape<double> tape;
  tape.set_recording(false);

  auto h = random_dist(6, 3, 3, 77);
  auto bins = make_bins(3, 3, {0, 1, 2, 3, 4, 5, 0, 1, 2});
  PhiloxRng rng(78);
  auto z = Tensor<double>::zeros({3, 3});
  for (auto& v : z.values()) v = rng.uniform(0.0, 2.0);

  const double ce = ce_loss(tape, h, {bins}).item();
  const double tv = tv_loss(tape, z).item();
  auto sup = supervised_loss(tape, h, {bins}, z, 0.001);
  CHECK(sup.ce == doctest::Approx(ce).epsilon(1e-12));
  CHECK(sup.tv == doctest::Approx(tv).epsilon(1e-12));
  CHECK(sup.total.item() ==
        doctest::Approx(ce + 0.001 * tv).epsilon(1e-9));

  // lambda_tv = 0 reduces to the cross-entropy term bit for bit.
  auto pure = supervised_loss(tape, h, {bins}, z, 0.0);
  CHECK(pure.total.item() == ce);

  auto adv = adversarial_loss(
      tape, Tensor<double>::from_data({1}, {0.1}),
      Tensor<double>::from_data({1}, {0.5}));
  auto total = total_adaptation_loss(tape, sup.total, adv, 0.1);
  CHECK(total.item() ==
        doctest::Approx(sup.total.item() + 0.1 * 1.6094379124341003)
            .epsilon(1e-9));

  auto same = total_adaptation_loss(tape, sup.total, adv, 0.0);
  CHECK(same.item() == sup.total.item());

  const double sup_c = 1.0, adv_c = -1.6;
  auto t2 = total_adaptation_loss(tape, Tensor<double>::scalar(sup_c),
                                  Tensor<double>::scalar(adv_c), 0.1);
  CHECK(t2.item() == doctest::Approx(1.16).epsilon(1e-12));

  CHECK(kLambdaTv == 0.001);
  CHECK(kLambdaA == 0.1);
}
