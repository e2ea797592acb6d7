#include "photon_da/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "photon_da/ops.hpp"

namespace photon_da {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ValidationError(msg); }

constexpr double kProbFloor = 1e-12;   // cross-entropy log floor
constexpr double kProbClamp = 1e-7;    // domain-probability clamp

template <typename S>
Tensor<S> ce_loss_impl(GradientTape<S>& tape, const Tensor<S>& h_hat,
                       const std::vector<BinIndexMap>& targets) {
  const auto& shape = h_hat.shape();
  if (shape.size() != 4 && shape.size() != 5)
    fail("ce_loss: prediction must be [1,T,H,W] or [B,1,T,H,W], got " +
         shape_str(shape));
  const bool batched = shape.size() == 5;
  const std::int64_t batch = batched ? shape[0] : 1;
  const std::size_t c_axis = shape.size() - 4;
  if (shape[c_axis] != 1)
    fail("ce_loss: prediction must have a single channel, got " +
         shape_str(shape));
  const std::int64_t t_bins = shape[c_axis + 1];
  const std::int64_t h = shape[c_axis + 2], w = shape[c_axis + 3];
  if (static_cast<std::int64_t>(targets.size()) != batch) {
    std::ostringstream os;
    os << "ce_loss: " << targets.size() << " bin maps for a batch of "
       << batch;
    fail(os.str());
  }
  for (const auto& m : targets) {
    if (m.nx != h || m.ny != w ||
        m.bin.size() != static_cast<std::size_t>(h * w)) {
      std::ostringstream os;
      os << "ce_loss: bin map " << m.nx << " x " << m.ny
         << " does not match prediction " << shape_str(shape);
      fail(os.str());
    }
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j) {
        const std::int32_t b = m.at(i, j);
        if (b < 0 || b >= t_bins) {
          std::ostringstream os;
          os << "ce_loss: bin " << b << " at pixel (" << i << ", " << j
             << ") outside [0, " << t_bins << ")";
          fail(os.str());
        }
      }
  }

  const S* hv = h_hat.values().data();
  const std::int64_t plane = h * w;
  const std::int64_t item = t_bins * plane;
  double acc = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) {
    const auto& m = targets[static_cast<std::size_t>(b)];
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j) {
        const std::int64_t idx =
            b * item + static_cast<std::int64_t>(m.at(i, j)) * plane +
            i * w + j;
        const double v = static_cast<double>(hv[idx]);
        acc -= std::log(std::max(v, kProbFloor));
      }
  }
  auto out =
      Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(batch)),
                        detail::track(tape, h_hat));
  if (out.requires_grad()) {
    auto ht = h_hat;
    auto ot = out;
    auto tg = targets;
    tape.record([ht, ot, tg, batch, t_bins, h, w, plane, item]() {
      const S g = ot.impl()->grad[0];
      if (g == S{0} || !ht.requires_grad()) return;
      S* dh = ht.impl()->grad.data();
      const S* hv2 = ht.values().data();
      const S scale = g / static_cast<S>(batch);
      for (std::int64_t b = 0; b < batch; ++b) {
        const auto& m = tg[static_cast<std::size_t>(b)];
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t j = 0; j < w; ++j) {
            const std::int64_t idx =
                b * item + static_cast<std::int64_t>(m.at(i, j)) * plane +
                i * w + j;
            const double v = static_cast<double>(hv2[idx]);
            if (v > kProbFloor)
              dh[idx] -= scale / static_cast<S>(v);
          }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> tv_loss_impl(GradientTape<S>& tape, const Tensor<S>& z_hat) {
  const auto& shape = z_hat.shape();
  if (shape.size() != 2 && shape.size() != 3)
    fail("tv_loss: depth map must be [H,W] or [B,H,W], got " +
         shape_str(shape));
  const bool batched = shape.size() == 3;
  const std::int64_t batch = batched ? shape[0] : 1;
  const std::int64_t h = shape[batched ? 1 : 0];
  const std::int64_t w = shape[batched ? 2 : 1];
  const std::int64_t plane = h * w;

  const S* zv = z_hat.values().data();
  double acc = 0.0;
  for (std::int64_t b = 0; b < batch; ++b) {
    const S* zb = zv + b * plane;
    for (std::int64_t i = 0; i < h; ++i)
      for (std::int64_t j = 0; j < w; ++j) {
        const S c = zb[i * w + j];
        if (i + 1 < h)
          acc += std::abs(static_cast<double>(zb[(i + 1) * w + j] - c));
        if (j + 1 < w)
          acc += std::abs(static_cast<double>(zb[i * w + j + 1] - c));
      }
  }
  auto out =
      Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(batch)),
                        detail::track(tape, z_hat));
  if (out.requires_grad()) {
    auto zt = z_hat;
    auto ot = out;
    tape.record([zt, ot, batch, h, w, plane]() {
      const S g = ot.impl()->grad[0];
      if (g == S{0} || !zt.requires_grad()) return;
      const S scale = g / static_cast<S>(batch);
      S* dz = zt.impl()->grad.data();
      const S* zv2 = zt.values().data();
      for (std::int64_t b = 0; b < batch; ++b) {
        const S* zb = zv2 + b * plane;
        S* db = dz + b * plane;
        for (std::int64_t i = 0; i < h; ++i)
          for (std::int64_t j = 0; j < w; ++j) {
            const S c = zb[i * w + j];
            if (i + 1 < h) {
              const S d = zb[(i + 1) * w + j] - c;
              const S s = d > S{0} ? scale : (d < S{0} ? -scale : S{0});
              db[(i + 1) * w + j] += s;
              db[i * w + j] -= s;
            }
            if (j + 1 < w) {
              const S d = zb[i * w + j + 1] - c;
              const S s = d > S{0} ? scale : (d < S{0} ? -scale : S{0});
              db[i * w + j + 1] += s;
              db[i * w + j] -= s;
            }
          }
      }
    });
  }
  return out;
}

/// Mean of log(p) (when complement=false) or log(1-p) (complement=true)
/// over a probability vector, with the clamp's zero-gradient exterior.
template <typename S>
Tensor<S> mean_log_prob(GradientTape<S>& tape, const Tensor<S>& p,
                        bool complement, const char* side) {
  const auto n = p.size();
  if (n < 1)
    fail(std::string("adversarial_loss: empty ") + side +
         " probability vector");
  const S* pv = p.values().data();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double c = std::clamp(static_cast<double>(pv[i]), kProbClamp,
                                1.0 - kProbClamp);
    acc += std::log(complement ? 1.0 - c : c);
  }
  auto out =
      Tensor<S>::scalar(static_cast<S>(acc / static_cast<double>(n)),
                        detail::track(tape, p));
  if (out.requires_grad()) {
    auto pt = p;
    auto ot = out;
    tape.record([pt, ot, n, complement]() {
      const S g = ot.impl()->grad[0];
      if (g == S{0} || !pt.requires_grad()) return;
      const S* pv2 = pt.values().data();
      S* dp = pt.impl()->grad.data();
      const S scale = g / static_cast<S>(n);
      for (std::int64_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(pv2[i]);
        if (v <= kProbClamp || v >= 1.0 - kProbClamp) continue;
        if (complement)
          dp[i] -= scale / static_cast<S>(1.0 - v);
        else
          dp[i] += scale / static_cast<S>(v);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> adversarial_loss_impl(GradientTape<S>& tape, const Tensor<S>& d_src,
                                const Tensor<S>& d_tgt) {
  auto ls = mean_log_prob(tape, d_src, false, "source");
  auto lt = mean_log_prob(tape, d_tgt, true, "target");
  return scale_add(tape, ls, lt, S{1}, S{-1});
}

}  // namespace

#define PHOTON_DA_DEFINE_OBJECTIVES(S)                                       \
  template <>                                                                \
  Tensor<S> ce_loss<S>(GradientTape<S>& tape, const Tensor<S>& h_hat,        \
                       const std::vector<BinIndexMap>& targets) {            \
    return ce_loss_impl(tape, h_hat, targets);                               \
  }                                                                          \
  template <>                                                                \
  Tensor<S> tv_loss<S>(GradientTape<S>& tape, const Tensor<S>& z_hat) {      \
    return tv_loss_impl(tape, z_hat);                                        \
  }                                                                          \
  template <>                                                                \
  Tensor<S> adversarial_loss<S>(GradientTape<S>& tape,                       \
                                const Tensor<S>& d_src,                      \
                                const Tensor<S>& d_tgt) {                    \
    return adversarial_loss_impl(tape, d_src, d_tgt);                        \
  }                                                                          \
  template <>                                                                \
  LossValue<S> supervised_loss<S>(GradientTape<S>& tape,                     \
                                  const Tensor<S>& h_hat,                    \
                                  const std::vector<BinIndexMap>& targets,   \
                                  const Tensor<S>& z_hat,                    \
                                  double lambda_tv) {                        \
    if (lambda_tv < 0.0)                                                     \
      fail("supervised_loss: lambda_tv must be nonnegative");                \
    auto ce = ce_loss_impl(tape, h_hat, targets);                            \
    auto tv = tv_loss_impl(tape, z_hat);                                     \
    LossValue<S> out;                                                        \
    out.ce = static_cast<double>(ce.item());                                 \
    out.tv = static_cast<double>(tv.item());                                 \
    out.total =                                                              \
        scale_add(tape, ce, tv, S{1}, static_cast<S>(lambda_tv));            \
    return out;                                                              \
  }                                                                          \
  template <>                                                                \
  Tensor<S> total_adaptation_loss<S>(GradientTape<S>& tape,                  \
                                     const Tensor<S>& supervised,            \
                                     const Tensor<S>& adversarial,           \
                                     double lambda_a) {                      \
    if (lambda_a < 0.0)                                                      \
      fail("total_adaptation_loss: lambda_a must be nonnegative");           \
    return scale_add(tape, supervised, adversarial, S{1},                    \
                     static_cast<S>(-lambda_a));                             \
  }

PHOTON_DA_DEFINE_OBJECTIVES(float)
PHOTON_DA_DEFINE_OBJECTIVES(double)

#undef PHOTON_DA_DEFINE_OBJECTIVES

}  // namespace photon_da
