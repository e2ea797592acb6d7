#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "photon_da/ops.hpp"
#include "photon_da/parallel.hpp"

namespace photon_da {
namespace {

using std::int64_t;

struct Vol {
  int64_t b, c, t, h, w;
  bool batched;
};

Vol as_volume(const Shape& s, const char* op) {
  if (s.size() == 4) return {1, s[0], s[1], s[2], s[3], false};
  if (s.size() == 5) return {s[0], s[1], s[2], s[3], s[4], true};
  throw ValidationError(std::string(op) +
                        ": expected a [C, T, H, W] or [B, C, T, H, W] volume, "
                        "got " +
                        shape_str(s));
}

}  // namespace

Shape pool3d_output_shape(const Shape& input, const Dims3& kernel) {
  const Vol v = as_volume(input, "pool3d");
  const int64_t in_ext[3] = {v.t, v.h, v.w};
  int64_t out_ext[3];
  for (int a = 0; a < 3; ++a) {
    if (kernel[a] < 1)
      throw ValidationError("pool3d: invalid kernel extent " +
                            std::to_string(kernel[a]));
    if (in_ext[a] % kernel[a] != 0)
      throw ValidationError("pool3d: kernel extent " +
                            std::to_string(kernel[a]) +
                            " does not divide input " + shape_str(input));
    out_ext[a] = in_ext[a] / kernel[a];
  }
  if (v.batched) return {v.b, v.c, out_ext[0], out_ext[1], out_ext[2]};
  return {v.c, out_ext[0], out_ext[1], out_ext[2]};
}

// Implicitly instantiated bodies; the public entry points below are per-type
// specializations (see ops_conv.cpp for the rationale).
namespace {

template <typename S>
Tensor<S> pool3d_impl(GradientTape<S>& tape, const Tensor<S>& input, PoolMode mode,
                 const Dims3& kernel) {
  const Shape out_shape = pool3d_output_shape(input.shape(), kernel);
  const Vol v = as_volume(input.shape(), "pool3d");
  const int64_t KT = kernel[0], KH = kernel[1], KW = kernel[2];
  const int64_t T = v.t, H = v.h, W = v.w;
  const int64_t OT = T / KT, OH = H / KH, OW = W / KW;
  const int64_t planes = v.b * v.c;
  const int64_t out_plane = OT * OH * OW;

  const bool tracked = detail::track(tape, input);
  Tensor<S> out = Tensor<S>::zeros(out_shape, tracked);
  const S* in = input.values().data();
  S* dst = out.values().data();

  // Argmax offsets (into the input buffer) for max-pool backward routing.
  auto argmax = std::make_shared<std::vector<int64_t>>();
  if (mode == PoolMode::kMax && tracked)
    argmax->assign(static_cast<std::size_t>(planes * out_plane), 0);

  const S inv_vol = S(1) / static_cast<S>(KT * KH * KW);
  parallel_for(planes, [&](int64_t lo, int64_t hi) {
    for (int64_t p = lo; p < hi; ++p) {
      const S* chan = in + p * T * H * W;
      S* oplane = dst + p * out_plane;
      for (int64_t ot = 0; ot < OT; ++ot)
        for (int64_t oh = 0; oh < OH; ++oh)
          for (int64_t ow = 0; ow < OW; ++ow) {
            const int64_t cell = (ot * OH + oh) * OW + ow;
            if (mode == PoolMode::kAverage) {
              S acc{0};
              for (int64_t kt = 0; kt < KT; ++kt)
                for (int64_t kh = 0; kh < KH; ++kh) {
                  const S* row = chan + ((ot * KT + kt) * H + oh * KH + kh) * W +
                                 ow * KW;
                  for (int64_t kw = 0; kw < KW; ++kw) acc += row[kw];
                }
              oplane[cell] = acc * inv_vol;
            } else {
              // First maximal element in scan order wins ties.
              S best{};
              int64_t best_at = -1;
              for (int64_t kt = 0; kt < KT; ++kt)
                for (int64_t kh = 0; kh < KH; ++kh) {
                  const int64_t row_at =
                      p * T * H * W +
                      ((ot * KT + kt) * H + oh * KH + kh) * W + ow * KW;
                  for (int64_t kw = 0; kw < KW; ++kw) {
                    const S val = in[row_at + kw];
                    if (best_at < 0 || val > best) {
                      best = val;
                      best_at = row_at + kw;
                    }
                  }
                }
              oplane[cell] = best;
              if (tracked) (*argmax)[p * out_plane + cell] = best_at;
            }
          }
    }
  });

  if (tracked) {
    Tensor<S> in_t = input, out_t = out;
    tape.record([=]() {
      const S* g = out_t.grad().data();
      S* dx = in_t.impl()->grad.data();
      if (mode == PoolMode::kMax) {
        // Each input element is the argmax of at most one window.
        for (int64_t i = 0; i < planes * out_plane; ++i)
          dx[(*argmax)[i]] += g[i];
      } else {
        parallel_for(planes, [&](int64_t lo, int64_t hi) {
          for (int64_t p = lo; p < hi; ++p) {
            const S* gplane = g + p * out_plane;
            S* dplane = dx + p * T * H * W;
            for (int64_t ot = 0; ot < OT; ++ot)
              for (int64_t oh = 0; oh < OH; ++oh)
                for (int64_t ow = 0; ow < OW; ++ow) {
                  const S spread = gplane[(ot * OH + oh) * OW + ow] * inv_vol;
                  for (int64_t kt = 0; kt < KT; ++kt)
                    for (int64_t kh = 0; kh < KH; ++kh) {
                      S* row =
                          dplane + ((ot * KT + kt) * H + oh * KH + kh) * W +
                          ow * KW;
                      for (int64_t kw = 0; kw < KW; ++kw) row[kw] += spread;
                    }
                }
          }
        });
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> group_norm_impl(GradientTape<S>& tape, const Tensor<S>& input, int groups,
                     const Tensor<S>& gamma, const Tensor<S>& beta, S eps) {
  const Vol v = as_volume(input.shape(), "group_norm");
  if (groups < 1 || v.c % groups != 0)
    throw ValidationError("group_norm: " + std::to_string(groups) +
                          " groups do not divide " + std::to_string(v.c) +
                          " channels");
  if (gamma.rank() != 1 || gamma.dim(0) != v.c || beta.rank() != 1 ||
      beta.dim(0) != v.c)
    throw ValidationError("group_norm: affine parameters must be [" +
                          std::to_string(v.c) + "], got gamma " +
                          shape_str(gamma.shape()) + ", beta " +
                          shape_str(beta.shape()));

  const int64_t C = v.c, G = groups, CG = C / G;
  const int64_t spatial = v.t * v.h * v.w;
  const int64_t group_len = CG * spatial;

  const bool tracked = detail::track(tape, input, gamma, beta);
  Tensor<S> out = Tensor<S>::zeros(input.shape(), tracked);
  const S* in = input.values().data();
  const S* gm = gamma.values().data();
  const S* bt = beta.values().data();
  S* dst = out.values().data();

  auto means = std::make_shared<std::vector<S>>(
      static_cast<std::size_t>(v.b * G), S{0});
  auto invs = std::make_shared<std::vector<S>>(
      static_cast<std::size_t>(v.b * G), S{0});

  parallel_for(v.b * G, [&](int64_t lo, int64_t hi) {
    for (int64_t task = lo; task < hi; ++task) {
      const int64_t b = task / G, g = task % G;
      const S* src = in + (b * C + g * CG) * spatial;
      S mean{0};
      for (int64_t i = 0; i < group_len; ++i) mean += src[i];
      mean /= static_cast<S>(group_len);
      S var{0};
      for (int64_t i = 0; i < group_len; ++i) {
        const S d = src[i] - mean;
        var += d * d;
      }
      var /= static_cast<S>(group_len);  // biased, as normalization uses n
      const S inv = S(1) / std::sqrt(var + eps);
      (*means)[task] = mean;
      (*invs)[task] = inv;
      S* o = dst + (b * C + g * CG) * spatial;
      for (int64_t c = 0; c < CG; ++c) {
        const S gc = gm[g * CG + c], bc = bt[g * CG + c];
        const S* srow = src + c * spatial;
        S* orow = o + c * spatial;
        for (int64_t i = 0; i < spatial; ++i)
          orow[i] = gc * ((srow[i] - mean) * inv) + bc;
      }
    }
  });

  if (tracked) {
    Tensor<S> in_t = input, gm_t = gamma, bt_t = beta, out_t = out;
    const bool need_dx = input.requires_grad();
    const bool need_dg = gamma.requires_grad();
    const bool need_db = beta.requires_grad();
    const int64_t B = v.b;
    tape.record([=]() {
      const S* g_out = out_t.grad().data();
      const S* x = in_t.values().data();
      const S* gmv = gm_t.values().data();
      if (need_dx) {
        S* dx = in_t.impl()->grad.data();
        parallel_for(B * G, [&](int64_t lo, int64_t hi) {
          for (int64_t task = lo; task < hi; ++task) {
            const int64_t b = task / G, grp = task % G;
            const int64_t base = (b * C + grp * CG) * spatial;
            const S mean = (*means)[task], inv = (*invs)[task];
            // dx = inv * (gamma*dy - mean(gamma*dy) - xhat * mean(gamma*dy*xhat))
            S s1{0}, s2{0};
            for (int64_t c = 0; c < CG; ++c) {
              const S gc = gmv[grp * CG + c];
              const S* dyr = g_out + base + c * spatial;
              const S* xr = x + base + c * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                const S gd = gc * dyr[i];
                s1 += gd;
                s2 += gd * ((xr[i] - mean) * inv);
              }
            }
            s1 /= static_cast<S>(group_len);
            s2 /= static_cast<S>(group_len);
            for (int64_t c = 0; c < CG; ++c) {
              const S gc = gmv[grp * CG + c];
              const S* dyr = g_out + base + c * spatial;
              const S* xr = x + base + c * spatial;
              S* dxr = dx + base + c * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                const S xhat = (xr[i] - mean) * inv;
                dxr[i] += inv * (gc * dyr[i] - s1 - xhat * s2);
              }
            }
          }
        });
      }
      if (need_dg || need_db) {
        S* dg = need_dg ? gm_t.impl()->grad.data() : nullptr;
        S* db = need_db ? bt_t.impl()->grad.data() : nullptr;
        parallel_for(C, [&](int64_t lo, int64_t hi) {
          for (int64_t c = lo; c < hi; ++c) {
            const int64_t grp = c / CG;
            S sg{0}, sb{0};
            for (int64_t b = 0; b < B; ++b) {
              const S mean = (*means)[b * G + grp], inv = (*invs)[b * G + grp];
              const S* dyr = g_out + (b * C + c) * spatial;
              const S* xr = x + (b * C + c) * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                sg += dyr[i] * ((xr[i] - mean) * inv);
                sb += dyr[i];
              }
            }
            if (dg) dg[c] += sg;
            if (db) db[c] += sb;
          }
        });
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> relu_impl(GradientTape<S>& tape, const Tensor<S>& input) {
  const bool tracked = detail::track(tape, input);
  Tensor<S> out = Tensor<S>::zeros(input.shape(), tracked);
  const S* in = input.values().data();
  S* dst = out.values().data();
  const int64_t n = input.size();
  for (int64_t i = 0; i < n; ++i) dst[i] = in[i] > S{0} ? in[i] : S{0};
  if (tracked) {
    Tensor<S> in_t = input, out_t = out;
    tape.record([=]() {
      const S* g = out_t.grad().data();
      const S* x = in_t.values().data();
      S* dx = in_t.impl()->grad.data();
      for (int64_t i = 0; i < n; ++i)
        if (x[i] > S{0}) dx[i] += g[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> sigmoid_impl(GradientTape<S>& tape, const Tensor<S>& input) {
  const bool tracked = detail::track(tape, input);
  Tensor<S> out = Tensor<S>::zeros(input.shape(), tracked);
  const S* in = input.values().data();
  S* dst = out.values().data();
  const int64_t n = input.size();
  for (int64_t i = 0; i < n; ++i) {
    // Branch on sign so the exponential never overflows.
    const S x = in[i];
    if (x >= S{0}) {
      const S e = std::exp(-x);
      dst[i] = S{1} / (S{1} + e);
    } else {
      const S e = std::exp(x);
      dst[i] = e / (S{1} + e);
    }
  }
  if (tracked) {
    Tensor<S> in_t = input, out_t = out;
    tape.record([=]() {
      const S* g = out_t.grad().data();
      const S* y = out_t.values().data();
      S* dx = in_t.impl()->grad.data();
      for (int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (S{1} - y[i]);
    });
  }
  return out;
}

template <typename S>
Tensor<S> softmax_temporal_impl(GradientTape<S>& tape, const Tensor<S>& input) {
  const Vol v = as_volume(input.shape(), "softmax_temporal");
  if (v.c != 1)
    throw ValidationError(
        "softmax_temporal: expected a single-channel volume, got " +
        shape_str(input.shape()));
  const int64_t T = v.t, pix = v.h * v.w;
  const bool tracked = detail::track(tape, input);
  Tensor<S> out = Tensor<S>::zeros(input.shape(), tracked);
  const S* in = input.values().data();
  S* dst = out.values().data();

  parallel_for(v.b * pix, [&](int64_t lo, int64_t hi) {
    for (int64_t task = lo; task < hi; ++task) {
      const int64_t b = task / pix, p = task % pix;
      const S* col = in + b * T * pix + p;
      S* ocol = dst + b * T * pix + p;
      S m = col[0];
      for (int64_t t = 1; t < T; ++t) m = std::max(m, col[t * pix]);
      S sum{0};
      for (int64_t t = 0; t < T; ++t) {
        const S e = std::exp(col[t * pix] - m);
        ocol[t * pix] = e;
        sum += e;
      }
      const S inv = S{1} / sum;
      for (int64_t t = 0; t < T; ++t) ocol[t * pix] *= inv;
    }
  });

  if (tracked) {
    Tensor<S> in_t = input, out_t = out;
    const int64_t B = v.b;
    tape.record([=]() {
      const S* g = out_t.grad().data();
      const S* y = out_t.values().data();
      S* dx = in_t.impl()->grad.data();
      parallel_for(B * pix, [&](int64_t lo, int64_t hi) {
        for (int64_t task = lo; task < hi; ++task) {
          const int64_t b = task / pix, p = task % pix;
          const S* ycol = y + b * T * pix + p;
          const S* gcol = g + b * T * pix + p;
          S* dcol = dx + b * T * pix + p;
          S dot{0};
          for (int64_t t = 0; t < T; ++t) dot += gcol[t * pix] * ycol[t * pix];
          for (int64_t t = 0; t < T; ++t)
            dcol[t * pix] += ycol[t * pix] * (gcol[t * pix] - dot);
        }
      });
    });
  }
  return out;
}

template <typename S>
Tensor<S> activation_impl(GradientTape<S>& tape, const Tensor<S>& input,
                     Activation kind) {
  switch (kind) {
    case Activation::kRelu:
      return relu_impl(tape, input);
    case Activation::kSigmoid:
      return sigmoid_impl(tape, input);
    case Activation::kSoftmaxTemporal:
      return softmax_temporal_impl(tape, input);
  }
  throw ValidationError("activation: unknown kind");
}

template <typename S>
Tensor<S> linear_impl(GradientTape<S>& tape, const Tensor<S>& input,
                 const Tensor<S>& weight, const Tensor<S>& bias) {
  if (weight.rank() != 2)
    throw ValidationError("linear: weight must be [out, in], got " +
                          shape_str(weight.shape()));
  const int64_t M = weight.dim(0), N = weight.dim(1);
  const bool batched = input.rank() == 2;
  if (!batched && input.rank() != 1)
    throw ValidationError("linear: input must be [n] or [batch, n], got " +
                          shape_str(input.shape()));
  const int64_t B = batched ? input.dim(0) : 1;
  const int64_t n_in = batched ? input.dim(1) : input.dim(0);
  if (n_in != N)
    throw ValidationError("linear: input " + shape_str(input.shape()) +
                          " does not match weight " +
                          shape_str(weight.shape()));
  if (bias.rank() != 1 || bias.dim(0) != M)
    throw ValidationError("linear: bias " + shape_str(bias.shape()) +
                          " must be [" + std::to_string(M) + "]");

  const bool tracked = detail::track(tape, input, weight, bias);
  Tensor<S> out = Tensor<S>::zeros(batched ? Shape{B, M} : Shape{M}, tracked);
  const S* x = input.values().data();
  const S* w = weight.values().data();
  const S* bv = bias.values().data();
  S* y = out.values().data();
  for (int64_t b = 0; b < B; ++b)
    for (int64_t m = 0; m < M; ++m) {
      const S* xr = x + b * N;
      const S* wr = w + m * N;
      S acc = bv[m];
      for (int64_t i = 0; i < N; ++i) acc += wr[i] * xr[i];
      y[b * M + m] = acc;
    }

  if (tracked) {
    Tensor<S> in_t = input, w_t = weight, b_t = bias, out_t = out;
    const bool need_dx = input.requires_grad();
    const bool need_dw = weight.requires_grad();
    const bool need_db = bias.requires_grad();
    tape.record([=]() {
      const S* g = out_t.grad().data();
      const S* xv = in_t.values().data();
      const S* wv = w_t.values().data();
      for (int64_t b = 0; b < B; ++b) {
        for (int64_t m = 0; m < M; ++m) {
          const S gm = g[b * M + m];
          if (gm == S{0}) continue;
          if (need_dx) {
            S* dx = in_t.impl()->grad.data() + b * N;
            const S* wr = wv + m * N;
            for (int64_t i = 0; i < N; ++i) dx[i] += gm * wr[i];
          }
          if (need_dw) {
            S* dwr = w_t.impl()->grad.data() + m * N;
            const S* xr = xv + b * N;
            for (int64_t i = 0; i < N; ++i) dwr[i] += gm * xr[i];
          }
          if (need_db) b_t.impl()->grad[static_cast<std::size_t>(m)] += gm;
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> concat_channels_impl(GradientTape<S>& tape,
                          const std::vector<Tensor<S>>& parts) {
  if (parts.empty())
    throw ValidationError("concat_channels: no tensors to concatenate");
  const Shape& first = parts.front().shape();
  const Vol v0 = as_volume(first, "concat_channels");
  int64_t total_c = 0;
  for (const auto& p : parts) {
    const Vol vp = as_volume(p.shape(), "concat_channels");
    if (vp.batched != v0.batched || vp.b != v0.b || vp.t != v0.t ||
        vp.h != v0.h || vp.w != v0.w)
      throw ValidationError("concat_channels: extents " +
                            shape_str(p.shape()) + " do not match " +
                            shape_str(first));
    total_c += vp.c;
  }
  Shape out_shape = first;
  out_shape[first.size() - 4] = total_c;

  bool any_grad = false;
  for (const auto& p : parts) any_grad = any_grad || p.requires_grad();
  const bool tracked = tape.recording() && any_grad;

  Tensor<S> out = Tensor<S>::zeros(out_shape, tracked);
  const int64_t spatial = v0.t * v0.h * v0.w;
  S* dst = out.values().data();
  for (int64_t b = 0; b < v0.b; ++b) {
    int64_t c_at = 0;
    for (const auto& p : parts) {
      const int64_t pc = p.shape()[p.rank() - 4];
      const S* src = p.values().data() + b * pc * spatial;
      std::copy(src, src + pc * spatial,
                dst + (b * total_c + c_at) * spatial);
      c_at += pc;
    }
  }

  if (tracked) {
    std::vector<Tensor<S>> held = parts;
    Tensor<S> out_t = out;
    const int64_t bsz = v0.b;
    tape.record([=]() {
      const S* g = out_t.grad().data();
      for (int64_t b = 0; b < bsz; ++b) {
        int64_t c_at = 0;
        for (const auto& p : held) {
          const int64_t pc = p.shape()[p.rank() - 4];
          if (p.requires_grad()) {
            S* dp = p.impl()->grad.data() + b * pc * spatial;
            const S* gs = g + (b * total_c + c_at) * spatial;
            for (int64_t i = 0; i < pc * spatial; ++i) dp[i] += gs[i];
          }
          c_at += pc;
        }
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> reshape_impl(GradientTape<S>& tape, const Tensor<S>& input, Shape target) {
  if (numel(target) != input.size())
    throw ValidationError("reshape: cannot view " +
                          shape_str(input.shape()) + " as " +
                          shape_str(target));
  const bool tracked = detail::track(tape, input);
  Tensor<S> out = Tensor<S>::zeros(std::move(target), tracked);
  std::copy(input.values().begin(), input.values().end(),
            out.values().begin());
  if (tracked) {
    Tensor<S> in_t = input, out_t = out;
    const int64_t n = input.size();
    tape.record([=]() {
      const S* g = out_t.grad().data();
      S* dx = in_t.impl()->grad.data();
      for (int64_t i = 0; i < n; ++i) dx[i] += g[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> scale_add_impl(GradientTape<S>& tape, const Tensor<S>& a,
                    const Tensor<S>& b, S ca, S cb) {
  if (a.shape() != b.shape())
    throw ValidationError("scale_add: shapes " + shape_str(a.shape()) +
                          " and " + shape_str(b.shape()) + " differ");
  const bool tracked = detail::track(tape, a, b);
  Tensor<S> out = Tensor<S>::zeros(a.shape(), tracked);
  const S* av = a.values().data();
  const S* bv = b.values().data();
  S* y = out.values().data();
  const int64_t n = a.size();
  // A zero coefficient contributes exactly nothing: the other term's bits
  // pass through untouched (no +0.0 rounding interaction) and no gradient
  // flows to the zero-weighted side.
  if (cb == S{0}) {
    for (int64_t i = 0; i < n; ++i) y[i] = ca * av[i];
  } else if (ca == S{0}) {
    for (int64_t i = 0; i < n; ++i) y[i] = cb * bv[i];
  } else {
    for (int64_t i = 0; i < n; ++i) y[i] = ca * av[i] + cb * bv[i];
  }
  if (tracked) {
    Tensor<S> a_t = a, b_t = b, out_t = out;
    const bool need_da = a.requires_grad() && ca != S{0};
    const bool need_db = b.requires_grad() && cb != S{0};
    tape.record([=]() {
      const S* g = out_t.grad().data();
      if (need_da) {
        S* da = a_t.impl()->grad.data();
        for (int64_t i = 0; i < n; ++i) da[i] += ca * g[i];
      }
      if (need_db) {
        S* db = b_t.impl()->grad.data();
        for (int64_t i = 0; i < n; ++i) db[i] += cb * g[i];
      }
    });
  }
  return out;
}

}  // namespace

#define PHOTON_DA_DEFINE_MISC(S)                                              \
  template <>                                                                 \
  Tensor<S> pool3d<S>(GradientTape<S>& tape, const Tensor<S>& input,          \
                      PoolMode mode, const Dims3& kernel) {                   \
    return pool3d_impl<S>(tape, input, mode, kernel);                         \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> group_norm<S>(GradientTape<S>& tape, const Tensor<S>& input,      \
                          int groups, const Tensor<S>& gamma,                 \
                          const Tensor<S>& beta, S eps) {                     \
    return group_norm_impl<S>(tape, input, groups, gamma, beta, eps);         \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> relu<S>(GradientTape<S>& tape, const Tensor<S>& input) {          \
    return relu_impl<S>(tape, input);                                         \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> sigmoid<S>(GradientTape<S>& tape, const Tensor<S>& input) {       \
    return sigmoid_impl<S>(tape, input);                                      \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> softmax_temporal<S>(GradientTape<S>& tape,                        \
                                const Tensor<S>& input) {                     \
    return softmax_temporal_impl<S>(tape, input);                             \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> activation<S>(GradientTape<S>& tape, const Tensor<S>& input,      \
                          Activation kind) {                                  \
    return activation_impl<S>(tape, input, kind);                             \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> linear<S>(GradientTape<S>& tape, const Tensor<S>& input,          \
                      const Tensor<S>& weight, const Tensor<S>& bias) {       \
    return linear_impl<S>(tape, input, weight, bias);                         \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> concat_channels<S>(GradientTape<S>& tape,                         \
                               const std::vector<Tensor<S>>& parts) {         \
    return concat_channels_impl<S>(tape, parts);                              \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> reshape<S>(GradientTape<S>& tape, const Tensor<S>& input,         \
                       Shape target) {                                        \
    return reshape_impl<S>(tape, input, std::move(target));                   \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> scale_add<S>(GradientTape<S>& tape, const Tensor<S>& a,           \
                         const Tensor<S>& b, S ca, S cb) {                    \
    return scale_add_impl<S>(tape, a, b, ca, cb);                             \
  }

PHOTON_DA_DEFINE_MISC(float)
PHOTON_DA_DEFINE_MISC(double)
#undef PHOTON_DA_DEFINE_MISC

}  // namespace photon_da
