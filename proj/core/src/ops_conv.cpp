#include <algorithm>
#include <cstdint>
#include <string>

#include "photon_da/ops.hpp"
#include "photon_da/parallel.hpp"

namespace photon_da {
namespace {

using std::int64_t;

/// Extents of a volume tensor, with a synthetic batch of 1 for rank-4 input.
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

void check_padding(const Dims3& padding, const char* op) {
  for (int p : padding)
    if (p < 0)
      throw ValidationError(std::string(op) + ": negative padding " +
                            std::to_string(p));
}

// Integer division helpers valid for negative numerators (positive divisor).
int64_t ceil_div(int64_t a, int64_t b) {
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}
int64_t floor_div(int64_t a, int64_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

}  // namespace

Shape conv3d_output_shape(const Shape& input, const Shape& weight,
                          const Dims3& padding) {
  const Vol v = as_volume(input, "conv3d");
  if (weight.size() != 5)
    throw ValidationError("conv3d: weight must be [C_out, C_in, kT, kH, kW], "
                          "got " + shape_str(weight));
  check_padding(padding, "conv3d");
  if (v.c != weight[1])
    throw ValidationError("conv3d: input " + shape_str(input) + " has " +
                          std::to_string(v.c) +
                          " channels but weight " + shape_str(weight) +
                          " expects " + std::to_string(weight[1]));
  const int64_t in_ext[3] = {v.t, v.h, v.w};
  int64_t out_ext[3];
  for (int a = 0; a < 3; ++a) {
    const int64_t k = weight[2 + a];
    if (k < 1)
      throw ValidationError("conv3d: invalid kernel in weight " +
                            shape_str(weight));
    out_ext[a] = in_ext[a] + 2 * padding[a] - k + 1;
    if (out_ext[a] < 1)
      throw ValidationError("conv3d: kernel " + shape_str(weight) +
                            " exceeds padded input " + shape_str(input));
  }
  if (v.batched) return {v.b, weight[0], out_ext[0], out_ext[1], out_ext[2]};
  return {weight[0], out_ext[0], out_ext[1], out_ext[2]};
}

Shape deconv3d_output_shape(const Shape& input, const Shape& weight,
                            const Dims3& stride, const Dims3& padding) {
  const Vol v = as_volume(input, "deconv3d");
  if (weight.size() != 5)
    throw ValidationError("deconv3d: weight must be [C_in, C_out, kT, kH, kW], "
                          "got " + shape_str(weight));
  check_padding(padding, "deconv3d");
  for (int s : stride)
    if (s < 1)
      throw ValidationError("deconv3d: invalid stride " + std::to_string(s));
  if (v.c != weight[0])
    throw ValidationError("deconv3d: input " + shape_str(input) + " has " +
                          std::to_string(v.c) +
                          " channels but weight " + shape_str(weight) +
                          " expects " + std::to_string(weight[0]));
  const int64_t in_ext[3] = {v.t, v.h, v.w};
  int64_t out_ext[3];
  for (int a = 0; a < 3; ++a) {
    const int64_t k = weight[2 + a];
    if (k < 1)
      throw ValidationError("deconv3d: invalid kernel in weight " +
                            shape_str(weight));
    out_ext[a] = (in_ext[a] - 1) * stride[a] - 2 * padding[a] + k;
    if (out_ext[a] < 1)
      throw ValidationError("deconv3d: degenerate output extent for input " +
                            shape_str(input) + ", weight " + shape_str(weight));
  }
  if (v.batched) return {v.b, weight[1], out_ext[0], out_ext[1], out_ext[2]};
  return {weight[1], out_ext[0], out_ext[1], out_ext[2]};
}

namespace {

template <typename S>
void check_bias(const Tensor<S>& bias, int64_t c_out, const char* op) {
  if (bias.rank() != 1 || bias.dim(0) != c_out)
    throw ValidationError(std::string(op) + ": bias " +
                          shape_str(bias.shape()) + " must be [" +
                          std::to_string(c_out) + "]");
}

// The bodies live in implicitly instantiated helpers: gcc refuses to emit
// std::function constructors over local lambda types from an explicit
// template instantiation, so the public entry points are per-type
// specializations that delegate here.
template <typename S>
Tensor<S> conv3d_impl(GradientTape<S>& tape, const Tensor<S>& input,
                      const Tensor<S>& weight, const Tensor<S>& bias,
                      const Dims3& padding) {
  const Shape out_shape = conv3d_output_shape(input.shape(), weight.shape(),
                                              padding);
  const Vol v = as_volume(input.shape(), "conv3d");
  check_bias(bias, weight.shape()[0], "conv3d");
  const int64_t Co = weight.dim(0), Ci = v.c;
  const int64_t KT = weight.dim(2), KH = weight.dim(3), KW = weight.dim(4);
  const int64_t pt = padding[0], ph = padding[1], pw = padding[2];
  const int64_t T = v.t, H = v.h, W = v.w;
  const int64_t OT = T + 2 * pt - KT + 1;
  const int64_t OH = H + 2 * ph - KH + 1;
  const int64_t OW = W + 2 * pw - KW + 1;

  const bool tracked = detail::track(tape, input, weight, bias);
  Tensor<S> out = Tensor<S>::zeros(out_shape, tracked);

  const S* in = input.values().data();
  const S* wt = weight.values().data();
  const S* bs = bias.values().data();
  S* dst = out.values().data();

  // Each task owns complete (b, co) output planes, so results are identical
  // for every worker count.
  parallel_for(v.b * Co, [&](int64_t lo, int64_t hi) {
    for (int64_t task = lo; task < hi; ++task) {
      const int64_t b = task / Co, co = task % Co;
      S* plane = dst + task * OT * OH * OW;
      std::fill(plane, plane + OT * OH * OW, bs[co]);
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const S* chan = in + (b * Ci + ci) * T * H * W;
        for (int64_t kt = 0; kt < KT; ++kt) {
          const int64_t ot_lo = std::max<int64_t>(0, pt - kt);
          const int64_t ot_hi = std::min(OT, T + pt - kt);
          for (int64_t kh = 0; kh < KH; ++kh) {
            const int64_t oh_lo = std::max<int64_t>(0, ph - kh);
            const int64_t oh_hi = std::min(OH, H + ph - kh);
            for (int64_t kw = 0; kw < KW; ++kw) {
              const int64_t ow_lo = std::max<int64_t>(0, pw - kw);
              const int64_t ow_hi = std::min(OW, W + pw - kw);
              if (ow_lo >= ow_hi) continue;
              const S wv = wt[(((co * Ci + ci) * KT + kt) * KH + kh) * KW + kw];
              const int64_t off = kw - pw;
              for (int64_t ot = ot_lo; ot < ot_hi; ++ot) {
                const int64_t t = ot + kt - pt;
                for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                  const int64_t h = oh + kh - ph;
                  const S* row = chan + (t * H + h) * W;
                  S* orow = plane + (ot * OH + oh) * OW;
                  for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                    orow[ow] += wv * row[ow + off];
                }
              }
            }
          }
        }
      }
    }
  });

  if (tracked) {
    Tensor<S> in_t = input, wt_t = weight, bs_t = bias, out_t = out;
    const bool need_dx = input.requires_grad();
    const bool need_dw = weight.requires_grad();
    const bool need_db = bias.requires_grad();
    const int64_t B = v.b;
    tape.record([=]() {
      const S* g = out_t.grad().data();
      const S* inv = in_t.values().data();
      const S* wv_all = wt_t.values().data();
      if (need_db) {
        S* db = bs_t.impl()->grad.data();
        for (int64_t co = 0; co < Co; ++co) {
          S acc{0};
          for (int64_t b = 0; b < B; ++b) {
            const S* plane = g + (b * Co + co) * OT * OH * OW;
            for (int64_t i = 0; i < OT * OH * OW; ++i) acc += plane[i];
          }
          db[co] += acc;
        }
      }
      if (need_dx) {
        S* dx = in_t.impl()->grad.data();
        parallel_for(B * Ci, [&](int64_t lo, int64_t hi) {
          for (int64_t task = lo; task < hi; ++task) {
            const int64_t b = task / Ci, ci = task % Ci;
            S* dplane = dx + task * T * H * W;
            for (int64_t co = 0; co < Co; ++co) {
              const S* gplane = g + (b * Co + co) * OT * OH * OW;
              for (int64_t kt = 0; kt < KT; ++kt) {
                const int64_t t_lo = std::max<int64_t>(0, kt - pt);
                const int64_t t_hi = std::min(T, OT + kt - pt);
                for (int64_t kh = 0; kh < KH; ++kh) {
                  const int64_t h_lo = std::max<int64_t>(0, kh - ph);
                  const int64_t h_hi = std::min(H, OH + kh - ph);
                  for (int64_t kw = 0; kw < KW; ++kw) {
                    const int64_t w_lo = std::max<int64_t>(0, kw - pw);
                    const int64_t w_hi = std::min(W, OW + kw - pw);
                    if (w_lo >= w_hi) continue;
                    const S wv =
                        wv_all[(((co * Ci + ci) * KT + kt) * KH + kh) * KW + kw];
                    const int64_t off = pw - kw;
                    for (int64_t t = t_lo; t < t_hi; ++t) {
                      const int64_t ot = t - kt + pt;
                      for (int64_t h = h_lo; h < h_hi; ++h) {
                        const int64_t oh = h - kh + ph;
                        const S* grow = gplane + (ot * OH + oh) * OW;
                        S* drow = dplane + (t * H + h) * W;
                        for (int64_t w = w_lo; w < w_hi; ++w)
                          drow[w] += wv * grow[w + off];
                      }
                    }
                  }
                }
              }
            }
          }
        });
      }
      if (need_dw) {
        S* dw = wt_t.impl()->grad.data();
        parallel_for(Co * Ci, [&](int64_t lo, int64_t hi) {
          for (int64_t task = lo; task < hi; ++task) {
            const int64_t co = task / Ci, ci = task % Ci;
            for (int64_t kt = 0; kt < KT; ++kt) {
              const int64_t ot_lo = std::max<int64_t>(0, pt - kt);
              const int64_t ot_hi = std::min(OT, T + pt - kt);
              for (int64_t kh = 0; kh < KH; ++kh) {
                const int64_t oh_lo = std::max<int64_t>(0, ph - kh);
                const int64_t oh_hi = std::min(OH, H + ph - kh);
                for (int64_t kw = 0; kw < KW; ++kw) {
                  const int64_t ow_lo = std::max<int64_t>(0, pw - kw);
                  const int64_t ow_hi = std::min(OW, W + pw - kw);
                  S acc{0};
                  const int64_t off = kw - pw;
                  for (int64_t b = 0; b < B; ++b) {
                    const S* gplane = g + (b * Co + co) * OT * OH * OW;
                    const S* chan = inv + (b * Ci + ci) * T * H * W;
                    for (int64_t ot = ot_lo; ot < ot_hi; ++ot) {
                      const int64_t t = ot + kt - pt;
                      for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                        const int64_t h = oh + kh - ph;
                        const S* row = chan + (t * H + h) * W;
                        const S* grow = gplane + (ot * OH + oh) * OW;
                        for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                          acc += grow[ow] * row[ow + off];
                      }
                    }
                  }
                  dw[(((co * Ci + ci) * KT + kt) * KH + kh) * KW + kw] += acc;
                }
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
Tensor<S> deconv3d_impl(GradientTape<S>& tape, const Tensor<S>& input,
                        const Tensor<S>& weight, const Tensor<S>& bias,
                        const Dims3& stride, const Dims3& padding) {
  const Shape out_shape =
      deconv3d_output_shape(input.shape(), weight.shape(), stride, padding);
  const Vol v = as_volume(input.shape(), "deconv3d");
  check_bias(bias, weight.shape()[1], "deconv3d");
  const int64_t Ci = v.c, Co = weight.dim(1);
  const int64_t KT = weight.dim(2), KH = weight.dim(3), KW = weight.dim(4);
  const int64_t st = stride[0], sh = stride[1], sw = stride[2];
  const int64_t pt = padding[0], ph = padding[1], pw = padding[2];
  const int64_t T = v.t, H = v.h, W = v.w;
  const int64_t OT = (T - 1) * st - 2 * pt + KT;
  const int64_t OH = (H - 1) * sh - 2 * ph + KH;
  const int64_t OW = (W - 1) * sw - 2 * pw + KW;

  const bool tracked = detail::track(tape, input, weight, bias);
  Tensor<S> out = Tensor<S>::zeros(out_shape, tracked);

  const S* in = input.values().data();
  const S* wt = weight.values().data();
  const S* bs = bias.values().data();
  S* dst = out.values().data();
  const int64_t B = v.b;

  // In-bounds input ranges for a fixed kernel offset: the scatter target
  // i*stride - padding + k must land inside the output extent.
  const auto lo_of = [](int64_t p, int64_t k, int64_t s) {
    return std::max<int64_t>(0, ceil_div(p - k, s));
  };
  const auto hi_of = [](int64_t p, int64_t k, int64_t s, int64_t out_ext,
                        int64_t in_ext) {
    return std::min(in_ext, floor_div(out_ext - 1 + p - k, s) + 1);
  };

  parallel_for(B * Co, [&](int64_t lo, int64_t hi) {
    for (int64_t task = lo; task < hi; ++task) {
      const int64_t b = task / Co, co = task % Co;
      S* plane = dst + task * OT * OH * OW;
      std::fill(plane, plane + OT * OH * OW, bs[co]);
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const S* chan = in + (b * Ci + ci) * T * H * W;
        for (int64_t kt = 0; kt < KT; ++kt) {
          const int64_t t_lo = lo_of(pt, kt, st), t_hi = hi_of(pt, kt, st, OT, T);
          for (int64_t kh = 0; kh < KH; ++kh) {
            const int64_t h_lo = lo_of(ph, kh, sh),
                          h_hi = hi_of(ph, kh, sh, OH, H);
            for (int64_t kw = 0; kw < KW; ++kw) {
              const int64_t w_lo = lo_of(pw, kw, sw),
                            w_hi = hi_of(pw, kw, sw, OW, W);
              if (w_lo >= w_hi) continue;
              const S wv = wt[(((ci * Co + co) * KT + kt) * KH + kh) * KW + kw];
              for (int64_t t = t_lo; t < t_hi; ++t) {
                const int64_t ot = t * st - pt + kt;
                for (int64_t h = h_lo; h < h_hi; ++h) {
                  const int64_t oh = h * sh - ph + kh;
                  const S* row = chan + (t * H + h) * W;
                  S* orow = plane + (ot * OH + oh) * OW;
                  if (sw == 1) {
                    const int64_t off = kw - pw;
                    for (int64_t w = w_lo; w < w_hi; ++w)
                      orow[w + off] += wv * row[w];
                  } else {
                    for (int64_t w = w_lo; w < w_hi; ++w)
                      orow[w * sw - pw + kw] += wv * row[w];
                  }
                }
              }
            }
          }
        }
      }
    }
  });

  if (tracked) {
    Tensor<S> in_t = input, wt_t = weight, bs_t = bias, out_t = out;
    const bool need_dx = input.requires_grad();
    const bool need_dw = weight.requires_grad();
    const bool need_db = bias.requires_grad();
    tape.record([=]() {
      const S* g = out_t.grad().data();
      const S* inv = in_t.values().data();
      const S* wv_all = wt_t.values().data();
      if (need_db) {
        S* db = bs_t.impl()->grad.data();
        for (int64_t co = 0; co < Co; ++co) {
          S acc{0};
          for (int64_t b = 0; b < B; ++b) {
            const S* plane = g + (b * Co + co) * OT * OH * OW;
            for (int64_t i = 0; i < OT * OH * OW; ++i) acc += plane[i];
          }
          db[co] += acc;
        }
      }
      if (need_dx) {
        // d_in gathers the same (input, output) pairs the forward scatter
        // touched, so bounds reuse lo_of/hi_of unchanged.
        S* dx = in_t.impl()->grad.data();
        parallel_for(B * Ci, [&](int64_t lo, int64_t hi) {
          for (int64_t task = lo; task < hi; ++task) {
            const int64_t b = task / Ci, ci = task % Ci;
            S* dplane = dx + task * T * H * W;
            for (int64_t co = 0; co < Co; ++co) {
              const S* gplane = g + (b * Co + co) * OT * OH * OW;
              for (int64_t kt = 0; kt < KT; ++kt) {
                const int64_t t_lo = lo_of(pt, kt, st),
                              t_hi = hi_of(pt, kt, st, OT, T);
                for (int64_t kh = 0; kh < KH; ++kh) {
                  const int64_t h_lo = lo_of(ph, kh, sh),
                                h_hi = hi_of(ph, kh, sh, OH, H);
                  for (int64_t kw = 0; kw < KW; ++kw) {
                    const int64_t w_lo = lo_of(pw, kw, sw),
                                  w_hi = hi_of(pw, kw, sw, OW, W);
                    if (w_lo >= w_hi) continue;
                    const S wv =
                        wv_all[(((ci * Co + co) * KT + kt) * KH + kh) * KW + kw];
                    for (int64_t t = t_lo; t < t_hi; ++t) {
                      const int64_t ot = t * st - pt + kt;
                      for (int64_t h = h_lo; h < h_hi; ++h) {
                        const int64_t oh = h * sh - ph + kh;
                        const S* grow = gplane + (ot * OH + oh) * OW;
                        S* drow = dplane + (t * H + h) * W;
                        if (sw == 1) {
                          const int64_t off = kw - pw;
                          for (int64_t w = w_lo; w < w_hi; ++w)
                            drow[w] += wv * grow[w + off];
                        } else {
                          for (int64_t w = w_lo; w < w_hi; ++w)
                            drow[w] += wv * grow[w * sw - pw + kw];
                        }
                      }
                    }
                  }
                }
              }
            }
          }
        });
      }
      if (need_dw) {
        S* dw = wt_t.impl()->grad.data();
        parallel_for(Ci * Co, [&](int64_t lo, int64_t hi) {
          for (int64_t task = lo; task < hi; ++task) {
            const int64_t ci = task / Co, co = task % Co;
            for (int64_t kt = 0; kt < KT; ++kt) {
              const int64_t t_lo = lo_of(pt, kt, st),
                            t_hi = hi_of(pt, kt, st, OT, T);
              for (int64_t kh = 0; kh < KH; ++kh) {
                const int64_t h_lo = lo_of(ph, kh, sh),
                              h_hi = hi_of(ph, kh, sh, OH, H);
                for (int64_t kw = 0; kw < KW; ++kw) {
                  const int64_t w_lo = lo_of(pw, kw, sw),
                                w_hi = hi_of(pw, kw, sw, OW, W);
                  S acc{0};
                  for (int64_t b = 0; b < B; ++b) {
                    const S* chan = inv + (b * Ci + ci) * T * H * W;
                    const S* gplane = g + (b * Co + co) * OT * OH * OW;
                    for (int64_t t = t_lo; t < t_hi; ++t) {
                      const int64_t ot = t * st - pt + kt;
                      for (int64_t h = h_lo; h < h_hi; ++h) {
                        const int64_t oh = h * sh - ph + kh;
                        const S* row = chan + (t * H + h) * W;
                        const S* grow = gplane + (ot * OH + oh) * OW;
                        if (sw == 1) {
                          const int64_t off = kw - pw;
                          for (int64_t w = w_lo; w < w_hi; ++w)
                            acc += row[w] * grow[w + off];
                        } else {
                          for (int64_t w = w_lo; w < w_hi; ++w)
                            acc += row[w] * grow[w * sw - pw + kw];
                        }
                      }
                    }
                  }
                  dw[(((ci * Co + co) * KT + kt) * KH + kh) * KW + kw] += acc;
                }
              }
            }
          }
        });
      }
    });
  }
  return out;
}

}  // namespace

#define PHOTON_DA_DEFINE_CONV(S)                                              \
  template <>                                                                 \
  Tensor<S> conv3d<S>(GradientTape<S>& tape, const Tensor<S>& input,          \
                      const Tensor<S>& weight, const Tensor<S>& bias,         \
                      const Dims3& padding) {                                 \
    return conv3d_impl<S>(tape, input, weight, bias, padding);                \
  }                                                                           \
  template <>                                                                 \
  Tensor<S> deconv3d<S>(GradientTape<S>& tape, const Tensor<S>& input,        \
                        const Tensor<S>& weight, const Tensor<S>& bias,       \
                        const Dims3& stride, const Dims3& padding) {          \
    return deconv3d_impl<S>(tape, input, weight, bias, stride, padding);      \
  }

PHOTON_DA_DEFINE_CONV(float)
PHOTON_DA_DEFINE_CONV(double)
#undef PHOTON_DA_DEFINE_CONV

}  // namespace photon_da
