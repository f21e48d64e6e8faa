#pragma once

#include <cmath>
#include <vector>

#include "din/ops.hpp"

namespace din {

// 2x2/stride-2 max pooling (the VGG downsampling op). Odd trailing rows
// and columns are dropped; ties route the gradient to the first maximum.
inline Tensor max_pool2x2(const Tensor& x) {
  check(x.rank() == 4, "max_pool2x2 expects NCHW input");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check(H >= 2 && W >= 2, "max_pool2x2: spatial size must be at least 2x2");
  const int64_t Hout = H / 2, Wout = W / 2;
  Tensor out = Tensor::zeros({N, C, Hout, Wout});
  auto xv = x.data();
  auto ov = out.mut_data();
  std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* src = xv.data() + nc * H * W;
    double* dst = ov.data() + nc * Hout * Wout;
    int64_t* amax = argmax.data() + nc * Hout * Wout;
    for (int64_t oh = 0; oh < Hout; ++oh)
      for (int64_t ow = 0; ow < Wout; ++ow) {
        int64_t best = (2 * oh) * W + 2 * ow;
        double bv = src[best];
        const int64_t cand[3] = {(2 * oh) * W + 2 * ow + 1, (2 * oh + 1) * W + 2 * ow,
                                 (2 * oh + 1) * W + 2 * ow + 1};
        for (int64_t idx : cand)
          if (src[idx] > bv) {
            bv = src[idx];
            best = idx;
          }
        dst[oh * Wout + ow] = bv;
        amax[oh * Wout + ow] = best;
      }
  }
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out, argmax = std::move(argmax), N, C, H, W, Hout, Wout]() {
      auto g = out.grad();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* gsrc = g.data() + nc * Hout * Wout;
        const int64_t* amax = argmax.data() + nc * Hout * Wout;
        double* gdst = gx.data() + nc * H * W;
        for (int64_t i = 0; i < Hout * Wout; ++i) gdst[amax[i]] += gsrc[i];
      }
    });
  }
  return out;
}

// Mean over floor/ceil-partitioned windows, matching the usual adaptive
// average pooling semantics; output cell (i,j) averages input rows
// [i*H/oh, ceil((i+1)*H/oh)) and the analogous columns.
inline Tensor adaptive_avg_pool(const Tensor& x, int64_t out_h, int64_t out_w) {
  check(x.rank() == 4, "adaptive_avg_pool expects NCHW input");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  check(out_h >= 1 && out_w >= 1, "adaptive_avg_pool: output size must be positive");
  check(out_h <= H && out_w <= W, "adaptive_avg_pool: requested output " + std::to_string(out_h) + "x" +
                                      std::to_string(out_w) + " larger than input " + std::to_string(H) + "x" +
                                      std::to_string(W));
  Tensor out = Tensor::zeros({N, C, out_h, out_w});
  auto xv = x.data();
  auto ov = out.mut_data();
  auto h_lo = [&](int64_t i) { return i * H / out_h; };
  auto h_hi = [&](int64_t i) { return ((i + 1) * H + out_h - 1) / out_h; };
  auto w_lo = [&](int64_t j) { return j * W / out_w; };
  auto w_hi = [&](int64_t j) { return ((j + 1) * W + out_w - 1) / out_w; };
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* src = xv.data() + nc * H * W;
    double* dst = ov.data() + nc * out_h * out_w;
    for (int64_t i = 0; i < out_h; ++i)
      for (int64_t j = 0; j < out_w; ++j) {
        double acc = 0.0;
        for (int64_t h = h_lo(i); h < h_hi(i); ++h)
          for (int64_t w = w_lo(j); w < w_hi(j); ++w) acc += src[h * W + w];
        dst[i * out_w + j] = acc / static_cast<double>((h_hi(i) - h_lo(i)) * (w_hi(j) - w_lo(j)));
      }
  }
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out, N, C, H, W, out_h, out_w]() {
      auto g = out.grad();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      auto h_lo2 = [&](int64_t i) { return i * H / out_h; };
      auto h_hi2 = [&](int64_t i) { return ((i + 1) * H + out_h - 1) / out_h; };
      auto w_lo2 = [&](int64_t j) { return j * W / out_w; };
      auto w_hi2 = [&](int64_t j) { return ((j + 1) * W + out_w - 1) / out_w; };
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* gsrc = g.data() + nc * out_h * out_w;
        double* gdst = gx.data() + nc * H * W;
        for (int64_t i = 0; i < out_h; ++i)
          for (int64_t j = 0; j < out_w; ++j) {
            const double gv =
                gsrc[i * out_w + j] / static_cast<double>((h_hi2(i) - h_lo2(i)) * (w_hi2(j) - w_lo2(j)));
            for (int64_t h = h_lo2(i); h < h_hi2(i); ++h)
              for (int64_t w = w_lo2(j); w < w_hi2(j); ++w) gdst[h * W + w] += gv;
          }
      }
    });
  }
  return out;
}

namespace detail {

// align-corners-false source coordinate, clamped into the valid range
struct BilinearTap {
  int64_t lo, hi;
  double t;
};

inline BilinearTap bilinear_tap(int64_t dst, int64_t scale, int64_t size) {
  double src = (static_cast<double>(dst) + 0.5) / static_cast<double>(scale) - 0.5;
  if (src < 0.0) src = 0.0;
  const double max_pos = static_cast<double>(size - 1);
  if (src > max_pos) src = max_pos;
  BilinearTap tap;
  tap.lo = static_cast<int64_t>(src);
  tap.hi = tap.lo + 1 < size ? tap.lo + 1 : size - 1;
  tap.t = src - static_cast<double>(tap.lo);
  return tap;
}

}  // namespace detail

inline Tensor bilinear_upsample(const Tensor& x, int64_t scale) {
  check(x.rank() == 4, "bilinear_upsample expects NCHW input");
  check(scale >= 2, "bilinear_upsample: integer scale must be >= 2");
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Hout = H * scale, Wout = W * scale;
  Tensor out = Tensor::zeros({N, C, Hout, Wout});
  auto xv = x.data();
  auto ov = out.mut_data();
  std::vector<detail::BilinearTap> htap(static_cast<size_t>(Hout)), wtap(static_cast<size_t>(Wout));
  for (int64_t i = 0; i < Hout; ++i) htap[i] = detail::bilinear_tap(i, scale, H);
  for (int64_t j = 0; j < Wout; ++j) wtap[j] = detail::bilinear_tap(j, scale, W);
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* src = xv.data() + nc * H * W;
    double* dst = ov.data() + nc * Hout * Wout;
    for (int64_t i = 0; i < Hout; ++i) {
      const auto& th = htap[i];
      for (int64_t j = 0; j < Wout; ++j) {
        const auto& tw = wtap[j];
        dst[i * Wout + j] = (1.0 - th.t) * ((1.0 - tw.t) * src[th.lo * W + tw.lo] + tw.t * src[th.lo * W + tw.hi]) +
                            th.t * ((1.0 - tw.t) * src[th.hi * W + tw.lo] + tw.t * src[th.hi * W + tw.hi]);
      }
    }
  }
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out, htap = std::move(htap), wtap = std::move(wtap), N, C, H, W, Hout,
                                  Wout]() {
      auto g = out.grad();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* gsrc = g.data() + nc * Hout * Wout;
        double* gdst = gx.data() + nc * H * W;
        for (int64_t i = 0; i < Hout; ++i) {
          const auto& th = htap[i];
          for (int64_t j = 0; j < Wout; ++j) {
            const auto& tw = wtap[j];
            const double gv = gsrc[i * Wout + j];
            gdst[th.lo * W + tw.lo] += (1.0 - th.t) * (1.0 - tw.t) * gv;
            gdst[th.lo * W + tw.hi] += (1.0 - th.t) * tw.t * gv;
            gdst[th.hi * W + tw.lo] += th.t * (1.0 - tw.t) * gv;
            gdst[th.hi * W + tw.hi] += th.t * tw.t * gv;
          }
        }
      }
    });
  }
  return out;
}

}  // namespace din
