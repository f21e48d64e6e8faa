#pragma once

#include <vector>

#include "din/conv.hpp"

namespace din {

// Fractional sampling displacements for a deformable convolution, shaped
// [N, 2*kH*kW, Hout, Wout]; channel 2k holds dy and 2k+1 holds dx for
// kernel tap k = kh*kW + kw.
struct OffsetField {
  Tensor offsets;
};

namespace detail {

struct BilinearSample {
  double value = 0.0;
  // corner indices (-1 when out of bounds) and weights
  int64_t idx[4] = {-1, -1, -1, -1};
  double wgt[4] = {0, 0, 0, 0};
  double dh = 0.0, dw = 0.0;  // d value / d coordinate
  bool inside = false;
};

// Out-of-bounds samples read zero; a sample is dead once it leaves the
// [-1, size] band around the image.
inline BilinearSample bilinear_at(const double* plane, int64_t H, int64_t W, double h, double w) {
  BilinearSample s;
  if (h <= -1.0 || h >= static_cast<double>(H) || w <= -1.0 || w >= static_cast<double>(W)) return s;
  s.inside = true;
  const int64_t h0 = static_cast<int64_t>(std::floor(h));
  const int64_t w0 = static_cast<int64_t>(std::floor(w));
  const int64_t h1 = h0 + 1, w1 = w0 + 1;
  const double lh = h - static_cast<double>(h0);
  const double lw = w - static_cast<double>(w0);
  double v[4] = {0, 0, 0, 0};
  if (h0 >= 0 && w0 >= 0) {
    s.idx[0] = h0 * W + w0;
    v[0] = plane[s.idx[0]];
  }
  if (h0 >= 0 && w1 <= W - 1) {
    s.idx[1] = h0 * W + w1;
    v[1] = plane[s.idx[1]];
  }
  if (h1 <= H - 1 && w0 >= 0) {
    s.idx[2] = h1 * W + w0;
    v[2] = plane[s.idx[2]];
  }
  if (h1 <= H - 1 && w1 <= W - 1) {
    s.idx[3] = h1 * W + w1;
    v[3] = plane[s.idx[3]];
  }
  s.wgt[0] = (1.0 - lh) * (1.0 - lw);
  s.wgt[1] = (1.0 - lh) * lw;
  s.wgt[2] = lh * (1.0 - lw);
  s.wgt[3] = lh * lw;
  s.value = s.wgt[0] * v[0] + s.wgt[1] * v[1] + s.wgt[2] * v[2] + s.wgt[3] * v[3];
  s.dh = (v[2] - v[0]) * (1.0 - lw) + (v[3] - v[1]) * lw;
  s.dw = (v[1] - v[0]) * (1.0 - lh) + (v[3] - v[2]) * lh;
  return s;
}

}  // namespace detail

// Deformable cross-correlation: each kernel tap samples the (zero padded)
// input at its base position plus a learned fractional offset, through
// bilinear interpolation. Differentiable in x, kernel, bias, and offsets.
inline Tensor deformable_conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, const Tensor& offsets,
                                int64_t stride = 1, int64_t padding = 0) {
  check(x.rank() == 4 && kernel.rank() == 4, "deformable_conv2d expects NCHW input and 4-d kernel");
  const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = kernel.dim(0), kH = kernel.dim(2), kW = kernel.dim(3);
  check(kernel.dim(1) == Cin, "deformable_conv2d: channel mismatch (groups are not supported)");
  check(H + 2 * padding >= kH && W + 2 * padding >= kW, "deformable_conv2d: input smaller than kernel");
  const int64_t Hout = (H + 2 * padding - kH) / stride + 1;
  const int64_t Wout = (W + 2 * padding - kW) / stride + 1;
  check(offsets.defined() && offsets.rank() == 4 && offsets.dim(0) == N && offsets.dim(1) == 2 * kH * kW &&
            offsets.dim(2) == Hout && offsets.dim(3) == Wout,
        "offset field must be [N," + std::to_string(2 * kH * kW) + "," + std::to_string(Hout) + "," +
            std::to_string(Wout) + "], got " + (offsets.defined() ? shape_str(offsets.shape()) : "undefined"));
  if (bias.defined()) check(bias.rank() == 1 && bias.dim(0) == Cout, "deformable_conv2d: bad bias shape");

  Tensor out = Tensor::zeros({N, Cout, Hout, Wout});
  auto xv = x.data();
  auto wv = kernel.data();
  auto offv = offsets.data();
  auto ov = out.mut_data();
  const int64_t hw_out = Hout * Wout;
  std::vector<double> acc(static_cast<size_t>(Cout));
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t oh = 0; oh < Hout; ++oh)
      for (int64_t ow = 0; ow < Wout; ++ow) {
        if (bias.defined()) {
          auto bv = bias.data();
          for (int64_t co = 0; co < Cout; ++co) acc[co] = bv[co];
        } else {
          std::fill(acc.begin(), acc.end(), 0.0);
        }
        for (int64_t kh = 0; kh < kH; ++kh)
          for (int64_t kw = 0; kw < kW; ++kw) {
            const int64_t k = kh * kW + kw;
            const double dy = offv[((n * 2 * kH * kW + 2 * k) * Hout + oh) * Wout + ow];
            const double dx = offv[((n * 2 * kH * kW + 2 * k + 1) * Hout + oh) * Wout + ow];
            const double hs = static_cast<double>(oh * stride - padding + kh) + dy;
            const double ws = static_cast<double>(ow * stride - padding + kw) + dx;
            for (int64_t ci = 0; ci < Cin; ++ci) {
              const auto s = detail::bilinear_at(xv.data() + (n * Cin + ci) * H * W, H, W, hs, ws);
              if (!s.inside) continue;
              const double* wcol = wv.data() + (ci * kH + kh) * kW + kw;
              for (int64_t co = 0; co < Cout; ++co) acc[co] += wcol[co * Cin * kH * kW] * s.value;
            }
          }
        for (int64_t co = 0; co < Cout; ++co) ov[(n * Cout + co) * hw_out + oh * Wout + ow] = acc[co];
      }
  }

  if (detail::should_record({&x, &kernel, &bias, &offsets})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, kernel, bias, offsets, out, stride, padding, N, Cin, H, W, Cout, kH, kW,
                                  Hout, Wout, hw_out]() {
      auto g = out.grad();
      auto xv2 = x.data();
      auto wv2 = kernel.data();
      auto offv2 = offsets.data();
      const bool need_x = x.requires_grad();
      const bool need_w = kernel.requires_grad();
      const bool need_b = bias.defined() && bias.requires_grad();
      const bool need_o = offsets.requires_grad();
      Tensor xt = x, wt = kernel, bt = bias, ot = offsets;
      std::vector<double>* gx = need_x ? &xt.grad_buffer() : nullptr;
      std::vector<double>* gw = need_w ? &wt.grad_buffer() : nullptr;
      std::vector<double>* gb = need_b ? &bt.grad_buffer() : nullptr;
      std::vector<double>* go = need_o ? &ot.grad_buffer() : nullptr;
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t oh = 0; oh < Hout; ++oh)
          for (int64_t ow = 0; ow < Wout; ++ow) {
            const double* gcol = g.data() + n * Cout * hw_out + oh * Wout + ow;
            if (need_b)
              for (int64_t co = 0; co < Cout; ++co) (*gb)[co] += gcol[co * hw_out];
            for (int64_t kh = 0; kh < kH; ++kh)
              for (int64_t kw = 0; kw < kW; ++kw) {
                const int64_t k = kh * kW + kw;
                const int64_t oy = ((n * 2 * kH * kW + 2 * k) * Hout + oh) * Wout + ow;
                const int64_t ox = ((n * 2 * kH * kW + 2 * k + 1) * Hout + oh) * Wout + ow;
                const double hs = static_cast<double>(oh * stride - padding + kh) + offv2[oy];
                const double ws = static_cast<double>(ow * stride - padding + kw) + offv2[ox];
                double gh = 0.0, gwc = 0.0;
                for (int64_t ci = 0; ci < Cin; ++ci) {
                  const auto s = detail::bilinear_at(xv2.data() + (n * Cin + ci) * H * W, H, W, hs, ws);
                  if (!s.inside) continue;
                  const double* wcol = wv2.data() + (ci * kH + kh) * kW + kw;
                  double sgrad = 0.0;
                  for (int64_t co = 0; co < Cout; ++co) {
                    const double gv = gcol[co * hw_out];
                    sgrad += gv * wcol[co * Cin * kH * kW];
                    if (need_w) (*gw)[co * Cin * kH * kW + (ci * kH + kh) * kW + kw] += gv * s.value;
                  }
                  if (need_x) {
                    double* gplane = gx->data() + (n * Cin + ci) * H * W;
                    for (int c4 = 0; c4 < 4; ++c4)
                      if (s.idx[c4] >= 0) gplane[s.idx[c4]] += sgrad * s.wgt[c4];
                  }
                  gh += sgrad * s.dh;
                  gwc += sgrad * s.dw;
                }
                if (need_o) {
                  (*go)[oy] += gh;
                  (*go)[ox] += gwc;
                }
              }
          }
      }
    });
  }
  return out;
}

}  // namespace din
