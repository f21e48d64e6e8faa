#pragma once

#include <vector>

#include "din/ops.hpp"

namespace din {

enum class PadMode { Zero, Reflect };

// Static or dynamically generated convolution parameters. Kernel layout is
// [out_channels, in_channels/groups, kH, kW]; bias may be left undefined.
struct ConvWeight {
  Tensor kernel;
  Tensor bias;
  int64_t stride = 1;
  int64_t padding = 0;
  PadMode pad_mode = PadMode::Zero;
  int64_t groups = 1;
};

namespace detail {

// C[M,N] += A[M,K] * B[K,N]
inline void gemm_acc(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N) {
  for (int64_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    double* c = C + i * N;
    for (int64_t k = 0; k < K; ++k) {
      const double av = a[k];
      const double* b = B + k * N;
      for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[M,N] += A[M,K] * B[N,K]^T
inline void gemm_abT_acc(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N) {
  for (int64_t i = 0; i < M; ++i) {
    const double* a = A + i * K;
    for (int64_t j = 0; j < N; ++j) {
      const double* b = B + j * K;
      double acc = 0.0;
      for (int64_t k = 0; k < K; ++k) acc += a[k] * b[k];
      C[i * N + j] += acc;
    }
  }
}

// C[M,N] += A[K,M]^T * B[K,N]
inline void gemm_aTb_acc(const double* A, const double* B, double* C, int64_t M, int64_t K, int64_t N) {
  for (int64_t k = 0; k < K; ++k) {
    const double* a = A + k * M;
    const double* b = B + k * N;
    for (int64_t i = 0; i < M; ++i) {
      const double av = a[i];
      double* c = C + i * N;
      for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// x points at a [C,H,W] slab; cols is [C*kH*kW, Hout*Wout]
inline void im2col(const double* x, int64_t C, int64_t H, int64_t W, int64_t kH, int64_t kW, int64_t stride,
                   int64_t Hout, int64_t Wout, double* cols) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t kh = 0; kh < kH; ++kh)
      for (int64_t kw = 0; kw < kW; ++kw) {
        double* row = cols + ((c * kH + kh) * kW + kw) * (Hout * Wout);
        const double* src = x + c * H * W + kh * W + kw;
        for (int64_t oh = 0; oh < Hout; ++oh) {
          const double* s = src + oh * stride * W;
          for (int64_t ow = 0; ow < Wout; ++ow) row[oh * Wout + ow] = s[ow * stride];
        }
      }
}

inline void col2im_acc(const double* cols, int64_t C, int64_t H, int64_t W, int64_t kH, int64_t kW, int64_t stride,
                       int64_t Hout, int64_t Wout, double* x_grad) {
  for (int64_t c = 0; c < C; ++c)
    for (int64_t kh = 0; kh < kH; ++kh)
      for (int64_t kw = 0; kw < kW; ++kw) {
        const double* row = cols + ((c * kH + kh) * kW + kw) * (Hout * Wout);
        double* dst = x_grad + c * H * W + kh * W + kw;
        for (int64_t oh = 0; oh < Hout; ++oh) {
          double* d = dst + oh * stride * W;
          for (int64_t ow = 0; ow < Wout; ++ow) d[ow * stride] += row[oh * Wout + ow];
        }
      }
}

inline int64_t reflect_index(int64_t i, int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace detail

inline Tensor pad2d(const Tensor& x, int64_t pad, PadMode mode) {
  check(x.rank() == 4, "pad2d expects NCHW input, got " + shape_str(x.shape()));
  check(pad >= 0, "pad2d: negative padding");
  if (pad == 0) return x;
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (mode == PadMode::Reflect)
    check(pad <= H - 1 && pad <= W - 1, "reflection padding " + std::to_string(pad) +
                                            " too large for spatial size " + std::to_string(H) + "x" +
                                            std::to_string(W));
  const int64_t Hp = H + 2 * pad, Wp = W + 2 * pad;
  Tensor out = Tensor::zeros({N, C, Hp, Wp});
  auto xv = x.data();
  auto ov = out.mut_data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* src = xv.data() + nc * H * W;
    double* dst = ov.data() + nc * Hp * Wp;
    if (mode == PadMode::Zero) {
      for (int64_t h = 0; h < H; ++h)
        for (int64_t w = 0; w < W; ++w) dst[(h + pad) * Wp + (w + pad)] = src[h * W + w];
    } else {
      for (int64_t h = 0; h < Hp; ++h) {
        const int64_t sh = detail::reflect_index(h - pad, H);
        for (int64_t w = 0; w < Wp; ++w) dst[h * Wp + w] = src[sh * W + detail::reflect_index(w - pad, W)];
      }
    }
  }
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out, pad, mode, N, C, H, W, Hp, Wp]() {
      auto g = out.grad();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t nc = 0; nc < N * C; ++nc) {
        const double* gsrc = g.data() + nc * Hp * Wp;
        double* gdst = gx.data() + nc * H * W;
        if (mode == PadMode::Zero) {
          for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w) gdst[h * W + w] += gsrc[(h + pad) * Wp + (w + pad)];
        } else {
          for (int64_t h = 0; h < Hp; ++h) {
            const int64_t sh = detail::reflect_index(h - pad, H);
            for (int64_t w = 0; w < Wp; ++w) gdst[sh * W + detail::reflect_index(w - pad, W)] += gsrc[h * Wp + w];
          }
        }
      }
    });
  }
  return out;
}

namespace detail {

// Cross-correlation over an already padded input (no kernel flip).
inline Tensor conv2d_core(const Tensor& xp, const Tensor& kernel, const Tensor& bias, int64_t stride,
                          int64_t groups) {
  const int64_t N = xp.dim(0), Cin = xp.dim(1), H = xp.dim(2), W = xp.dim(3);
  const int64_t Cout = kernel.dim(0), CinG = kernel.dim(1), kH = kernel.dim(2), kW = kernel.dim(3);
  check(Cin == CinG * groups, "conv2d: input has " + std::to_string(Cin) + " channels, kernel expects " +
                                  std::to_string(CinG * groups));
  check(Cout % groups == 0, "conv2d: out_channels not divisible by groups");
  check(H >= kH && W >= kW, "conv2d: padded input " + std::to_string(H) + "x" + std::to_string(W) +
                                " smaller than kernel " + std::to_string(kH) + "x" + std::to_string(kW));
  const int64_t Hout = (H - kH) / stride + 1;
  const int64_t Wout = (W - kW) / stride + 1;
  const int64_t hw_out = Hout * Wout;
  const int64_t CoutG = Cout / groups;
  const int64_t krows = CinG * kH * kW;

  Tensor out = Tensor::zeros({N, Cout, Hout, Wout});
  auto xv = xp.data();
  auto wv = kernel.data();
  auto ov = out.mut_data();
  std::vector<double> cols(static_cast<size_t>(krows * hw_out));
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t g = 0; g < groups; ++g) {
      im2col(xv.data() + (n * Cin + g * CinG) * H * W, CinG, H, W, kH, kW, stride, Hout, Wout, cols.data());
      gemm_acc(wv.data() + g * CoutG * krows, cols.data(), ov.data() + (n * Cout + g * CoutG) * hw_out, CoutG,
               krows, hw_out);
    }
  }
  if (bias.defined()) {
    auto bv = bias.data();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t co = 0; co < Cout; ++co) {
        double* o = ov.data() + (n * Cout + co) * hw_out;
        const double b = bv[co];
        for (int64_t i = 0; i < hw_out; ++i) o[i] += b;
      }
  }

  if (should_record({&xp, &kernel, &bias})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [xp, kernel, bias, out, stride, groups, N, Cin, H, W, Cout, CinG, kH, kW, Hout,
                                  Wout, hw_out, CoutG, krows]() {
      auto g = out.grad();
      auto xv2 = xp.data();
      auto wv2 = kernel.data();
      const bool need_x = xp.requires_grad();
      const bool need_w = kernel.requires_grad();
      const bool need_b = bias.defined() && bias.requires_grad();
      if (need_b) {
        Tensor bt = bias;
        auto& gb = bt.grad_buffer();
        for (int64_t n = 0; n < N; ++n)
          for (int64_t co = 0; co < Cout; ++co) {
            const double* go = g.data() + (n * Cout + co) * hw_out;
            double acc = 0.0;
            for (int64_t i = 0; i < hw_out; ++i) acc += go[i];
            gb[co] += acc;
          }
      }
      if (!need_x && !need_w) return;
      std::vector<double> cols(static_cast<size_t>(krows * hw_out));
      std::vector<double> dcols(need_x ? static_cast<size_t>(krows * hw_out) : 0);
      Tensor xt = xp;
      Tensor wt = kernel;
      std::vector<double>* gx = need_x ? &xt.grad_buffer() : nullptr;
      std::vector<double>* gw = need_w ? &wt.grad_buffer() : nullptr;
      for (int64_t n = 0; n < N; ++n) {
        for (int64_t grp = 0; grp < groups; ++grp) {
          if (need_w || need_x)
            im2col(xv2.data() + (n * Cin + grp * CinG) * H * W, CinG, H, W, kH, kW, stride, Hout, Wout,
                   cols.data());
          const double* gslice = g.data() + (n * Cout + grp * CoutG) * hw_out;
          if (need_w)
            gemm_abT_acc(gslice, cols.data(), gw->data() + grp * CoutG * krows, CoutG, hw_out, krows);
          if (need_x) {
            std::fill(dcols.begin(), dcols.end(), 0.0);
            gemm_aTb_acc(wv2.data() + grp * CoutG * krows, gslice, dcols.data(), krows, CoutG, hw_out);
            col2im_acc(dcols.data(), CinG, H, W, kH, kW, stride, Hout, Wout,
                       gx->data() + (n * Cin + grp * CinG) * H * W);
          }
        }
      }
    });
  }
  return out;
}

}  // namespace detail

inline Tensor conv2d(const Tensor& x, const ConvWeight& w) {
  check(x.defined() && x.rank() == 4, "conv2d expects NCHW input");
  check(w.kernel.defined() && w.kernel.rank() == 4,
        "conv2d kernel must be [out_channels, in_channels/groups, kH, kW]");
  check(w.stride >= 1, "conv2d: stride must be >= 1");
  check(w.groups >= 1 && x.dim(1) % w.groups == 0,
        "conv2d: input channels " + std::to_string(x.dim(1)) + " not divisible by groups " +
            std::to_string(w.groups));
  check(w.kernel.dim(2) >= 1 && w.kernel.dim(3) >= 1, "conv2d: kernel dims must be >= 1");
  if (w.bias.defined())
    check(w.bias.rank() == 1 && w.bias.dim(0) == w.kernel.dim(0),
          "conv2d: bias shape " + shape_str(w.bias.shape()) + " does not match out_channels " +
              std::to_string(w.kernel.dim(0)));
  Tensor xp = pad2d(x, w.padding, w.pad_mode);
  return detail::conv2d_core(xp, w.kernel, w.bias, w.stride, w.groups);
}

inline Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias, int64_t stride = 1,
                     int64_t padding = 0, PadMode mode = PadMode::Zero, int64_t groups = 1) {
  ConvWeight w;
  w.kernel = kernel;
  w.bias = bias;
  w.stride = stride;
  w.padding = padding;
  w.pad_mode = mode;
  w.groups = groups;
  return conv2d(x, w);
}

// Depthwise 3x3 (or kxk) conv followed by a 1x1 pointwise conv; the two
// stages are exactly conv2d compositions so gradients come for free.
inline Tensor depthwise_separable(const Tensor& x, const ConvWeight& dw, const ConvWeight& pw) {
  check(dw.groups == x.dim(1) && dw.kernel.dim(0) == x.dim(1),
        "depthwise stage must have groups == in_channels == out_channels");
  check(pw.kernel.dim(2) == 1 && pw.kernel.dim(3) == 1, "pointwise stage must be 1x1");
  return conv2d(conv2d(x, dw), pw);
}

}  // namespace din
