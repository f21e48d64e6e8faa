#pragma once

// Brute-force reference implementations used only by tests. These stay
// deliberately naive (straight nested loops, no im2col, no shared helpers
// with the library) so they remain an independent check.

#include <cmath>
#include <cstdint>
#include <vector>

#include "din/tensor.hpp"

namespace oracle {

// Cross-correlation with zero or reflection padding and groups.
// x: [N,Cin,H,W], k: [Cout,Cin/groups,kH,kW], bias: [Cout] or empty.
inline din::Tensor conv2d_naive(const din::Tensor& x, const din::Tensor& k, const std::vector<double>& bias,
                                int64_t stride, int64_t pad, bool reflect, int64_t groups,
                                int64_t* mac_count = nullptr) {
  const int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Cout = k.dim(0), CinG = k.dim(1), kH = k.dim(2), kW = k.dim(3);
  const int64_t CoutG = Cout / groups;
  const int64_t Hout = (H + 2 * pad - kH) / stride + 1;
  const int64_t Wout = (W + 2 * pad - kW) / stride + 1;
  din::Tensor out = din::Tensor::zeros({N, Cout, Hout, Wout});
  auto xv = x.data();
  auto kv = k.data();
  auto ov = out.mut_data();
  auto sample = [&](int64_t n, int64_t c, int64_t h, int64_t w) -> double {
    if (reflect) {
      if (h < 0) h = -h;
      if (h >= H) h = 2 * H - 2 - h;
      if (w < 0) w = -w;
      if (w >= W) w = 2 * W - 2 - w;
    } else if (h < 0 || h >= H || w < 0 || w >= W) {
      return 0.0;
    }
    return xv[((n * Cin + c) * H + h) * W + w];
  };
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Cout; ++co) {
      const int64_t g = co / CoutG;
      for (int64_t oh = 0; oh < Hout; ++oh)
        for (int64_t ow = 0; ow < Wout; ++ow) {
          double acc = bias.empty() ? 0.0 : bias[co];
          for (int64_t ci = 0; ci < CinG; ++ci)
            for (int64_t kh = 0; kh < kH; ++kh)
              for (int64_t kw = 0; kw < kW; ++kw) {
                acc += kv[((co * CinG + ci) * kH + kh) * kW + kw] *
                       sample(n, g * CinG + ci, oh * stride - pad + kh, ow * stride - pad + kw);
                if (mac_count) ++*mac_count;
              }
          ov[((n * Cout + co) * Hout + oh) * Wout + ow] = acc;
        }
    }
  return out;
}

// Per-pixel bilinear interpolation for an integer upscale, align-corners
// false, coordinates clamped to the valid range.
inline din::Tensor bilinear_upsample_naive(const din::Tensor& x, int64_t scale) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t Ho = H * scale, Wo = W * scale;
  din::Tensor out = din::Tensor::zeros({N, C, Ho, Wo});
  auto ov = out.mut_data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < Ho; ++i)
        for (int64_t j = 0; j < Wo; ++j) {
          double sh = (i + 0.5) / scale - 0.5;
          double sw = (j + 0.5) / scale - 0.5;
          sh = std::min(std::max(sh, 0.0), double(H - 1));
          sw = std::min(std::max(sw, 0.0), double(W - 1));
          const int64_t h0 = (int64_t)sh, w0 = (int64_t)sw;
          const int64_t h1 = std::min(h0 + 1, H - 1), w1 = std::min(w0 + 1, W - 1);
          const double th = sh - h0, tw = sw - w0;
          ov[((n * C + c) * Ho + i) * Wo + j] = (1 - th) * (1 - tw) * x.at(n, c, h0, w0) +
                                                (1 - th) * tw * x.at(n, c, h0, w1) +
                                                th * (1 - tw) * x.at(n, c, h1, w0) + th * tw * x.at(n, c, h1, w1);
        }
  return out;
}

// Window means with floor/ceil partition boundaries.
inline din::Tensor adaptive_pool_naive(const din::Tensor& x, int64_t oh, int64_t ow) {
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  din::Tensor out = din::Tensor::zeros({N, C, oh, ow});
  auto ov = out.mut_data();
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < oh; ++i)
        for (int64_t j = 0; j < ow; ++j) {
          const int64_t h0 = i * H / oh;
          const int64_t h1 = (int64_t)std::ceil(double(i + 1) * H / oh);
          const int64_t w0 = j * W / ow;
          const int64_t w1 = (int64_t)std::ceil(double(j + 1) * W / ow);
          double acc = 0.0;
          for (int64_t h = h0; h < h1; ++h)
            for (int64_t w = w0; w < w1; ++w) acc += x.at(n, c, h, w);
          ov[((n * C + c) * oh + i) * ow + j] = acc / double((h1 - h0) * (w1 - w0));
        }
  return out;
}

// Straight-line Adam update for one scalar parameter.
struct AdamScalarOracle {
  double m = 0.0, v = 0.0;
  int64_t t = 0;
  double step(double p, double g, double lr, double b1, double b2, double eps) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, double(t)));
    const double vhat = v / (1 - std::pow(b2, double(t)));
    return p - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

inline double max_abs_diff(const din::Tensor& a, const din::Tensor& b) {
  double m = 0.0;
  auto av = a.data();
  auto bv = b.data();
  for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(av[i] - bv[i]));
  return m;
}

}  // namespace oracle
