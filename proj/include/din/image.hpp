#pragma once

#include <cmath>

#include "din/png.hpp"
#include "din/tensor.hpp"

namespace din {

// Pixel mapping is linear: byte value v <-> v/255. Export clamps to [0,1]
// and rounds; nothing inside the differentiable path is clamped.

inline Tensor image_to_tensor(const Image& img) {
  Tensor t = Tensor::zeros({1, 3, img.height, img.width});
  auto d = t.mut_data();
  const int64_t hw = img.height * img.width;
  for (int64_t i = 0; i < hw; ++i)
    for (int64_t c = 0; c < 3; ++c) d[c * hw + i] = static_cast<double>(img.rgb[i * 3 + c]) / 255.0;
  return t;
}

inline Image tensor_to_image(const Tensor& t) {
  check(t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 3, "tensor_to_image expects [1,3,H,W]");
  Image img;
  img.height = t.dim(2);
  img.width = t.dim(3);
  const int64_t hw = img.height * img.width;
  img.rgb.resize(static_cast<size_t>(3 * hw));
  auto d = t.data();
  for (int64_t i = 0; i < hw; ++i)
    for (int64_t c = 0; c < 3; ++c) {
      double v = d[c * hw + i];
      v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      img.rgb[i * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
  return img;
}

// Square crop + bilinear resize used by the data pipeline (not taped).
// align-corners-false sampling, coordinates clamped to the crop.
inline Tensor crop_resize(const Tensor& img, int64_t y0, int64_t x0, int64_t side, int64_t out_side) {
  check(img.rank() == 4 && img.dim(0) == 1, "crop_resize expects [1,C,H,W]");
  const int64_t C = img.dim(1), H = img.dim(2), W = img.dim(3);
  check(y0 >= 0 && x0 >= 0 && side >= 1 && y0 + side <= H && x0 + side <= W, "crop outside the image");
  Tensor out = Tensor::zeros({1, C, out_side, out_side});
  auto src = img.data();
  auto dst = out.mut_data();
  const double scale = static_cast<double>(side) / static_cast<double>(out_side);
  for (int64_t c = 0; c < C; ++c)
    for (int64_t i = 0; i < out_side; ++i)
      for (int64_t j = 0; j < out_side; ++j) {
        double sh = (static_cast<double>(i) + 0.5) * scale - 0.5;
        double sw = (static_cast<double>(j) + 0.5) * scale - 0.5;
        sh = sh < 0 ? 0 : (sh > side - 1 ? side - 1 : sh);
        sw = sw < 0 ? 0 : (sw > side - 1 ? side - 1 : sw);
        const int64_t h0 = static_cast<int64_t>(sh), w0 = static_cast<int64_t>(sw);
        const int64_t h1 = h0 + 1 < side ? h0 + 1 : side - 1;
        const int64_t w1 = w0 + 1 < side ? w0 + 1 : side - 1;
        const double th = sh - h0, tw = sw - w0;
        auto at = [&](int64_t h, int64_t w) { return src[(c * H + y0 + h) * W + x0 + w]; };
        dst[(c * out_side + i) * out_side + j] = (1 - th) * ((1 - tw) * at(h0, w0) + tw * at(h0, w1)) +
                                                 th * ((1 - tw) * at(h1, w0) + tw * at(h1, w1));
      }
  return out;
}

}  // namespace din
