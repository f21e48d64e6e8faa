#pragma once

#include <string>
#include <utility>

#include "din/conv.hpp"
#include "din/deform.hpp"
#include "din/pool.hpp"

namespace din {

// ---------------------------------------------------------------------------
// The normalization family. Instance norm standardizes each (sample,
// channel) plane; CIN and AdaIN rescale that result with per-channel
// affine parameters; DIN replaces the affine map with a convolution whose
// weight and bias are generated from the style image at run time.
// ---------------------------------------------------------------------------

inline Tensor instance_norm(const Tensor& f, double eps = kDefaultEps) {
  check(f.rank() == 4, "instance_norm expects NCHW input, got " + shape_str(f.shape()));
  auto [mean, stdev] = channel_stats(f, eps);
  return div(sub(f, mean), stdev);
}

// Learned per-style channel scale and shift.
struct AffineParams {
  Tensor gamma;  // [C]
  Tensor beta;   // [C]
};

inline Tensor cin(const Tensor& f, const AffineParams& params, double eps = kDefaultEps) {
  check(params.gamma.defined() && params.beta.defined() && params.gamma.numel() == params.beta.numel(),
        "cin: gamma and beta must be defined with equal length");
  check(params.gamma.numel() == f.dim(1),
        "cin: affine parameters for " + std::to_string(params.gamma.numel()) + " channels applied to " +
            std::to_string(f.dim(1)));
  Tensor g = reshape(params.gamma, {1, f.dim(1), 1, 1});
  Tensor b = reshape(params.beta, {1, f.dim(1), 1, 1});
  return add(mul(instance_norm(f, eps), g), b);
}

inline Tensor adain(const Tensor& f_c, const Tensor& f_s, double eps = kDefaultEps) {
  check(f_c.rank() == 4 && f_s.rank() == 4, "adain expects NCHW inputs");
  check(f_c.dim(1) == f_s.dim(1), "adain: channel mismatch (" + std::to_string(f_c.dim(1)) + " vs " +
                                      std::to_string(f_s.dim(1)) + ")");
  check(f_s.dim(0) == f_c.dim(0) || f_s.dim(0) == 1, "adain: batch sizes incompatible");
  auto [mu_s, sigma_s] = channel_stats(f_s, eps);
  return add(mul(instance_norm(f_c, eps), sigma_s), mu_s);
}

// ---------------------------------------------------------------------------
// DIN parameters and the weight/bias generator networks
// ---------------------------------------------------------------------------

enum class DinConvType { Standard, Deformable, SpatiallyAdaptive };

inline const char* to_string(DinConvType t) {
  switch (t) {
    case DinConvType::Standard: return "standard";
    case DinConvType::Deformable: return "deformable";
    case DinConvType::SpatiallyAdaptive: return "spatially-adaptive";
  }
  return "?";
}

// Dynamically generated convolution parameters for one DIN layer.
//   standard / deformable: weight [C,C,kh,kw], bias [C]
//   spatially-adaptive:    depthwise weight [C,1,kh,kw] with kh,kw the
//                          (odd-rounded) feature size, bias map [C,H,W]
// Deformable offsets are optional: the network path derives them from
// content features, while op-level callers may supply them directly.
struct DinParams {
  DinConvType conv_type = DinConvType::Standard;
  Tensor weight;
  Tensor bias;
  Tensor offsets;
};

inline int64_t round_up_odd(int64_t n) { return (n % 2 == 0) ? n + 1 : n; }

// One generator: two convolutions with adaptive pooling in between, so any
// style-feature size >= 4x4 collapses to a fixed-size head.
struct GeneratorHead {
  Tensor conv_w;  // [G, Cs, 3, 3]
  Tensor conv_b;  // [G]
  Tensor head_w;  // [out_elems, G, 1, 1]
  Tensor head_b;  // [out_elems]
};

struct GeneratorNet {
  DinConvType conv_type = DinConvType::Standard;
  int64_t channels = 0;        // channel count of the DIN layer this feeds
  int64_t style_channels = 0;  // channel count of the style features
  int64_t kernel = 1;          // standard/deformable kernel size (odd)
  // spatially-adaptive geometry (fixed at construction)
  int64_t sa_kernel_h = 1, sa_kernel_w = 1;
  int64_t sa_bias_h = 1, sa_bias_w = 1;
  GeneratorHead weight_net;
  GeneratorHead bias_net;

  int64_t weight_elems() const {
    return conv_type == DinConvType::SpatiallyAdaptive ? channels * sa_kernel_h * sa_kernel_w
                                                       : channels * channels * kernel * kernel;
  }
  int64_t bias_elems() const {
    return conv_type == DinConvType::SpatiallyAdaptive ? channels * sa_bias_h * sa_bias_w : channels;
  }
};

namespace detail {

inline GeneratorHead init_generator_head(int64_t style_channels, int64_t out_elems, Rng& rng) {
  GeneratorHead h;
  const double conv_scale = std::sqrt(2.0 / (9.0 * static_cast<double>(style_channels)));
  h.conv_w = Tensor::randn({style_channels, style_channels, 3, 3}, rng, conv_scale, true);
  h.conv_b = Tensor::zeros({style_channels}, true);
  const double head_scale = 0.01 / std::sqrt(static_cast<double>(style_channels));
  h.head_w = Tensor::randn({out_elems, style_channels, 1, 1}, rng, head_scale, true);
  h.head_b = Tensor::zeros({out_elems}, true);
  return h;
}

}  // namespace detail

// Builds a generator pair for one DIN layer. The weight head starts at the
// identity kernel and the bias head at zero, so an untrained DIN layer
// behaves as plain instance normalization. For the spatially-adaptive
// type, feature_h/feature_w fix the content feature geometry the
// generated kernel and bias map must match.
inline GeneratorNet make_generator(DinConvType type, int64_t channels, int64_t style_channels, Rng& rng,
                                   int64_t kernel = 1, int64_t feature_h = 0, int64_t feature_w = 0) {
  GeneratorNet gen;
  gen.conv_type = type;
  gen.channels = channels;
  gen.style_channels = style_channels;
  if (type == DinConvType::SpatiallyAdaptive) {
    check(feature_h >= 1 && feature_w >= 1, "spatially-adaptive generator needs the content feature size");
    gen.sa_kernel_h = round_up_odd(feature_h);
    gen.sa_kernel_w = round_up_odd(feature_w);
    gen.sa_bias_h = feature_h;
    gen.sa_bias_w = feature_w;
  } else {
    check(kernel >= 1 && kernel % 2 == 1, "dynamic convolution kernel size must be odd");
    gen.kernel = kernel;
  }
  gen.weight_net = detail::init_generator_head(style_channels, gen.weight_elems(), rng);
  gen.bias_net = detail::init_generator_head(style_channels, gen.bias_elems(), rng);
  // start at the IN special case: identity kernel, zero bias
  auto hb = gen.weight_net.head_b.mut_data();
  if (type == DinConvType::SpatiallyAdaptive) {
    const int64_t center = (gen.sa_kernel_h / 2) * gen.sa_kernel_w + gen.sa_kernel_w / 2;
    for (int64_t c = 0; c < channels; ++c) hb[c * gen.sa_kernel_h * gen.sa_kernel_w + center] = 1.0;
  } else {
    const int64_t k2 = gen.kernel * gen.kernel;
    const int64_t center = (gen.kernel / 2) * gen.kernel + gen.kernel / 2;
    for (int64_t c = 0; c < channels; ++c) hb[(c * channels + c) * k2 + center] = 1.0;
  }
  return gen;
}

inline Tensor run_generator_head(const GeneratorHead& head, const Tensor& f_s) {
  check(f_s.rank() == 4, "generator expects NCHW style features");
  check(f_s.dim(2) >= 4 && f_s.dim(3) >= 4,
        "style features " + shape_str(f_s.shape()) + " too small for the generator's 4x4 pooling");
  Tensor h = adaptive_avg_pool(f_s, 4, 4);
  h = relu(conv2d(h, head.conv_w, head.conv_b, 1, 1, PadMode::Zero));
  h = adaptive_avg_pool(h, 1, 1);
  return conv2d(h, head.head_w, head.head_b);
}

// Encodes style features into the convolution parameters of one DIN layer.
// Deterministic in (f_s, generator weights) and differentiable through the
// generator weights; output layout is fixed by the generator, so style
// images of any size produce identically shaped parameters.
inline DinParams generate_din_params(const Tensor& f_s, const GeneratorNet& gen) {
  check(f_s.dim(0) == 1, "generate_din_params processes one style at a time");
  check(f_s.dim(1) == gen.style_channels, "style features have " + std::to_string(f_s.dim(1)) +
                                              " channels, generator expects " +
                                              std::to_string(gen.style_channels));
  DinParams p;
  p.conv_type = gen.conv_type;
  Tensor w = run_generator_head(gen.weight_net, f_s);
  Tensor b = run_generator_head(gen.bias_net, f_s);
  if (gen.conv_type == DinConvType::SpatiallyAdaptive) {
    p.weight = reshape(w, {gen.channels, 1, gen.sa_kernel_h, gen.sa_kernel_w});
    p.bias = reshape(b, {gen.channels, gen.sa_bias_h, gen.sa_bias_w});
  } else {
    p.weight = reshape(w, {gen.channels, gen.channels, gen.kernel, gen.kernel});
    p.bias = reshape(b, {gen.channels});
  }
  return p;
}

// Full-feature-map depthwise convolution over IN(f_c) with a spatial bias
// map. Reflection padding of (k-1)/2 preserves the feature size. On a
// globally uniform channel IN produces exact zeros and any convolution of
// zeros is constant, so the spatially varying bias map is what breaks the
// uniformity; on partially uniform inputs the full-map kernel does too.
inline Tensor spatially_adaptive_din(const Tensor& f_c, const DinParams& params, double eps = kDefaultEps) {
  check(params.conv_type == DinConvType::SpatiallyAdaptive, "params are not spatially-adaptive");
  const int64_t C = f_c.dim(1), H = f_c.dim(2), W = f_c.dim(3);
  check(params.weight.rank() == 4 && params.weight.dim(0) == C && params.weight.dim(1) == 1,
        "spatially-adaptive weight must be a depthwise [C,1,kh,kw] kernel");
  const int64_t kh = params.weight.dim(2), kw = params.weight.dim(3);
  check(kh == round_up_odd(H) && kw == round_up_odd(W),
        "spatially-adaptive kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
            " does not match feature size " + std::to_string(H) + "x" + std::to_string(W));
  Tensor normalized = instance_norm(f_c, eps);
  Tensor padded = pad2d(normalized, (kh - 1) / 2, PadMode::Reflect);
  Tensor y = detail::conv2d_core(padded, params.weight, Tensor(), 1, C);
  if (params.bias.defined()) {
    if (params.bias.rank() == 3) {
      check(params.bias.dim(0) == C && params.bias.dim(1) == H && params.bias.dim(2) == W,
            "spatially-adaptive bias map must be [C,H,W]");
      y = add(y, reshape(params.bias, {1, C, H, W}));
    } else {
      check(params.bias.rank() == 1 && params.bias.dim(0) == C, "bias must be [C] or [C,H,W]");
      y = add(y, reshape(params.bias, {1, C, 1, 1}));
    }
  }
  return y;
}

// DIN: instance normalization followed by a dynamic convolution whose
// parameters were generated from the style image.
inline Tensor din(const Tensor& f_c, const DinParams& params, double eps = kDefaultEps) {
  check(f_c.rank() == 4, "din expects NCHW input");
  const int64_t C = f_c.dim(1);
  check(params.weight.defined() && params.weight.rank() == 4, "din: params.weight must be a 4-d kernel");
  switch (params.conv_type) {
    case DinConvType::Standard: {
      check(params.weight.dim(0) == C && params.weight.dim(1) == C,
            "din: weight " + shape_str(params.weight.shape()) + " does not map " + std::to_string(C) +
                " channels onto themselves");
      const int64_t k = params.weight.dim(2);
      check(k == params.weight.dim(3) && k % 2 == 1, "din: standard kernel must be square with odd size");
      return conv2d(instance_norm(f_c, eps), params.weight, params.bias, 1, (k - 1) / 2, PadMode::Reflect);
    }
    case DinConvType::Deformable: {
      check(params.offsets.defined(), "din: deformable params need an offset field");
      const int64_t k = params.weight.dim(2);
      check(k == params.weight.dim(3) && k % 2 == 1, "din: deformable kernel must be square with odd size");
      return deformable_conv2d(instance_norm(f_c, eps), params.weight, params.bias, params.offsets, 1,
                               (k - 1) / 2);
    }
    case DinConvType::SpatiallyAdaptive:
      return spatially_adaptive_din(f_c, params, eps);
  }
  throw std::invalid_argument("din: unknown conv_type");
}

}  // namespace din
