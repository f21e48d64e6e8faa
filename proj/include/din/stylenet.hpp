#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "din/flops.hpp"
#include "din/netspec.hpp"

namespace din {

// ---------------------------------------------------------------------------
// The hierarchical lightweight stylization network: a compact content
// encoder, a mirrored decoder whose stream receives DIN additions at three
// resolutions, a style encoder, and one weight/bias generator pair per
// DIN level.
// ---------------------------------------------------------------------------

struct ModelConfig {
  int64_t width = 32;       // base channel width
  int64_t din_levels = 3;   // hierarchical DIN levels (1..3)
  DinConvType conv_type = DinConvType::Standard;
  int64_t din_kernel = 1;   // dynamic convolution kernel (odd)
  bool separable = true;    // depthwise separable blocks (false: standard convs)
  double din_scale = 1.0;   // scale on the DIN addition into the decoder
  double eps = kDefaultEps;
  bool vgg_style_encoder = false;
  // baseline mode: per-level parameters are the style features' channel
  // statistics (the AdaIN special case) instead of generator outputs
  bool adain_baseline = false;
  // content feature geometry for the spatially-adaptive variant
  int64_t sa_content_h = 64, sa_content_w = 64;

  int64_t level_channels(int level) const { return width * (4 >> level); }
};

inline void validate(const ModelConfig& cfg) {
  check(cfg.width >= 1, "model width must be positive");
  check(cfg.din_levels >= 1 && cfg.din_levels <= 3, "din_levels must be in 1..3");
  check(cfg.din_kernel >= 1 && cfg.din_kernel % 2 == 1, "din_kernel must be odd");
  check(std::isfinite(cfg.din_scale), "din_scale must be finite");
  if (cfg.conv_type == DinConvType::SpatiallyAdaptive)
    check(cfg.sa_content_h % 4 == 0 && cfg.sa_content_w % 4 == 0 && cfg.sa_content_h >= 32 &&
              cfg.sa_content_w >= 32,
          "spatially-adaptive content size must be >= 32 and divisible by 4");
  if (cfg.adain_baseline) {
    check(!cfg.vgg_style_encoder, "the adain baseline needs the compact style encoder's per-width stages");
    check(cfg.conv_type == DinConvType::Standard, "the adain baseline uses standard 1x1 parameters");
  }
}

namespace detail {

inline LayerDesc conv_layer(std::string name, int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride,
                            PadMode mode, bool norm, bool act) {
  LayerDesc l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = k;
  l.stride = stride;
  l.padding = (k - 1) / 2;
  l.pad_mode = mode;
  l.norm = norm;
  l.act = act;
  return l;
}

inline LayerDesc block_layer(LayerKind kind, std::string name, int64_t in_ch, int64_t out_ch, int64_t stride,
                             bool norm, bool act, bool separable) {
  LayerDesc l;
  l.kind = separable ? kind : LayerKind::Conv;
  if (kind == LayerKind::ResBlock) l.kind = LayerKind::ResBlock;
  l.name = std::move(name);
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = 3;
  l.stride = stride;
  l.padding = 1;
  l.pad_mode = PadMode::Reflect;
  l.norm = norm;
  l.act = act;
  l.separable = separable;
  return l;
}

inline LayerDesc upsample_layer(std::string name, int64_t scale) {
  LayerDesc l;
  l.kind = LayerKind::Upsample;
  l.name = std::move(name);
  l.scale = scale;
  return l;
}

inline LayerDesc din_slot(std::string name, int level, int64_t channels) {
  LayerDesc l;
  l.kind = LayerKind::DinSlot;
  l.name = std::move(name);
  l.din_level = level;
  l.in_ch = channels;
  l.out_ch = channels;
  return l;
}

}  // namespace detail

// Encoder: one stride-1 9x9 conv, two stride-2 depthwise separable blocks,
// two residual blocks. Decoder mirrors it in resolution (every stride-2
// stage has a matching 2x upsample) with DIN slots at channel widths
// 4w, 2w, w. Prefixes "enc."/"dec." define the report sections.
inline NetworkSpec build_default_network(const ModelConfig& cfg, const std::string& prefix = "") {
  validate(cfg);
  using namespace detail;
  const int64_t w = cfg.width;
  NetworkSpec spec;
  spec.name = prefix.empty() ? "stylenet" : prefix;
  spec.input_channels = 3;
  spec.din_levels = cfg.din_levels;
  const std::string e = prefix + "enc.", d = prefix + "dec.";
  const bool sep = cfg.separable;
  spec.layers.push_back(conv_layer(e + "conv_in", 3, w, 9, 1, PadMode::Reflect, true, true));
  spec.layers.push_back(block_layer(LayerKind::DsBlock, e + "down1", w, 2 * w, 2, true, true, sep));
  spec.layers.push_back(block_layer(LayerKind::DsBlock, e + "down2", 2 * w, 4 * w, 2, true, true, sep));
  spec.layers.push_back(block_layer(LayerKind::ResBlock, e + "res1", 4 * w, 4 * w, 1, true, false, sep));
  spec.layers.push_back(block_layer(LayerKind::ResBlock, e + "res2", 4 * w, 4 * w, 1, true, false, sep));

  spec.layers.push_back(block_layer(LayerKind::ResBlock, d + "res1", 4 * w, 4 * w, 1, false, false, sep));
  spec.layers.push_back(block_layer(LayerKind::ResBlock, d + "res2", 4 * w, 4 * w, 1, false, false, sep));
  spec.layers.push_back(din_slot(d + "din0", 0, 4 * w));
  spec.layers.push_back(block_layer(LayerKind::DsBlock, d + "up_block1", 4 * w, 2 * w, 1, false, true, sep));
  spec.layers.push_back(upsample_layer(d + "up1", 2));
  if (cfg.din_levels >= 2) spec.layers.push_back(din_slot(d + "din1", 1, 2 * w));
  spec.layers.push_back(block_layer(LayerKind::DsBlock, d + "up_block2", 2 * w, w, 1, false, true, sep));
  spec.layers.push_back(upsample_layer(d + "up2", 2));
  if (cfg.din_levels >= 3) spec.layers.push_back(din_slot(d + "din2", 2, w));
  spec.layers.push_back(conv_layer(d + "conv_out", w, 3, 9, 1, PadMode::Reflect, false, false));
  return spec;
}

// VGG-19 prefix with taps at relu1_1 .. relu4_1. 3x3 zero-padded convs and
// 2x2 max pooling at the standard positions.
inline NetworkSpec build_vgg_slice(const std::string& upto_layer, const std::string& prefix = "vgg.") {
  static const struct {
    const char* tap;
    int stage;
  } known[] = {{"relu1_1", 1}, {"relu2_1", 2}, {"relu3_1", 3}, {"relu4_1", 4}};
  int upto = 0;
  for (const auto& k : known)
    if (upto_layer == k.tap) upto = k.stage;
  check(upto != 0, "unknown VGG layer '" + upto_layer + "' (expected relu1_1/relu2_1/relu3_1/relu4_1)");

  NetworkSpec spec;
  spec.name = "vgg-" + upto_layer;
  spec.input_channels = 3;
  auto conv = [&](const std::string& name, int64_t in_ch, int64_t out_ch, const std::string& tap = "") {
    LayerDesc l = detail::conv_layer(prefix + name, in_ch, out_ch, 3, 1, PadMode::Zero, false, true);
    l.tap = tap;
    spec.layers.push_back(l);
  };
  auto pool = [&](const std::string& name) {
    LayerDesc l;
    l.kind = LayerKind::MaxPool;
    l.name = prefix + name;
    spec.layers.push_back(l);
  };
  conv("conv1_1", 3, 64, "relu1_1");
  if (upto >= 2) {
    conv("conv1_2", 64, 64);
    pool("pool1");
    conv("conv2_1", 64, 128, "relu2_1");
  }
  if (upto >= 3) {
    conv("conv2_2", 128, 128);
    pool("pool2");
    conv("conv3_1", 128, 256, "relu3_1");
  }
  if (upto >= 4) {
    conv("conv3_2", 256, 256);
    conv("conv3_3", 256, 256);
    conv("conv3_4", 256, 256);
    pool("pool3");
    conv("conv4_1", 256, 512, "relu4_1");
  }
  return spec;
}

// Precomputed per-style DIN parameters, one per hierarchical level.
// Values are narrowed through f32 so the in-memory code and its
// checkpoint-serialized form are bit-identical.
struct StyleCode {
  DinConvType conv_type = DinConvType::Standard;
  std::vector<DinParams> levels;
  std::string style_id;
};

struct StyleTransferModel {
  ModelConfig cfg;
  NetworkSpec net;
  NetworkSpec style_net;
  std::vector<GeneratorNet> generators;
  ParamStore params;
};

// The compact style encoder reuses the content-encoder topology with
// independent weights under the "senc." prefix. Taps expose one feature
// map per channel width (the adain baseline reads those).
inline NetworkSpec build_default_network_encoder_only(const ModelConfig& cfg) {
  using namespace detail;
  const int64_t w = cfg.width;
  const bool sep = cfg.separable;
  NetworkSpec spec;
  spec.name = "style-encoder";
  spec.input_channels = 3;
  const std::string e = "senc.";
  spec.layers.push_back(conv_layer(e + "conv_in", 3, w, 9, 1, PadMode::Reflect, true, true));
  spec.layers.back().tap = "fs_1w";
  spec.layers.push_back(block_layer(LayerKind::DsBlock, e + "down1", w, 2 * w, 2, true, true, sep));
  spec.layers.back().tap = "fs_2w";
  spec.layers.push_back(block_layer(LayerKind::DsBlock, e + "down2", 2 * w, 4 * w, 2, true, true, sep));
  spec.layers.push_back(block_layer(LayerKind::ResBlock, e + "res1", 4 * w, 4 * w, 1, true, false, sep));
  spec.layers.push_back(block_layer(LayerKind::ResBlock, e + "res2", 4 * w, 4 * w, 1, true, false, sep));
  spec.layers.back().tap = "fs_4w";
  return spec;
}

namespace detail {

inline void adopt_generator(ParamStore& store, const std::string& prefix, GeneratorNet& gen) {
  store.adopt(prefix + ".weight_net.conv.w", gen.weight_net.conv_w);
  store.adopt(prefix + ".weight_net.conv.b", gen.weight_net.conv_b);
  store.adopt(prefix + ".weight_net.head.w", gen.weight_net.head_w);
  store.adopt(prefix + ".weight_net.head.b", gen.weight_net.head_b);
  store.adopt(prefix + ".bias_net.conv.w", gen.bias_net.conv_w);
  store.adopt(prefix + ".bias_net.conv.b", gen.bias_net.conv_b);
  store.adopt(prefix + ".bias_net.head.w", gen.bias_net.head_w);
  store.adopt(prefix + ".bias_net.head.b", gen.bias_net.head_b);
}

}  // namespace detail

inline StyleTransferModel make_model(const ModelConfig& cfg, uint64_t seed) {
  validate(cfg);
  StyleTransferModel m;
  m.cfg = cfg;
  m.net = build_default_network(cfg);
  m.style_net = cfg.vgg_style_encoder ? build_vgg_slice("relu4_1", "senc.")
                                      : build_default_network_encoder_only(cfg);
  Rng rng(seed);
  init_network_params(m.net, m.params, rng);
  init_network_params(m.style_net, m.params, rng);
  const int64_t style_channels = cfg.vgg_style_encoder ? 512 : 4 * cfg.width;
  for (int level = 0; level < cfg.din_levels; ++level) {
    const int64_t ch = cfg.level_channels(level);
    GeneratorNet gen;
    if (cfg.conv_type == DinConvType::SpatiallyAdaptive) {
      const int64_t fh = cfg.sa_content_h >> (2 - level);
      const int64_t fw = cfg.sa_content_w >> (2 - level);
      gen = make_generator(cfg.conv_type, ch, style_channels, rng, 1, fh, fw);
    } else {
      gen = make_generator(cfg.conv_type, ch, style_channels, rng, cfg.din_kernel);
    }
    const std::string prefix = "gen.level" + std::to_string(level);
    detail::adopt_generator(m.params, prefix, gen);
    if (cfg.conv_type == DinConvType::Deformable) {
      // content-driven offset head; zero init keeps the starting point at
      // the standard (offset-free) convolution
      const int64_t off_ch = 2 * cfg.din_kernel * cfg.din_kernel;
      m.params.create(prefix + ".offset.w", {off_ch, ch, 3, 3});
      m.params.create(prefix + ".offset.b", {off_ch});
    }
    m.generators.push_back(std::move(gen));
  }
  return m;
}

inline Tensor encode_style(const StyleTransferModel& m, const Tensor& style) {
  if (m.cfg.vgg_style_encoder) {
    std::map<std::string, Tensor> taps;
    run_network(m.style_net, m.params, style, &taps, nullptr, m.cfg.eps);
    return taps.at("relu4_1");
  }
  return run_network(m.style_net, m.params, style, nullptr, nullptr, m.cfg.eps);
}

// Baseline parameters: per level, a diagonal kernel of the style
// features' channel-wise sigma and a bias of the channel-wise mu, taken
// from the style-encoder stage with the matching width. This is exactly
// the AdaIN special case expressed as DIN parameters.
inline std::vector<DinParams> adain_style_params(const StyleTransferModel& m, const Tensor& style) {
  std::map<std::string, Tensor> taps;
  run_network(m.style_net, m.params, style, &taps, nullptr, m.cfg.eps);
  static const char* tap_of_level[3] = {"fs_4w", "fs_2w", "fs_1w"};
  std::vector<DinParams> levels;
  for (int level = 0; level < m.cfg.din_levels; ++level) {
    const Tensor& f_s = taps.at(tap_of_level[level]);
    const int64_t C = f_s.dim(1);
    auto [mu_s, sigma_s] = channel_stats(f_s, m.cfg.eps);
    DinParams p;
    Tensor mask = Tensor::zeros({C, C, 1, 1});
    for (int64_t c = 0; c < C; ++c) mask.mut_data()[c * C + c] = 1.0;
    // diag(sigma) as a broadcasted product keeps the path differentiable
    p.weight = mul(mask, reshape(sigma_s, {C, 1, 1, 1}));
    p.bias = reshape(mu_s, {C});
    levels.push_back(std::move(p));
  }
  return levels;
}

// Differentiable per-level DIN parameters for one style image.
inline std::vector<DinParams> style_params(const StyleTransferModel& m, const Tensor& style) {
  if (m.cfg.adain_baseline) return adain_style_params(m, style);
  Tensor f_s = encode_style(m, style);
  std::vector<DinParams> levels;
  levels.reserve(m.generators.size());
  for (const GeneratorNet& gen : m.generators) levels.push_back(generate_din_params(f_s, gen));
  return levels;
}

namespace detail {

inline Tensor offset_field(const StyleTransferModel& m, int level, const Tensor& feat) {
  const std::string prefix = "gen.level" + std::to_string(level) + ".offset";
  Tensor raw = conv2d(feat, m.params.at(prefix + ".w"), m.params.at(prefix + ".b"), 1, 1, PadMode::Reflect);
  // bound the displacement to +- kernel extent
  return mul_scalar(tanh_act(raw), static_cast<double>(m.cfg.din_kernel));
}

}  // namespace detail

// Decoder run with per-level DIN additions: feature <- feature + s*DIN(feature).
inline Tensor run_stylization(const StyleTransferModel& m, const Tensor& content,
                              const std::vector<DinParams>& levels) {
  check(static_cast<int64_t>(levels.size()) == m.cfg.din_levels,
        "style parameters carry " + std::to_string(levels.size()) + " levels, model has " +
            std::to_string(m.cfg.din_levels));
  ForwardHooks hooks;
  hooks.din_inject = [&](int level, const Tensor& feat) {
    DinParams p = levels[level];
    if (p.conv_type == DinConvType::Deformable && !p.offsets.defined())
      p.offsets = detail::offset_field(m, level, feat);
    Tensor y = din(feat, p, m.cfg.eps);
    return m.cfg.din_scale == 1.0 ? y : mul_scalar(y, m.cfg.din_scale);
  };
  return run_network(m.net, m.params, content, nullptr, &hooks, m.cfg.eps);
}

inline void validate_content(const Tensor& content) {
  check(content.rank() == 4 && content.dim(1) == 3, "content must be [N,3,H,W]");
  check(content.dim(2) >= 32 && content.dim(3) >= 32, "content spatial size must be at least 32x32");
  check(content.dim(2) % 4 == 0 && content.dim(3) % 4 == 0, "content spatial size must be divisible by 4");
}

inline void validate_style(const Tensor& style) {
  check(style.rank() == 4 && style.dim(1) == 3, "style must be [1,3,H,W]");
  check(style.dim(0) == 1, "one style image per call");
  check(style.dim(2) >= 32 && style.dim(3) >= 32, "style spatial size must be at least 32x32");
  check(style.dim(2) % 4 == 0 && style.dim(3) % 4 == 0, "style spatial size must be divisible by 4");
}

// Training-path forward: fully differentiable, no narrowing.
inline Tensor forward_train(const StyleTransferModel& m, const Tensor& content, const Tensor& style) {
  validate_content(content);
  validate_style(style);
  return run_stylization(m, content, style_params(m, style));
}

inline double narrow_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline Tensor narrow_tensor(const Tensor& t) {
  Tensor out = t.clone();
  for (double& v : out.mut_data()) v = narrow_f32(v);
  return out;
}

// Encodes a style once into storable per-level DIN parameters. Values are
// narrowed to f32 here, so applying the in-memory code and applying a
// checkpoint round-tripped copy produce identical images.
inline StyleCode precompute_style(const StyleTransferModel& m, const Tensor& style,
                                  const std::string& style_id = "") {
  validate_style(style);
  StyleCode code;
  code.conv_type = m.cfg.conv_type;
  code.style_id = style_id;
  for (const DinParams& p : style_params(m, style)) {
    DinParams q;
    q.conv_type = p.conv_type;
    q.weight = narrow_tensor(p.weight);
    q.bias = narrow_tensor(p.bias);
    if (p.offsets.defined()) q.offsets = narrow_tensor(p.offsets);
    code.levels.push_back(std::move(q));
  }
  return code;
}

inline Tensor apply_style(const StyleTransferModel& m, const Tensor& content, const StyleCode& code) {
  validate_content(content);
  check(code.conv_type == m.cfg.conv_type, "style code conv type '" + std::string(to_string(code.conv_type)) +
                                               "' does not match model '" + to_string(m.cfg.conv_type) + "'");
  return run_stylization(m, content, code.levels);
}

// Inference entry point: precompute + apply, the exact pair of steps the
// stored-style path uses.
inline Tensor forward_stylize(const StyleTransferModel& m, const Tensor& content, const Tensor& style) {
  return apply_style(m, content, precompute_style(m, style));
}

// ---------------------------------------------------------------------------
// Complexity summary for the model: the main network (enc./dec. sections)
// plus synthetic generator-network rows evaluated at the style feature size.
// ---------------------------------------------------------------------------

struct ModelFlopSummary {
  FlopReport network;     // content encoder + decoder (sections "enc", "dec")
  FlopReport style_enc;   // style encoder (precompute-time cost)
  FlopReport generators;  // weight/bias generator nets (precompute-time cost)
};

inline NetworkSpec generator_head_spec(const std::string& name, int64_t style_channels, int64_t out_elems) {
  NetworkSpec spec;
  spec.name = name;
  spec.input_channels = style_channels;
  LayerDesc pool1;
  pool1.kind = LayerKind::AdaptivePool;
  pool1.name = name + ".pool1";
  pool1.pool_h = pool1.pool_w = 4;
  spec.layers.push_back(pool1);
  spec.layers.push_back(detail::conv_layer(name + ".conv", style_channels, style_channels, 3, 1, PadMode::Zero,
                                           false, true));
  LayerDesc pool2 = pool1;
  pool2.name = name + ".pool2";
  pool2.pool_h = pool2.pool_w = 1;
  spec.layers.push_back(pool2);
  spec.layers.push_back(detail::conv_layer(name + ".head", style_channels, out_elems, 1, 1, PadMode::Zero,
                                           false, false));
  return spec;
}

inline ModelFlopSummary model_flops(const ModelConfig& cfg, int64_t in_h, int64_t in_w) {
  validate(cfg);
  ModelFlopSummary s;
  DinSlotCost din_cost{cfg.conv_type, cfg.din_kernel};
  s.network = count_flops(build_default_network(cfg), in_h, in_w, din_cost);
  s.style_enc = count_flops(build_default_network_encoder_only(cfg), in_h, in_w);
  s.style_enc.network = "style-encoder";

  // generators see the style-encoder output: /4 resolution, 4w channels
  const int64_t fs_h = in_h / 4, fs_w = in_w / 4;
  const int64_t style_channels = 4 * cfg.width;
  s.generators.network = "generators";
  s.generators.in_h = fs_h;
  s.generators.in_w = fs_w;
  for (int level = 0; level < cfg.din_levels; ++level) {
    const int64_t ch = cfg.level_channels(level);
    int64_t weight_elems, bias_elems;
    if (cfg.conv_type == DinConvType::SpatiallyAdaptive) {
      const int64_t fh = cfg.sa_content_h >> (2 - level), fw = cfg.sa_content_w >> (2 - level);
      weight_elems = ch * round_up_odd(fh) * round_up_odd(fw);
      bias_elems = ch * fh * fw;
    } else {
      weight_elems = ch * ch * cfg.din_kernel * cfg.din_kernel;
      bias_elems = ch;
    }
    const std::string base = "gen.level" + std::to_string(level);
    for (auto& [suffix, elems] :
         std::vector<std::pair<std::string, int64_t>>{{".weight_net", weight_elems}, {".bias_net", bias_elems}}) {
      FlopReport r = count_flops(generator_head_spec(base + suffix, style_channels, elems), fs_h, fs_w);
      for (auto& row : r.rows) {
        s.generators.rows.push_back(row);
        s.generators.section_totals["gen"] += row.flops;
        s.generators.total += row.flops;
      }
    }
  }
  return s;
}

}  // namespace din
