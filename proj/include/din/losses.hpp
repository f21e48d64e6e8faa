#pragma once

#include <map>
#include <string>
#include <vector>

#include "din/stylenet.hpp"

namespace din {

struct LossConfig {
  std::string content_layer = "relu4_1";
  std::vector<std::string> style_layers = {"relu1_1", "relu2_1", "relu3_1", "relu4_1"};
  double style_weight = 10.0;
  double eps = kDefaultEps;  // sigma convention shared with instance_norm
};

// VGG-slice feature extractor. Weights are frozen: target features then
// never record tape nodes, only the stylized image's path does.
struct LossNetwork {
  NetworkSpec spec;
  ParamStore params;
};

inline LossNetwork make_loss_network(uint64_t seed, const std::string& upto_layer = "relu4_1") {
  LossNetwork net;
  net.spec = build_vgg_slice(upto_layer);
  Rng rng(seed);
  init_network_params(net.spec, net.params, rng);
  for (auto& [name, t] : net.params.items()) t.set_requires_grad(false);
  return net;
}

inline void validate_loss_config(const LossConfig& cfg, const LossNetwork& net) {
  check(cfg.style_weight >= 0.0, "style_weight must be non-negative");
  auto has_tap = [&](const std::string& tap) {
    for (const LayerDesc& l : net.spec.layers)
      if (l.tap == tap) return true;
    return false;
  };
  check(has_tap(cfg.content_layer), "content layer '" + cfg.content_layer + "' not in the loss network");
  for (const std::string& l : cfg.style_layers)
    check(has_tap(l), "style layer '" + l + "' not in the loss network");
}

// One forward pass, all taps captured.
inline std::map<std::string, Tensor> extract_features(const LossNetwork& net, const Tensor& img) {
  std::map<std::string, Tensor> taps;
  run_network(net.spec, net.params, img, &taps);
  return taps;
}

// Mean squared difference over all feature elements.
inline Tensor content_loss(const Tensor& f_out, const Tensor& f_target) {
  check(f_out.shape() == f_target.shape(), "content_loss: feature shapes differ (" + shape_str(f_out.shape()) +
                                               " vs " + shape_str(f_target.shape()) + ")");
  Tensor d = sub(f_out, f_target);
  return mean_all(mul(d, d));
}

// Per layer: squared distance between channel-wise means plus squared
// distance between channel-wise standard deviations, averaged over
// channels; summed across layers. Spatial sizes may differ per layer pair.
inline Tensor style_loss(const std::vector<Tensor>& feats_out, const std::vector<Tensor>& feats_style,
                         double eps = kDefaultEps) {
  check(!feats_out.empty() && feats_out.size() == feats_style.size(),
        "style_loss: feature lists must align layer by layer");
  Tensor total;
  for (size_t i = 0; i < feats_out.size(); ++i) {
    check(feats_out[i].dim(1) == feats_style[i].dim(1),
          "style_loss: channel mismatch at layer " + std::to_string(i));
    auto [mu_o, sd_o] = channel_stats(feats_out[i], eps);
    auto [mu_s, sd_s] = channel_stats(feats_style[i], eps);
    Tensor dm = sub(mu_o, mu_s);
    Tensor ds = sub(sd_o, sd_s);
    Tensor layer = add(mean_all(mul(dm, dm)), mean_all(mul(ds, ds)));
    total = total.defined() ? add(total, layer) : layer;
  }
  return total;
}

namespace detail {

inline std::vector<Tensor> pick_layers(const std::map<std::string, Tensor>& taps,
                                       const std::vector<std::string>& names) {
  std::vector<Tensor> out;
  out.reserve(names.size());
  for (const std::string& n : names) {
    auto it = taps.find(n);
    check(it != taps.end(), "loss network did not produce tap '" + n + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace detail

// content term at cfg.content_layer plus style_weight times the
// BN-statistic style term over cfg.style_layers, with one loss-network
// forward per image.
inline Tensor total_loss(const Tensor& content_img, const Tensor& style_img, const Tensor& stylized_img,
                         const LossNetwork& net, const LossConfig& cfg) {
  validate_loss_config(cfg, net);
  auto out_taps = extract_features(net, stylized_img);
  auto content_taps = extract_features(net, content_img);
  auto style_taps = extract_features(net, style_img);
  Tensor c = content_loss(out_taps.at(cfg.content_layer), content_taps.at(cfg.content_layer));
  Tensor s = style_loss(detail::pick_layers(out_taps, cfg.style_layers),
                        detail::pick_layers(style_taps, cfg.style_layers), cfg.eps);
  return add(c, mul_scalar(s, cfg.style_weight));
}

}  // namespace din
