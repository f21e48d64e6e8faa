#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "din/normalization.hpp"

namespace din {

// ---------------------------------------------------------------------------
// Declarative network description. A NetworkSpec is an ordered layer list
// from which the forward pass, parameter initialization, and the FLOP
// report are all derived, so the three can never drift apart.
// ---------------------------------------------------------------------------

enum class LayerKind { Conv, DsBlock, ResBlock, Upsample, MaxPool, AdaptivePool, Relu, DinSlot };

struct LayerDesc {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  int64_t in_ch = 0, out_ch = 0;
  int64_t kernel = 3;
  int64_t stride = 1;
  int64_t padding = 0;
  PadMode pad_mode = PadMode::Zero;
  bool norm = false;       // instance norm inside the block
  bool act = false;        // trailing ReLU
  bool separable = true;   // ResBlock conv style
  int64_t scale = 2;       // Upsample factor
  int64_t pool_h = 1, pool_w = 1;  // AdaptivePool target
  int din_level = -1;      // DinSlot level index
  std::string tap;         // feature tap name emitted after this layer
};

struct NetworkSpec {
  std::string name;
  std::vector<LayerDesc> layers;
  int64_t input_channels = 3;
  int64_t din_levels = 0;
};

// Ordered parameter container; iteration order is creation order, which
// pins down initialization draws, optimizer traversal, and checkpoints.
class ParamStore {
 public:
  Tensor& create(const std::string& name, Shape shape) {
    check(!index_.count(name), "parameter '" + name + "' already exists");
    items_.emplace_back(name, Tensor::zeros(std::move(shape), true));
    index_[name] = items_.size() - 1;
    return items_.back().second;
  }

  // Registers an externally constructed tensor (shares the handle).
  void adopt(const std::string& name, Tensor t) {
    check(!index_.count(name), "parameter '" + name + "' already exists");
    items_.emplace_back(name, std::move(t));
    index_[name] = items_.size() - 1;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown parameter '" + name + "'");
    return items_[it->second].second;
  }
  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "unknown parameter '" + name + "'");
    return items_[it->second].second;
  }

  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  size_t size() const { return items_.size(); }

  void zero_all_grads() {
    for (auto& [name, t] : items_) t.zero_grad();
  }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::unordered_map<std::string, size_t> index_;
};

namespace detail {

inline void init_conv_pair(ParamStore& store, const std::string& prefix, int64_t out_ch, int64_t in_per_group,
                           int64_t k, Rng& rng) {
  const double scale = std::sqrt(2.0 / static_cast<double>(in_per_group * k * k));
  Tensor& w = store.create(prefix + ".w", {out_ch, in_per_group, k, k});
  for (double& v : w.mut_data()) v = scale * rng.normal();
  store.create(prefix + ".b", {out_ch});
}

}  // namespace detail

// He-initialized parameters for every layer of the spec, created in layer
// order with a caller-provided generator.
inline void init_network_params(const NetworkSpec& spec, ParamStore& store, Rng& rng) {
  for (const LayerDesc& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
        detail::init_conv_pair(store, l.name, l.out_ch, l.in_ch, l.kernel, rng);
        break;
      case LayerKind::DsBlock:
        detail::init_conv_pair(store, l.name + ".dw", l.in_ch, 1, l.kernel, rng);
        detail::init_conv_pair(store, l.name + ".pw", l.out_ch, l.in_ch, 1, rng);
        break;
      case LayerKind::ResBlock:
        if (l.separable) {
          detail::init_conv_pair(store, l.name + ".c1.dw", l.in_ch, 1, l.kernel, rng);
          detail::init_conv_pair(store, l.name + ".c1.pw", l.out_ch, l.in_ch, 1, rng);
          detail::init_conv_pair(store, l.name + ".c2.dw", l.out_ch, 1, l.kernel, rng);
          detail::init_conv_pair(store, l.name + ".c2.pw", l.out_ch, l.out_ch, 1, rng);
        } else {
          detail::init_conv_pair(store, l.name + ".c1", l.out_ch, l.in_ch, l.kernel, rng);
          detail::init_conv_pair(store, l.name + ".c2", l.out_ch, l.out_ch, l.kernel, rng);
        }
        break;
      default:
        break;  // parameter-free layers
    }
  }
}

struct ForwardHooks {
  // Applied at each DIN slot; returns the tensor added into the stream.
  std::function<Tensor(int level, const Tensor& feat)> din_inject;
};

// Interprets the layer list. Taps, when requested, capture the named
// intermediate outputs (the loss network relies on this).
inline Tensor run_network(const NetworkSpec& spec, const ParamStore& params, const Tensor& input,
                          std::map<std::string, Tensor>* taps = nullptr, const ForwardHooks* hooks = nullptr,
                          double eps = kDefaultEps) {
  check(input.rank() == 4, "run_network expects NCHW input");
  check(input.dim(1) == spec.input_channels, "network '" + spec.name + "' expects " +
                                                 std::to_string(spec.input_channels) + " input channels, got " +
                                                 std::to_string(input.dim(1)));
  Tensor x = input;
  auto conv_of = [&](const std::string& prefix, const Tensor& t, int64_t stride, int64_t pad, PadMode mode,
                     int64_t groups) {
    return conv2d(t, params.at(prefix + ".w"), params.at(prefix + ".b"), stride, pad, mode, groups);
  };
  for (const LayerDesc& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv: {
        x = conv_of(l.name, x, l.stride, l.padding, l.pad_mode, 1);
        if (l.norm) x = instance_norm(x, eps);
        if (l.act) x = relu(x);
        break;
      }
      case LayerKind::DsBlock: {
        x = conv_of(l.name + ".dw", x, l.stride, l.padding, l.pad_mode, l.in_ch);
        x = conv_of(l.name + ".pw", x, 1, 0, PadMode::Zero, 1);
        if (l.norm) x = instance_norm(x, eps);
        if (l.act) x = relu(x);
        break;
      }
      case LayerKind::ResBlock: {
        Tensor t = x;
        auto block_conv = [&](const std::string& stage, const Tensor& in) {
          if (l.separable) {
            Tensor h = conv_of(l.name + "." + stage + ".dw", in, 1, l.padding, l.pad_mode, l.in_ch);
            return conv_of(l.name + "." + stage + ".pw", h, 1, 0, PadMode::Zero, 1);
          }
          return conv_of(l.name + "." + stage, in, 1, l.padding, l.pad_mode, 1);
        };
        t = block_conv("c1", t);
        if (l.norm) t = instance_norm(t, eps);
        t = relu(t);
        t = block_conv("c2", t);
        if (l.norm) t = instance_norm(t, eps);
        x = add(x, t);
        break;
      }
      case LayerKind::Upsample:
        x = bilinear_upsample(x, l.scale);
        break;
      case LayerKind::MaxPool:
        x = max_pool2x2(x);
        break;
      case LayerKind::AdaptivePool:
        x = adaptive_avg_pool(x, l.pool_h, l.pool_w);
        break;
      case LayerKind::Relu:
        x = relu(x);
        break;
      case LayerKind::DinSlot:
        if (hooks && hooks->din_inject) x = add(x, hooks->din_inject(l.din_level, x));
        break;
    }
    if (!l.tap.empty() && taps) (*taps)[l.tap] = x;
  }
  return x;
}

// Static shape walk used for validation and the FLOP report.
struct LayerShape {
  int64_t c, h, w;
};

inline std::vector<LayerShape> walk_shapes(const NetworkSpec& spec, int64_t in_h, int64_t in_w) {
  std::vector<LayerShape> out;
  int64_t c = spec.input_channels, h = in_h, w = in_w;
  for (const LayerDesc& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::DsBlock:
      case LayerKind::ResBlock: {
        check(l.in_ch == c, "layer '" + l.name + "' expects " + std::to_string(l.in_ch) + " channels, gets " +
                                std::to_string(c));
        h = (h + 2 * l.padding - l.kernel) / l.stride + 1;
        w = (w + 2 * l.padding - l.kernel) / l.stride + 1;
        check(h >= 1 && w >= 1, "layer '" + l.name + "' collapses the spatial extent");
        c = l.out_ch;
        break;
      }
      case LayerKind::Upsample:
        h *= l.scale;
        w *= l.scale;
        break;
      case LayerKind::MaxPool:
        h /= 2;
        w /= 2;
        break;
      case LayerKind::AdaptivePool:
        h = l.pool_h;
        w = l.pool_w;
        break;
      case LayerKind::Relu:
      case LayerKind::DinSlot:
        break;
    }
    out.push_back({c, h, w});
  }
  return out;
}

}  // namespace din
