#pragma once

#include "din/checkpoint.hpp"
#include "din/stylenet.hpp"

namespace din {

// StyleCode and model-weight persistence on top of the checkpoint format.
// A small meta tensor carries the architecture fingerprint so a weights
// file or style code is rejected loudly when it does not match the
// configured model.

inline Tensor model_meta_tensor(const ModelConfig& cfg) {
  return Tensor::from_vector({9}, {static_cast<double>(cfg.width), static_cast<double>(cfg.din_levels),
                                   static_cast<double>(static_cast<int>(cfg.conv_type)),
                                   static_cast<double>(cfg.din_kernel), cfg.separable ? 1.0 : 0.0,
                                   cfg.vgg_style_encoder ? 1.0 : 0.0, static_cast<double>(cfg.sa_content_h),
                                   static_cast<double>(cfg.sa_content_w), cfg.adain_baseline ? 1.0 : 0.0});
}

inline void check_model_meta(const Tensor& meta, const ModelConfig& cfg, const std::string& what) {
  Tensor want = model_meta_tensor(cfg);
  if (meta.shape() != want.shape()) throw checkpoint_error(what + ": malformed architecture meta entry");
  static const char* fields[] = {"width",     "din_levels",        "conv_type",    "din_kernel",
                                 "separable", "vgg_style_encoder", "sa_content_h", "sa_content_w",
                                 "normalization"};
  for (int64_t i = 0; i < want.numel(); ++i)
    if (meta.data()[i] != want.data()[i])
      throw checkpoint_error(what + ": architecture mismatch on " + fields[i] + " (file has " +
                             std::to_string(meta.data()[i]) + ", config expects " +
                             std::to_string(want.data()[i]) + ")");
}

inline constexpr const char* kModelMetaName = "__model_meta";

inline void save_model_weights(const std::string& path, const StyleTransferModel& m) {
  save_params(path, m.params, /*exact=*/false, {{kModelMetaName, model_meta_tensor(m.cfg)}});
}

// Accepts both plain weight files and training checkpoints (which carry
// exact f64 twins and optimizer state on top of the weights).
inline void load_model_weights(const std::string& path, StyleTransferModel& m) {
  NamedTensors rest = load_params_into(path, m.params);
  for (const auto& [name, t] : rest)
    if (name == kModelMetaName) check_model_meta(t, m.cfg, path);
}

// ---------------------------------------------------------------------------
// StyleCode files: one weight/bias pair per hierarchical level.
// ---------------------------------------------------------------------------

inline constexpr const char* kStyleMetaName = "__style_meta";

inline void save_style_code(const std::string& path, const StyleCode& code) {
  NamedTensors out;
  out.emplace_back(kStyleMetaName,
                   Tensor::from_vector({2}, {static_cast<double>(static_cast<int>(code.conv_type)),
                                             static_cast<double>(code.levels.size())}));
  for (size_t k = 0; k < code.levels.size(); ++k) {
    const std::string base = "style.level" + std::to_string(k);
    out.emplace_back(base + ".weight", code.levels[k].weight);
    out.emplace_back(base + ".bias", code.levels[k].bias);
    if (code.levels[k].offsets.defined()) out.emplace_back(base + ".offsets", code.levels[k].offsets);
  }
  write_checkpoint(path, out);
}

inline StyleCode load_style_code(const std::string& path) {
  NamedTensors entries = read_checkpoint(path);
  std::map<std::string, Tensor> by_name(entries.begin(), entries.end());
  auto meta_it = by_name.find(kStyleMetaName);
  if (meta_it == by_name.end() || meta_it->second.numel() != 2)
    throw checkpoint_error("'" + path + "' is not a style code (missing meta entry)");
  StyleCode code;
  const int type_id = static_cast<int>(meta_it->second.data()[0]);
  if (type_id < 0 || type_id > 2) throw checkpoint_error("'" + path + "': unknown conv type tag");
  code.conv_type = static_cast<DinConvType>(type_id);
  const int64_t levels = static_cast<int64_t>(meta_it->second.data()[1]);
  for (int64_t k = 0; k < levels; ++k) {
    const std::string base = "style.level" + std::to_string(k);
    DinParams p;
    p.conv_type = code.conv_type;
    auto w = by_name.find(base + ".weight");
    auto b = by_name.find(base + ".bias");
    if (w == by_name.end() || b == by_name.end())
      throw checkpoint_error("'" + path + "': style code is missing level " + std::to_string(k));
    p.weight = w->second;
    p.bias = b->second;
    auto o = by_name.find(base + ".offsets");
    if (o != by_name.end()) p.offsets = o->second;
    code.levels.push_back(std::move(p));
  }
  return code;
}

}  // namespace din
