#pragma once

#include <json.hpp>

#include <fstream>
#include <set>
#include <string>

#include "din/losses.hpp"
#include "din/stylenet.hpp"

namespace din {

struct TrainSettings {
  std::string content_dir;
  std::string style_dir;
  std::string out_dir = "train_out";
  int64_t batch_size = 2;
  int64_t crop = 32;
  int64_t steps = 200;
  int64_t checkpoint_interval = 100;
  double lr = 1e-4;
  double generator_lr_mult = 10.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string resume;  // checkpoint path, optional
};

// Flat key-value configuration mirroring the model, loss, and trainer
// options. Unknown keys are rejected by name.
struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  TrainSettings train;
  uint64_t seed = 1;
  uint64_t loss_network_seed = 7;
  std::string loss_network_weights;  // optional checkpoint for the VGG slice
};

inline DinConvType parse_conv_type(const std::string& s) {
  if (s == "standard") return DinConvType::Standard;
  if (s == "deformable") return DinConvType::Deformable;
  if (s == "spatially-adaptive" || s == "spatially_adaptive") return DinConvType::SpatiallyAdaptive;
  throw std::invalid_argument("unknown conv type '" + s + "'");
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "width",      "din_levels",    "conv_type",    "din_kernel",   "separable",
      "din_scale",  "eps",           "style_encoder", "sa_content_h", "sa_content_w",
      "normalization",               "seed",
      "content_layer",               "style_layers", "style_weight", "loss_network_seed",
      "loss_network_weights",        "content_dir",  "style_dir",    "out_dir",
      "batch_size", "crop",          "steps",        "checkpoint_interval",
      "lr",         "generator_lr_mult",             "beta1",        "beta2",
      "adam_eps",   "resume"};
  check(j.is_object(), "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it)
    check(known.count(it.key()) != 0, "unknown config key '" + it.key() + "'");

  RunConfig cfg;
  auto get = [&](const char* key, auto& dst) {
    if (j.contains(key)) dst = j.at(key).template get<std::decay_t<decltype(dst)>>();
  };
  get("width", cfg.model.width);
  get("din_levels", cfg.model.din_levels);
  if (j.contains("conv_type")) cfg.model.conv_type = parse_conv_type(j.at("conv_type").get<std::string>());
  get("din_kernel", cfg.model.din_kernel);
  get("separable", cfg.model.separable);
  get("din_scale", cfg.model.din_scale);
  get("eps", cfg.model.eps);
  if (j.contains("style_encoder")) {
    const std::string s = j.at("style_encoder").get<std::string>();
    check(s == "compact" || s == "vgg", "style_encoder must be 'compact' or 'vgg'");
    cfg.model.vgg_style_encoder = (s == "vgg");
  }
  get("sa_content_h", cfg.model.sa_content_h);
  get("sa_content_w", cfg.model.sa_content_w);
  if (j.contains("normalization")) {
    const std::string n = j.at("normalization").get<std::string>();
    check(n == "din" || n == "adain", "normalization must be 'din' or 'adain'");
    cfg.model.adain_baseline = (n == "adain");
  }
  get("seed", cfg.seed);
  get("content_layer", cfg.loss.content_layer);
  if (j.contains("style_layers")) cfg.loss.style_layers = j.at("style_layers").get<std::vector<std::string>>();
  get("style_weight", cfg.loss.style_weight);
  cfg.loss.eps = cfg.model.eps;
  get("loss_network_seed", cfg.loss_network_seed);
  get("loss_network_weights", cfg.loss_network_weights);
  get("content_dir", cfg.train.content_dir);
  get("style_dir", cfg.train.style_dir);
  get("out_dir", cfg.train.out_dir);
  get("batch_size", cfg.train.batch_size);
  get("crop", cfg.train.crop);
  get("steps", cfg.train.steps);
  get("checkpoint_interval", cfg.train.checkpoint_interval);
  get("lr", cfg.train.lr);
  get("generator_lr_mult", cfg.train.generator_lr_mult);
  get("beta1", cfg.train.beta1);
  get("beta2", cfg.train.beta2);
  get("adam_eps", cfg.train.adam_eps);
  get("resume", cfg.train.resume);

  validate(cfg.model);
  check(cfg.train.crop >= 32 && cfg.train.crop % 4 == 0, "crop size must be >= 32 and divisible by 4");
  check(cfg.train.steps > 0, "steps must be positive");
  check(cfg.train.batch_size >= 1, "batch_size must be positive");
  check(cfg.train.checkpoint_interval >= 1, "checkpoint_interval must be positive");
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace din
