#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "din/checkpoint.hpp"
#include "din/config.hpp"
#include "din/image.hpp"
#include "din/losses.hpp"

namespace din {

// ---------------------------------------------------------------------------
// Adam with bias correction and per-group learning-rate multipliers (the
// DIN weight/bias generators train at 10x the base rate).
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  void init(const std::vector<Tensor>& params) {
    m.clear();
    v.clear();
    for (const Tensor& p : params) {
      m.emplace_back(static_cast<size_t>(p.numel()), 0.0);
      v.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    }
  }
};

// One bias-corrected update. Gradients are read but never modified; the
// caller zeroes them between steps.
inline void adam_step(std::vector<Tensor>& params, const std::vector<double>& lr_mults, AdamState& st) {
  check(params.size() == st.m.size() && params.size() == lr_mults.size(),
        "adam_step: parameter/state size mismatch");
  check(st.step < (int64_t{1} << 62), "adam_step: step counter overflow");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.cfg.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.cfg.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    check(static_cast<int64_t>(st.m[i].size()) == p.numel(), "adam_step: moment shape mismatch");
    auto pd = p.mut_data();
    auto g = p.grad();  // empty means zero gradient
    const double lr = st.cfg.lr * lr_mults[i];
    for (int64_t j = 0; j < p.numel(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      st.m[i][j] = st.cfg.beta1 * st.m[i][j] + (1.0 - st.cfg.beta1) * gj;
      st.v[i][j] = st.cfg.beta2 * st.v[i][j] + (1.0 - st.cfg.beta2) * gj * gj;
      const double mhat = st.m[i][j] / bc1;
      const double vhat = st.v[i][j] / bc2;
      pd[j] -= lr * mhat / (std::sqrt(vhat) + st.cfg.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Deterministic toy-scale training loop
// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<std::string> names;
  std::vector<Tensor> images;  // [1,3,H,W]
};

inline Dataset load_image_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  Dataset ds;
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path().string());
  }
  if (ec) throw io_error("cannot read directory '" + dir + "': " + ec.message());
  std::sort(files.begin(), files.end());
  for (const std::string& f : files) {
    ds.images.push_back(image_to_tensor(read_png(f)));
    ds.names.push_back(f);
  }
  if (ds.images.empty()) throw io_error("no decodable .png images in '" + dir + "'");
  return ds;
}

struct TrainResult {
  std::vector<std::string> log_lines;  // step<TAB>content<TAB>style<TAB>total
  int64_t final_step = 0;
  std::string last_checkpoint;
};

namespace detail {

struct CropDraw {
  Tensor crop;
  int64_t image = 0, side = 0, y0 = 0, x0 = 0;
};

inline CropDraw sample_crop(const Dataset& ds, Rng& rng, int64_t crop) {
  CropDraw d;
  d.image = rng.uniform_int(0, static_cast<int64_t>(ds.images.size()) - 1);
  const Tensor& img = ds.images[static_cast<size_t>(d.image)];
  const int64_t H = img.dim(2), W = img.dim(3);
  const int64_t max_side = std::min(H, W);
  check(max_side >= crop, "image '" + ds.names[d.image] + "' smaller than the crop size");
  d.side = rng.uniform_int(crop, max_side);
  d.y0 = rng.uniform_int(0, H - d.side);
  d.x0 = rng.uniform_int(0, W - d.side);
  d.crop = crop_resize(img, d.y0, d.x0, d.side, crop);
  return d;
}

inline std::string format_log_line(int64_t step, double c, double s, double t) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%" PRId64 "\t%.17g\t%.17g\t%.17g", step, c, s, t);
  return buf;
}

struct OptSnapshotNames {
  static std::string step() { return "__opt.step"; }
  static std::string rng() { return "__opt.rng"; }
  static std::string moment(const char* which, const std::string& pname) {
    return std::string("__opt.") + which + "." + pname;
  }
};

}  // namespace detail

// Seeded, bit-reproducible training. Checkpoints carry the f32 weights,
// lossless f64 twins, Adam moments, the step counter, and the generator
// state, so an interrupted run resumes bit-exactly.
inline TrainResult train(const RunConfig& cfg, StyleTransferModel& model, const LossNetwork& loss_net,
                         const std::function<void(int64_t)>& on_step_end = {}) {
  namespace fs = std::filesystem;
  validate_loss_config(cfg.loss, loss_net);
  Dataset content_ds = load_image_dir(cfg.train.content_dir);
  Dataset style_ds = load_image_dir(cfg.train.style_dir);
  fs::create_directories(cfg.train.out_dir);

  std::vector<Tensor> params;
  std::vector<std::string> names;
  std::vector<double> mults;
  for (auto& [name, t] : model.params.items()) {
    params.push_back(t);
    names.push_back(name);
    mults.push_back(name.rfind("gen.", 0) == 0 ? cfg.train.generator_lr_mult : 1.0);
  }

  AdamState opt;
  opt.cfg = AdamConfig{cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps};
  opt.init(params);
  Rng rng(cfg.seed);
  int64_t start_step = 0;

  if (!cfg.train.resume.empty()) {
    NamedTensors rest = load_params_into(cfg.train.resume, model.params);
    std::map<std::string, Tensor> extra(rest.begin(), rest.end());
    auto need = [&](const std::string& key) -> const Tensor& {
      auto it = extra.find(key);
      if (it == extra.end()) throw checkpoint_error("resume checkpoint lacks '" + key + "'");
      return it->second;
    };
    opt.step = static_cast<int64_t>(decode_u64_exact(need(detail::OptSnapshotNames::step())));
    rng.set_state(decode_u64_exact(need(detail::OptSnapshotNames::rng())));
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor m = decode_f64_exact(need(detail::OptSnapshotNames::moment("m", names[i])), {params[i].numel()});
      Tensor v = decode_f64_exact(need(detail::OptSnapshotNames::moment("v", names[i])), {params[i].numel()});
      opt.m[i].assign(m.data().begin(), m.data().end());
      opt.v[i].assign(v.data().begin(), v.data().end());
    }
    start_step = opt.step;
    check(start_step < cfg.train.steps, "resume checkpoint is already at or past the target step count");
  }

  const std::string log_path = cfg.train.out_dir + "/loss_log.tsv";
  std::ofstream log(log_path, start_step > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw io_error("cannot open '" + log_path + "'");

  auto write_checkpoint_at = [&](int64_t step) {
    NamedTensors extra;
    extra.emplace_back(detail::OptSnapshotNames::step(), encode_u64_exact(static_cast<uint64_t>(step)));
    extra.emplace_back(detail::OptSnapshotNames::rng(), encode_u64_exact(rng.state()));
    for (size_t i = 0; i < params.size(); ++i) {
      extra.emplace_back(detail::OptSnapshotNames::moment("m", names[i]),
                         encode_f64_exact(Tensor::from_vector({params[i].numel()}, opt.m[i])));
      extra.emplace_back(detail::OptSnapshotNames::moment("v", names[i]),
                         encode_f64_exact(Tensor::from_vector({params[i].numel()}, opt.v[i])));
    }
    char name[64];
    std::snprintf(name, sizeof(name), "/ckpt_%06" PRId64 ".dinc", step);
    const std::string path = cfg.train.out_dir + name;
    save_params(path, model.params, /*exact=*/true, extra);
    return path;
  };

  // features of target crops never depend on the trainable weights; cache
  // them keyed by the exact draw (dataset, image, crop rect)
  std::map<std::string, std::map<std::string, Tensor>> target_cache;
  auto target_features = [&](const char* tag, const detail::CropDraw& d) -> const std::map<std::string, Tensor>& {
    char key[96];
    std::snprintf(key, sizeof(key), "%s:%" PRId64 ":%" PRId64 ":%" PRId64 ":%" PRId64, tag, d.image, d.side,
                  d.y0, d.x0);
    auto it = target_cache.find(key);
    if (it != target_cache.end()) return it->second;
    if (target_cache.size() > 256) target_cache.clear();
    return target_cache[key] = extract_features(loss_net, d.crop);
  };

  TrainResult result;
  for (int64_t step = start_step + 1; step <= cfg.train.steps; ++step) {
    Tape tape;
    TapeScope scope(tape);
    Tensor batch_loss;
    double content_term = 0.0, style_term = 0.0;
    for (int64_t b = 0; b < cfg.train.batch_size; ++b) {
      detail::CropDraw content = detail::sample_crop(content_ds, rng, cfg.train.crop);
      detail::CropDraw style = detail::sample_crop(style_ds, rng, cfg.train.crop);
      Tensor stylized = forward_train(model, content.crop, style.crop);
      auto out_taps = extract_features(loss_net, stylized);
      const auto& content_taps = target_features("c", content);
      const auto& style_taps = target_features("s", style);
      Tensor closs = content_loss(out_taps.at(cfg.loss.content_layer), content_taps.at(cfg.loss.content_layer));
      Tensor sloss = style_loss(detail::pick_layers(out_taps, cfg.loss.style_layers),
                                detail::pick_layers(style_taps, cfg.loss.style_layers), cfg.loss.eps);
      Tensor item = add(closs, mul_scalar(sloss, cfg.loss.style_weight));
      batch_loss = batch_loss.defined() ? add(batch_loss, item) : item;
      content_term += closs.value();
      style_term += sloss.value();
    }
    Tensor loss = mul_scalar(batch_loss, 1.0 / static_cast<double>(cfg.train.batch_size));
    const double total = loss.value();
    if (!std::isfinite(total))
      throw nonfinite_error("non-finite loss at step " + std::to_string(step) +
                            " (content=" + std::to_string(content_term) + ")");
    tape.backward(loss);
    adam_step(params, mults, opt);
    model.params.zero_all_grads();
    // relu maps NaN to 0, so a diverged state can hide behind a finite
    // loss; catch it at the parameters instead
    for (size_t i = 0; i < params.size(); ++i)
      if (!params[i].all_finite())
        throw nonfinite_error("non-finite values in parameter '" + names[i] + "' after the step " +
                              std::to_string(step) + " update");

    content_term /= static_cast<double>(cfg.train.batch_size);
    style_term /= static_cast<double>(cfg.train.batch_size);
    std::string line = detail::format_log_line(step, content_term, style_term, total);
    log << line << '\n';
    log.flush();
    result.log_lines.push_back(std::move(line));
    if (step % cfg.train.checkpoint_interval == 0 || step == cfg.train.steps)
      result.last_checkpoint = write_checkpoint_at(step);
    result.final_step = step;
    if (on_step_end) on_step_end(step);
  }
  return result;
}

}  // namespace din
