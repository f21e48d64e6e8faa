// din: stylize images with dynamic instance normalization, precompute
// per-style parameters, train the lightweight network, analyze FLOPs,
// and run the finite-difference verification suites.
//
// Exit codes: 0 success, 2 bad arguments or invalid config, 3 I/O or
// decode failure, 4 checkpoint/architecture mismatch, 5 non-finite loss.

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include "din/fixture.hpp"
#include "din/flops.hpp"
#include "din/gradcheck_suites.hpp"
#include "din/image.hpp"
#include "din/style_io.hpp"
#include "din/trainer.hpp"

namespace {

using namespace din;

RunConfig config_from(const std::string& path) {
  return path.empty() ? parse_run_config(nlohmann::json::object()) : load_run_config(path);
}

std::pair<int64_t, int64_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw std::invalid_argument("--size must look like 512x512");
  size_t done_h = 0, done_w = 0;
  int64_t h = 0, w = 0;
  try {
    h = std::stoll(s.substr(0, x), &done_h);
    w = std::stoll(s.substr(x + 1), &done_w);
  } catch (const std::exception&) {
    throw std::invalid_argument("--size must look like 512x512");
  }
  if (done_h != x || done_w != s.size() - x - 1 || h < 4 || w < 4)
    throw std::invalid_argument("--size must look like 512x512");
  return {h, w};
}

LossNetwork loss_network_from(const RunConfig& cfg) {
  LossNetwork net = make_loss_network(cfg.loss_network_seed);
  if (!cfg.loss_network_weights.empty()) load_params_into(cfg.loss_network_weights, net.params);
  return net;
}

int cmd_stylize(const std::string& config_path, const std::string& content_path, const std::string& style_path,
                const std::string& code_path, const std::string& weights_path, const std::string& out_path,
                const std::string& conv_type) {
  RunConfig cfg = config_from(config_path);
  if (!conv_type.empty()) cfg.model.conv_type = parse_conv_type(conv_type);
  StyleTransferModel model = make_model(cfg.model, cfg.seed);
  load_model_weights(weights_path, model);
  Tensor content = image_to_tensor(read_png(content_path));
  Tensor out;
  if (!code_path.empty()) {
    StyleCode code = load_style_code(code_path);
    if (code.conv_type != model.cfg.conv_type)
      throw checkpoint_error("style code '" + code_path + "' was built for conv type '" +
                             to_string(code.conv_type) + "', model is configured for '" +
                             to_string(model.cfg.conv_type) + "'");
    if (static_cast<int64_t>(code.levels.size()) != model.cfg.din_levels)
      throw checkpoint_error("style code '" + code_path + "' has " + std::to_string(code.levels.size()) +
                             " levels, model is configured for " + std::to_string(model.cfg.din_levels));
    out = apply_style(model, content, code);
  } else {
    Tensor style = image_to_tensor(read_png(style_path));
    out = forward_stylize(model, content, style);
  }
  write_png(out_path, tensor_to_image(out));
  return 0;
}

int cmd_precompute(const std::string& config_path, const std::string& style_path,
                   const std::string& weights_path, const std::string& out_path,
                   const std::string& conv_type) {
  RunConfig cfg = config_from(config_path);
  if (!conv_type.empty()) cfg.model.conv_type = parse_conv_type(conv_type);
  StyleTransferModel model = make_model(cfg.model, cfg.seed);
  load_model_weights(weights_path, model);
  Tensor style = image_to_tensor(read_png(style_path));
  StyleCode code = precompute_style(model, style, style_path);
  save_style_code(out_path, code);
  return 0;
}

int cmd_train(const std::string& config_path) {
  RunConfig cfg = load_run_config(config_path);
  StyleTransferModel model = make_model(cfg.model, cfg.seed);
  LossNetwork loss_net = loss_network_from(cfg);
  if (!cfg.train.resume.empty())
    std::fprintf(stderr, "resuming from %s\n", cfg.train.resume.c_str());
  TrainResult res = train(cfg, model, loss_net);
  std::fprintf(stderr, "trained %lld steps, last checkpoint %s\n", (long long)res.final_step,
               res.last_checkpoint.c_str());
  return 0;
}

int cmd_analyze(const std::string& config_path, const std::string& arch, const std::string& size, bool csv) {
  auto [h, w] = parse_size(size);
  RunConfig cfg = config_from(config_path);
  if (arch != "default" && arch != "vgg-relu4_1" && arch != "both")
    throw std::invalid_argument("--arch must be default, vgg-relu4_1, or both");

  FlopReport vgg;
  if (arch != "default") {
    vgg = count_flops(build_vgg_slice("relu4_1"), h, w);
    std::cout << (csv ? format_report_csv(vgg) : format_report(vgg));
  }
  if (arch != "vgg-relu4_1") {
    ModelFlopSummary s = model_flops(cfg.model, h, w);
    std::cout << (csv ? format_report_csv(s.network) : format_report(s.network));
    std::cout << (csv ? format_report_csv(s.style_enc) : format_report(s.style_enc));
    std::cout << (csv ? format_report_csv(s.generators) : format_report(s.generators));
    if (!csv) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "generator overhead: %.2f MFLOPs\n", s.generators.total / 1e6);
      std::cout << buf;
    }
    if (arch == "both") {
      FlopReport our_enc;
      our_enc.network = "our-encoder";
      our_enc.total = s.network.section_totals.at("enc");
      FlopReport our_dec;
      our_dec.network = "our-decoder";
      our_dec.total = s.network.section_totals.at("dec");
      std::cout << compare_architectures({vgg, our_enc, our_dec});
    }
  }
  return 0;
}

int cmd_gradcheck(const std::string& scope, uint64_t seed) {
  std::vector<NamedCheck> checks;
  if (scope == "ops") {
    checks = gradcheck_ops(seed);
  } else if (scope == "normalization") {
    checks = gradcheck_normalization(seed);
  } else if (scope == "end2end") {
    checks.push_back(gradcheck_end2end(seed));
  } else {
    throw std::invalid_argument("--scope must be ops, normalization, or end2end");
  }
  bool all_ok = true;
  for (const NamedCheck& c : checks) {
    std::printf("%-32s %s  max_rel=%.3e  checked=%lld fallback=%lld\n", c.name.c_str(),
                c.result.passed ? "ok" : "FAIL", c.result.max_rel_err, (long long)c.result.num_checked,
                (long long)c.result.num_fallback);
    all_ok = all_ok && c.result.passed;
  }
  if (!all_ok) {
    std::fprintf(stderr, "gradient check failed\n");
    return 1;
  }
  return 0;
}

int cmd_init(const std::string& config_path, uint64_t seed, bool seed_given, const std::string& out_path) {
  RunConfig cfg = config_from(config_path);
  StyleTransferModel model = make_model(cfg.model, seed_given ? seed : cfg.seed);
  save_model_weights(out_path, model);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic instance normalization style transfer engine"};
  app.require_subcommand(1);
  std::function<int()> run;

  std::string config_path, content_path, style_path, code_path, weights_path, out_path, conv_type;
  std::string arch = "default", size = "512x512", scope = "ops";
  bool csv = false;
  uint64_t seed = 0;

  auto* stylize = app.add_subcommand("stylize", "stylize a content image");
  stylize->add_option("--content", content_path)->required();
  auto* style_opt = stylize->add_option("--style", style_path);
  auto* code_opt = stylize->add_option("--style-code", code_path);
  style_opt->excludes(code_opt);
  stylize->add_option("--weights", weights_path)->required();
  stylize->add_option("--out", out_path)->required();
  stylize->add_option("--conv-type", conv_type, "standard|deformable|spatially-adaptive");
  stylize->add_option("--config", config_path);
  stylize->callback([&] {
    if (style_path.empty() && code_path.empty())
      throw CLI::RequiredError("one of --style or --style-code");
    run = [&] { return cmd_stylize(config_path, content_path, style_path, code_path, weights_path, out_path,
                                   conv_type); };
  });

  auto* precompute = app.add_subcommand("precompute", "encode a style into storable DIN parameters");
  precompute->add_option("--style", style_path)->required();
  precompute->add_option("--weights", weights_path)->required();
  precompute->add_option("--out", out_path)->required();
  precompute->add_option("--conv-type", conv_type);
  precompute->add_option("--config", config_path);
  precompute->callback([&] {
    run = [&] { return cmd_precompute(config_path, style_path, weights_path, out_path, conv_type); };
  });

  auto* trainc = app.add_subcommand("train", "train the stylization network");
  trainc->add_option("--config", config_path)->required();
  trainc->callback([&] {
    run = [&] { return cmd_train(config_path); };
  });

  auto* analyze = app.add_subcommand("analyze", "per-layer FLOP report");
  analyze->add_option("--arch", arch, "default|vgg-relu4_1|both");
  analyze->add_option("--size", size, "input size, e.g. 512x512");
  analyze->add_flag("--csv", csv, "machine-readable rows: name,kind,h,w,c,flops");
  analyze->add_option("--config", config_path);
  analyze->callback([&] {
    run = [&] { return cmd_analyze(config_path, arch, size, csv); };
  });

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference verification suites");
  gradcheck->add_option("--scope", scope, "ops|normalization|end2end");
  gradcheck->add_option("--seed", seed);
  gradcheck->callback([&] {
    run = [&] { return cmd_gradcheck(scope, seed ? seed : 17); };
  });

  auto* init = app.add_subcommand("init", "write seeded random weights for the configured architecture");
  auto* seed_opt = init->add_option("--seed", seed);
  init->add_option("--out", out_path)->required();
  init->add_option("--config", config_path);
  init->callback([&] {
    run = [&] { return cmd_init(config_path, seed, seed_opt->count() > 0, out_path); };
  });

  auto* fixture = app.add_subcommand("fixture", "write the deterministic toy dataset");
  fixture->add_option("--out", out_path)->required();
  fixture->add_option("--seed", seed);
  fixture->callback([&] {
    run = [&] {
      write_fixture_images(out_path, seed ? seed : 2024);
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
    return run();
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const din::nonfinite_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const din::checkpoint_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const din::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
