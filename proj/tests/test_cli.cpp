// Drives the built `din` binary end to end; the binary path arrives as a
// command-line argument from CTest.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "din/image.hpp"
#include "din/style_io.hpp"

namespace fs = std::filesystem;

static std::string g_cli;

namespace {

int run(const std::string& args, const std::string& log = "cmd.log") {
  const std::string cmd = g_cli + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

struct Workspace {
  fs::path dir;
  Workspace() : dir("tmp_cli_ws") {
    std::error_code ec;
    fs::remove_all(dir, ec);
    fs::create_directories(dir);
    fs::current_path(dir);
  }
  ~Workspace() {
    fs::current_path("..");
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
};

void write_cfg(const std::string& path, const std::string& body) { std::ofstream(path) << body; }

}  // namespace

TEST_CASE("cli end to end") {
  Workspace ws;
  REQUIRE(run("fixture --out fx --seed 99") == 0);
  write_cfg("cfg.json", R"({"width": 8})");
  REQUIRE(run("init --config cfg.json --seed 5 --out w.dinc") == 0);

  SUBCASE("stylize produces a PNG with the content's dimensions") {
    // content and style sizes may differ
    din::Rng rng(4);
    din::Tensor big = din::Tensor::zeros({1, 3, 64, 64});
    for (double& v : big.mut_data()) v = rng.uniform();
    din::write_png("content64.png", din::tensor_to_image(big));
    din::Tensor sty = din::Tensor::zeros({1, 3, 96, 96});
    for (double& v : sty.mut_data()) v = rng.uniform();
    din::write_png("style96.png", din::tensor_to_image(sty));
    REQUIRE(run("stylize --config cfg.json --content content64.png --style style96.png --weights w.dinc "
                "--out out.png") == 0);
    din::Image out = din::read_png("out.png");
    CHECK(out.width == 64);
    CHECK(out.height == 64);
  }

  SUBCASE("precompute is deterministic and equivalent to the direct path") {
    REQUIRE(run("precompute --config cfg.json --style fx/style/s00.png --weights w.dinc --out code1.dinc") == 0);
    REQUIRE(run("precompute --config cfg.json --style fx/style/s00.png --weights w.dinc --out code2.dinc") == 0);
    CHECK(slurp("code1.dinc") == slurp("code2.dinc"));

    din::StyleCode code = din::load_style_code("code1.dinc");
    CHECK(code.levels.size() == 3);  // configured DIN level count

    REQUIRE(run("stylize --config cfg.json --content fx/content/c01.png --style fx/style/s00.png "
                "--weights w.dinc --out direct.png") == 0);
    REQUIRE(run("stylize --config cfg.json --content fx/content/c01.png --style-code code1.dinc "
                "--weights w.dinc --out viacode.png") == 0);
    CHECK(slurp("direct.png") == slurp("viacode.png"));
  }

  SUBCASE("failure classes") {
    CHECK(run("stylize --config cfg.json --content nope.png --style fx/style/s00.png --weights w.dinc "
              "--out o.png") == 3);
    // content height not divisible by 4
    din::Tensor odd = din::Tensor::zeros({1, 3, 34, 32});
    din::write_png("c34.png", din::tensor_to_image(odd));
    CHECK(run("stylize --config cfg.json --content c34.png --style fx/style/s00.png --weights w.dinc "
              "--out o.png") == 2);
    CHECK(slurp("cmd.log").find("divisible by 4") != std::string::npos);
    // tampered magic bytes
    std::string blob = slurp("w.dinc");
    blob[0] = 'X';
    std::ofstream("bad.dinc", std::ios::binary) << blob;
    CHECK(run("stylize --config cfg.json --content fx/content/c00.png --style fx/style/s00.png "
              "--weights bad.dinc --out o.png") == 4);
    // architecture mismatch: defaults (width 32) against width-8 weights
    CHECK(run("stylize --content fx/content/c00.png --style fx/style/s00.png --weights w.dinc "
              "--out o.png") == 4);
    write_cfg("unknown.json", R"({"widht": 8})");
    CHECK(run("train --config unknown.json") == 2);
    CHECK(slurp("cmd.log").find("widht") != std::string::npos);
    CHECK(run("analyze --size 512y512") == 2);
    CHECK(run("gradcheck --scope everything") == 2);
    CHECK(run("analyze --arch fancy") == 2);
  }

  SUBCASE("train smoke via the cli is reproducible") {
    write_cfg("train.json", R"({"width": 4, "seed": 7, "content_dir": "fx/content",
      "style_dir": "fx/style", "out_dir": "runA", "batch_size": 1, "crop": 32, "steps": 6,
      "checkpoint_interval": 3, "content_layer": "relu2_1", "style_layers": ["relu1_1","relu2_1"]})");
    REQUIRE(run("train --config train.json") == 0);
    CHECK(fs::exists("runA/ckpt_000003.dinc"));
    CHECK(fs::exists("runA/ckpt_000006.dinc"));
    write_cfg("trainB.json", R"({"width": 4, "seed": 7, "content_dir": "fx/content",
      "style_dir": "fx/style", "out_dir": "runB", "batch_size": 1, "crop": 32, "steps": 6,
      "checkpoint_interval": 3, "content_layer": "relu2_1", "style_layers": ["relu1_1","relu2_1"]})");
    REQUIRE(run("train --config trainB.json") == 0);
    CHECK(slurp("runA/loss_log.tsv") == slurp("runB/loss_log.tsv"));
    CHECK(!slurp("runA/loss_log.tsv").empty());
  }

  SUBCASE("analyze csv is machine readable") {
    REQUIRE(run("analyze --arch vgg-relu4_1 --size 64x64 --csv") == 0);
    const std::string csv = slurp("cmd.log");
    CHECK(csv.find("vgg.conv1_1,conv,64,64,64,") != std::string::npos);
  }
}

int main(int argc, char** argv) {
  if (argc > 1 && argv[argc - 1][0] != '-') {
    g_cli = fs::absolute(argv[argc - 1]).string();
    --argc;
  } else {
    std::fprintf(stderr, "usage: test_cli <path-to-din-binary>\n");
    return 1;
  }
  doctest::Context ctx(argc, argv);
  return ctx.run();
}
