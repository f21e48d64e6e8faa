#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "din/checkpoint.hpp"
#include "din/config.hpp"
#include "din/image.hpp"
#include "oracles.hpp"

using namespace din;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::path("tmp_io_test");
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("checkpoint round trip over randomized tensor sets") {
  TempDir tmp;
  Rng rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    NamedTensors tensors;
    const int64_t count = rng.uniform_int(1, 12);
    for (int64_t i = 0; i < count; ++i) {
      Shape shape;
      const int64_t rank = rng.uniform_int(1, 4);
      for (int64_t d = 0; d < rank; ++d) shape.push_back(rng.uniform_int(1, 6));
      tensors.emplace_back("t" + std::to_string(trial) + "_" + std::to_string(i),
                           Tensor::randn(shape, rng, 3.0));
    }
    const std::string path = tmp.file("rt.dinc");
    write_checkpoint(path, tensors);
    NamedTensors back = read_checkpoint(path);
    REQUIRE(back.size() == tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
      CHECK(back[i].first == tensors[i].first);
      CHECK(back[i].second.shape() == tensors[i].second.shape());
      for (int64_t j = 0; j < tensors[i].second.numel(); ++j) {
        // narrowing to f32 on write is part of the contract
        const double want = static_cast<double>(static_cast<float>(tensors[i].second.data()[j]));
        CHECK(back[i].second.data()[j] == want);
      }
    }
    // write -> read -> write is a byte-level fixed point
    const std::string path2 = tmp.file("rt2.dinc");
    write_checkpoint(path2, back);
    CHECK(slurp(path) == slurp(path2));
  }
}

TEST_CASE("checkpoint rejects damage") {
  TempDir tmp;
  const std::string path = tmp.file("x.dinc");
  write_checkpoint(path, {{"a", Tensor::scalar(1.5)}});
  SUBCASE("tampered magic") {
    std::string blob = slurp(path);
    blob[0] = 'X';
    std::ofstream(path, std::ios::binary) << blob;
    CHECK_THROWS_AS(read_checkpoint(path), checkpoint_error);
  }
  SUBCASE("unknown version") {
    std::string blob = slurp(path);
    blob[4] = 99;
    std::ofstream(path, std::ios::binary) << blob;
    CHECK_THROWS_AS(read_checkpoint(path), checkpoint_error);
  }
  SUBCASE("truncation") {
    std::string blob = slurp(path);
    blob.resize(blob.size() - 3);
    std::ofstream(path, std::ios::binary) << blob;
    CHECK_THROWS_AS(read_checkpoint(path), checkpoint_error);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(read_checkpoint(tmp.file("nope.dinc")), io_error); }
}

TEST_CASE("exact f64 side-channel is lossless") {
  Rng rng(2);
  std::vector<double> values;
  for (int i = 0; i < 64; ++i) values.push_back(rng.normal() * std::pow(10.0, rng.uniform_int(-300, 300)));
  values.push_back(0.0);
  values.push_back(-0.0);
  values.push_back(1e-310);  // subnormal
  values.push_back(-3.737e227);
  Tensor t = Tensor::from_vector({static_cast<int64_t>(values.size())}, values);
  Tensor enc = encode_f64_exact(t);
  for (double v : enc.data()) CHECK(v == static_cast<double>(static_cast<float>(v)));  // f32-safe payload
  Tensor dec = decode_f64_exact(enc, t.shape());
  for (int64_t i = 0; i < t.numel(); ++i)
    CHECK(std::bit_cast<uint64_t>(dec.data()[i]) == std::bit_cast<uint64_t>(t.data()[i]));

  const uint64_t u = 0xDEADBEEFCAFE1234ull;
  CHECK(decode_u64_exact(encode_u64_exact(u)) == u);
}

TEST_CASE("param store load semantics") {
  TempDir tmp;
  Rng rng(3);
  ParamStore store;
  store.create("net.a", {2, 3});
  store.create("net.b", {4});
  for (auto& [name, t] : store.items())
    for (double& v : t.mut_data()) v = rng.normal();

  SUBCASE("plain save narrows, exact save restores f64") {
    const std::string plain = tmp.file("plain.dinc");
    const std::string exact = tmp.file("exact.dinc");
    save_params(plain, store, false);
    save_params(exact, store, true);
    std::vector<double> original(store.at("net.a").data().begin(), store.at("net.a").data().end());

    for (double& v : store.at("net.a").mut_data()) v = 0.0;
    load_params_into(plain, store);
    for (size_t i = 0; i < original.size(); ++i)
      CHECK(store.at("net.a").data()[i] == static_cast<double>(static_cast<float>(original[i])));

    for (double& v : store.at("net.a").mut_data()) v = 0.0;
    load_params_into(exact, store);
    for (size_t i = 0; i < original.size(); ++i) CHECK(store.at("net.a").data()[i] == original[i]);
  }
  SUBCASE("missing parameter and shape mismatch are architecture errors") {
    const std::string path = tmp.file("partial.dinc");
    write_checkpoint(path, {{"net.a", store.at("net.a")}});
    CHECK_THROWS_AS(load_params_into(path, store), checkpoint_error);
    write_checkpoint(path, {{"net.a", Tensor::zeros({3, 2})}, {"net.b", store.at("net.b")}});
    CHECK_THROWS_AS(load_params_into(path, store), checkpoint_error);
  }
}

TEST_CASE("png round trip is lossless") {
  TempDir tmp;
  Rng rng(4);
  for (auto [w, h] : {std::pair<int64_t, int64_t>{1, 1}, {7, 3}, {32, 32}, {64, 48}}) {
    Image img;
    img.width = w;
    img.height = h;
    img.rgb.resize(static_cast<size_t>(3 * w * h));
    for (auto& b : img.rgb) b = static_cast<uint8_t>(rng.uniform_int(0, 255));
    const std::string path = tmp.file("img.png");
    write_png(path, img);
    Image back = read_png(path);
    CHECK(back.width == w);
    CHECK(back.height == h);
    CHECK(back.rgb == img.rgb);
  }
}

TEST_CASE("png reader handles grayscale and rejects junk") {
  TempDir tmp;
  SUBCASE("grayscale decodes to replicated channels") {
    // hand-assembled 2x2 8-bit grayscale PNG
    std::vector<uint8_t> raw = {0, 10, 200, 0, 55, 255};  // filter byte + 2 px, twice
    uLongf clen = compressBound(raw.size());
    std::vector<uint8_t> comp(clen);
    REQUIRE(compress2(comp.data(), &clen, raw.data(), raw.size(), 6) == Z_OK);
    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    pngdetail::put_u32be(ihdr, 2);
    pngdetail::put_u32be(ihdr, 2);
    ihdr += std::string("\x08\x00\x00\x00\x00", 5);  // 8-bit gray
    pngdetail::append_chunk(out, "IHDR", ihdr);
    pngdetail::append_chunk(out, "IDAT", std::string(reinterpret_cast<char*>(comp.data()), clen));
    pngdetail::append_chunk(out, "IEND", "");
    const std::string path = tmp.file("gray.png");
    std::ofstream(path, std::ios::binary) << out;
    Image img = read_png(path);
    CHECK(img.width == 2);
    CHECK(img.rgb[0] == 10);
    CHECK(img.rgb[1] == 10);
    CHECK(img.rgb[2] == 10);
    CHECK(img.rgb[9] == 255);
  }
  SUBCASE("not a png") {
    const std::string path = tmp.file("junk.png");
    std::ofstream(path, std::ios::binary) << "definitely not a png";
    CHECK_THROWS_AS(read_png(path), io_error);
  }
}

TEST_CASE("pixel mapping") {
  Image img;
  img.width = 2;
  img.height = 1;
  img.rgb = {0, 128, 255, 17, 34, 51};
  Tensor t = image_to_tensor(img);
  CHECK(t.at(0, 0, 0, 0) == 0.0);
  CHECK(t.at(0, 2, 0, 0) == 1.0);
  Image back = tensor_to_image(t);
  CHECK(back.rgb == img.rgb);
  // clamping applies only at export
  Tensor wild = Tensor::from_vector({1, 3, 1, 1}, {-0.5, 0.5, 1.5});
  Image clamped = tensor_to_image(wild);
  CHECK(clamped.rgb[0] == 0);
  CHECK(clamped.rgb[2] == 255);
}

TEST_CASE("run config parsing") {
  SUBCASE("defaults") {
    RunConfig cfg = parse_run_config(nlohmann::json::object());
    CHECK(cfg.model.width == 32);
    CHECK(cfg.loss.style_weight == 10.0);
    CHECK(cfg.train.lr == 1e-4);
  }
  SUBCASE("unknown key is named") {
    nlohmann::json j = {{"widht", 16}};
    try {
      parse_run_config(j);
      FAIL("expected rejection");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("widht") != std::string::npos);
    }
  }
  SUBCASE("values land in the right places") {
    nlohmann::json j = {{"width", 8},
                        {"din_levels", 2},
                        {"conv_type", "deformable"},
                        {"style_layers", {"relu1_1", "relu2_1"}},
                        {"style_weight", 3.5},
                        {"steps", 17},
                        {"generator_lr_mult", 5.0}};
    RunConfig cfg = parse_run_config(j);
    CHECK(cfg.model.width == 8);
    CHECK(cfg.model.din_levels == 2);
    CHECK(cfg.model.conv_type == DinConvType::Deformable);
    CHECK(cfg.loss.style_layers.size() == 2);
    CHECK(cfg.train.steps == 17);
    CHECK(cfg.train.generator_lr_mult == 5.0);
  }
  SUBCASE("invalid values rejected") {
    CHECK_THROWS_AS(parse_run_config({{"crop", 30}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config({{"steps", 0}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config({{"conv_type", "fancy"}}), std::invalid_argument);
    CHECK_THROWS_AS(parse_run_config({{"din_levels", 9}}), std::invalid_argument);
  }
}
