#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "din/grad_check.hpp"
#include "din/checkpoint.hpp"
#include "din/losses.hpp"
#include "oracles.hpp"

using namespace din;

namespace {

Tensor random_image(Rng& rng, int64_t h, int64_t w) {
  Tensor t = Tensor::zeros({1, 3, h, w});
  for (double& v : t.mut_data()) v = rng.uniform();
  return t;
}

// permute spatial positions with a seeded Fisher-Yates shuffle, per channel
Tensor permute_spatial(const Tensor& x, uint64_t seed) {
  Rng rng(seed);
  const int64_t hw = x.dim(2) * x.dim(3);
  std::vector<int64_t> perm(hw);
  for (int64_t i = 0; i < hw; ++i) perm[i] = i;
  for (int64_t i = hw - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
  Tensor out = x.clone();
  auto xv = x.data();
  auto ov = out.mut_data();
  for (int64_t nc = 0; nc < x.dim(0) * x.dim(1); ++nc)
    for (int64_t i = 0; i < hw; ++i) ov[nc * hw + i] = xv[nc * hw + perm[i]];
  return out;
}

}  // namespace

TEST_CASE("content_loss") {
  Rng rng(1);
  Tensor f = Tensor::randn({1, 8, 4, 4}, rng);
  SUBCASE("self distance is zero") { CHECK(content_loss(f, f).value() == 0.0); }
  SUBCASE("unit offset gives exactly one") {
    Tensor g = add_scalar(f, 1.0);
    CHECK(content_loss(g, f).value() == doctest::Approx(1.0));
  }
  SUBCASE("matches a hand-rolled mean square") {
    Tensor g = Tensor::randn({1, 8, 4, 4}, rng);
    double want = 0.0;
    for (int64_t i = 0; i < f.numel(); ++i) {
      const double d = f.data()[i] - g.data()[i];
      want += d * d;
    }
    want /= double(f.numel());
    CHECK(content_loss(f, g).value() == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("shape mismatch rejected") {
    Tensor g = Tensor::randn({1, 8, 4, 5}, rng);
    CHECK_THROWS_AS(content_loss(f, g), std::invalid_argument);
  }
}

TEST_CASE("style_loss") {
  Rng rng(2);
  SUBCASE("identical features give zero") {
    Tensor a = Tensor::randn({1, 4, 5, 5}, rng);
    Tensor b = Tensor::randn({1, 8, 3, 3}, rng);
    CHECK(style_loss({a, b}, {a, b}).value() == 0.0);
  }
  SUBCASE("invariant under spatial permutation") {
    Tensor a = Tensor::randn({1, 4, 6, 6}, rng);
    Tensor shuffled = permute_spatial(a, 77);
    CHECK(style_loss({a}, {shuffled}).value() <= 1e-24);
  }
  SUBCASE("hand-set statistics") {
    // two channels; means (0,0) vs (1,0); equal sigmas -> loss 0.5
    Tensor out = Tensor::from_vector({1, 2, 1, 2}, {0.4, -0.4, 0.9, -0.9});
    Tensor sty = Tensor::from_vector({1, 2, 1, 2}, {1.4, 0.6, 0.9, -0.9});
    CHECK(style_loss({out}, {sty}).value() == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("channel mismatch rejected") {
    Tensor a = Tensor::randn({1, 4, 5, 5}, rng);
    Tensor b = Tensor::randn({1, 5, 5, 5}, rng);
    CHECK_THROWS_AS(style_loss({a}, {b}), std::invalid_argument);
    CHECK_THROWS_AS(style_loss({a, a}, {a}), std::invalid_argument);
  }
  SUBCASE("non-negative on random features") {
    for (int i = 0; i < 10; ++i) {
      Tensor a = Tensor::randn({1, 4, 5, 5}, rng);
      Tensor b = Tensor::randn({1, 4, 7, 7}, rng);
      CHECK(style_loss({a}, {b}).value() >= 0.0);
    }
  }
}

TEST_CASE("total_loss") {
  LossNetwork net = make_loss_network(5, "relu2_1");
  LossConfig cfg;
  cfg.content_layer = "relu2_1";
  cfg.style_layers = {"relu1_1", "relu2_1"};
  Rng rng(3);
  Tensor content = random_image(rng, 32, 32);

  SUBCASE("self-styling with matching statistics is zero") {
    Tensor v = total_loss(content, content, content, net, cfg);
    CHECK(v.value() == 0.0);
  }
  SUBCASE("zero style weight reduces to the content term") {
    Tensor style = random_image(rng, 32, 32);
    Tensor stylized = random_image(rng, 32, 32);
    LossConfig c0 = cfg;
    c0.style_weight = 0.0;
    auto out_taps = extract_features(net, stylized);
    auto content_taps = extract_features(net, content);
    Tensor want = content_loss(out_taps.at(cfg.content_layer), content_taps.at(cfg.content_layer));
    CHECK(total_loss(content, style, stylized, net, c0).value() == doctest::Approx(want.value()).epsilon(1e-15));
  }
  SUBCASE("unknown layer rejected") {
    LossConfig bad = cfg;
    bad.content_layer = "relu9_9";
    CHECK_THROWS_AS(total_loss(content, content, content, net, bad), std::invalid_argument);
  }
  SUBCASE("gradient with respect to the stylized image") {
    Tensor style = random_image(rng, 32, 32);
    Tensor stylized = random_image(rng, 32, 32);
    std::vector<int64_t> sample;
    Rng pick(9);
    for (int i = 0; i < 48; ++i) sample.push_back(pick.uniform_int(0, stylized.numel() - 1));
    auto fn = [&](const Tensor& t) { return total_loss(content, style, t, net, cfg); };
    auto res = grad_check(fn, stylized, {}, &sample);
    INFO("max rel err ", res.max_rel_err);
    CHECK(res.passed);
  }
}

TEST_CASE("loss network weights load from a checkpoint") {
  LossNetwork original = make_loss_network(31);
  const std::string path = "tmp_vgg_weights.dinc";
  save_params(path, original.params);
  LossNetwork fresh = make_loss_network(99);  // different seed
  load_params_into(path, fresh.params);
  Rng rng(7);
  Tensor img = random_image(rng, 32, 32);
  // loaded weights pass through the f32 narrowing, so compare features there
  auto a = extract_features(original, img).at("relu4_1");
  auto b = extract_features(fresh, img).at("relu4_1");
  double rel = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    rel = std::max(rel, std::fabs(a.data()[i] - b.data()[i]) / std::max(1.0, std::fabs(a.data()[i])));
  CHECK(rel <= 1e-4);
  std::remove(path.c_str());
}

TEST_CASE("one forward with all taps equals independent per-tap forwards") {
  LossNetwork full = make_loss_network(7, "relu4_1");
  Rng rng(4);
  Tensor img = random_image(rng, 32, 32);
  auto taps = extract_features(full, img);
  for (std::string layer : {"relu1_1", "relu2_1", "relu3_1", "relu4_1"}) {
    NetworkSpec slice = build_vgg_slice(layer);
    std::map<std::string, Tensor> solo;
    run_network(slice, full.params, img, &solo);
    CHECK(oracle::max_abs_diff(taps.at(layer), solo.at(layer)) == 0.0);
  }
}
