#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "din/flops.hpp"
#include "din/stylenet.hpp"
#include "oracles.hpp"

using namespace din;

namespace {

NetworkSpec single_conv(int64_t in_ch, int64_t out_ch, int64_t k, int64_t stride, int64_t pad) {
  NetworkSpec spec;
  spec.name = "conv";
  spec.input_channels = in_ch;
  LayerDesc l;
  l.kind = LayerKind::Conv;
  l.name = "net.c";
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = k;
  l.stride = stride;
  l.padding = pad;
  spec.layers.push_back(l);
  return spec;
}

}  // namespace

TEST_CASE("closed-form single conv count") {
  FlopReport r = count_flops(single_conv(3, 64, 3, 1, 1), 512, 512);
  CHECK(r.total == 452984832);  // 9*3*64*512*512
  CHECK(r.rows.size() == 1);
  CHECK(r.rows[0].out_c == 64);
}

TEST_CASE("empty spec counts zero") {
  NetworkSpec spec;
  spec.name = "empty";
  spec.input_channels = 3;
  FlopReport r = count_flops(spec, 512, 512);
  CHECK(r.total == 0);
  CHECK(r.rows.empty());
}

TEST_CASE("VGG-19 slice anchors the MAC=1FLOP convention") {
  FlopReport r = count_flops(build_vgg_slice("relu4_1"), 512, 512);
  CHECK(r.total >= 62940000000ll);
  CHECK(r.total <= 63940000000ll);
}

TEST_CASE("VGG slice tap shapes") {
  NetworkSpec spec = build_vgg_slice("relu4_1");
  auto shapes = walk_shapes(spec, 256, 256);
  CHECK(shapes.front().c == 64);
  CHECK(shapes.front().h == 256);  // relu1_1 resolution
  CHECK(shapes.back().c == 512);
  CHECK(256 / shapes.back().h == 8);  // three pools before conv4_1
  CHECK_THROWS_AS(build_vgg_slice("relu5_1"), std::invalid_argument);
}

TEST_CASE("default architecture meets the complexity budget") {
  ModelConfig cfg;
  ModelFlopSummary s = model_flops(cfg, 512, 512);
  const double enc = s.network.section_totals.at("enc") / 1e9;
  const double dec = s.network.section_totals.at("dec") / 1e9;
  CHECK(enc >= 3.0);
  CHECK(enc <= 4.5);
  CHECK(dec >= 3.0);
  CHECK(dec <= 4.5);
  FlopReport vgg = count_flops(build_vgg_slice("relu4_1"), 512, 512);
  CHECK(double(vgg.total) / double(s.network.section_totals.at("enc")) >= 15.0);
  CHECK(s.generators.total <= 100000000ll);  // generator overhead stays tiny
}

TEST_CASE("comparison table") {
  FlopReport vgg = count_flops(build_vgg_slice("relu4_1"), 512, 512);
  SUBCASE("identical specs have ratio 1") {
    std::string table = compare_architectures({vgg, vgg});
    CHECK(table.find("= 1.00") != std::string::npos);
  }
  SUBCASE("vgg vs our encoder") {
    ModelConfig cfg;
    FlopReport enc = count_flops(build_default_network_encoder_only(cfg), 512, 512);
    enc.network = "our-encoder";
    const double ratio = double(vgg.total) / double(enc.total);
    CHECK(ratio >= 15.0);
    std::string table = compare_architectures({vgg, enc});
    CHECK(table.find("our-encoder") != std::string::npos);
  }
}

TEST_CASE("instrumented execution matches the conv count exactly") {
  Rng rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const int64_t in_ch = rng.uniform_int(1, 8), out_ch = rng.uniform_int(1, 8);
    const int64_t h = rng.uniform_int(4, 16), w = rng.uniform_int(4, 16);
    const int64_t k = rng.uniform_int(1, 3), stride = rng.uniform_int(1, 2);
    const int64_t pad = rng.uniform_int(0, k - 1);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    FlopReport r = count_flops(single_conv(in_ch, out_ch, k, stride, pad), h, w);
    Tensor x = Tensor::randn({1, in_ch, h, w}, rng);
    Tensor kernel = Tensor::randn({out_ch, in_ch, k, k}, rng);
    int64_t macs = 0;
    oracle::conv2d_naive(x, kernel, {}, stride, pad, false, 1, &macs);
    CHECK(macs == r.total);
  }
}

TEST_CASE("conv rows scale by exactly 4 when the input doubles") {
  NetworkSpec spec = build_vgg_slice("relu4_1");
  FlopReport a = count_flops(spec, 128, 128);
  FlopReport b = count_flops(spec, 256, 256);
  REQUIRE(a.rows.size() == b.rows.size());
  for (size_t i = 0; i < a.rows.size(); ++i)
    if (a.rows[i].kind == "conv") CHECK(b.rows[i].flops == 4 * a.rows[i].flops);
}

TEST_CASE("report totals equal row sums") {
  ModelConfig cfg;
  for (const FlopReport& r : {count_flops(build_default_network(cfg), 256, 256, DinSlotCost{}),
                              count_flops(build_vgg_slice("relu3_1"), 96, 96)}) {
    int64_t sum = 0, section_sum = 0;
    for (const FlopRow& row : r.rows) sum += row.flops;
    for (const auto& [name, total] : r.section_totals) section_sum += total;
    CHECK(sum == r.total);
    CHECK(section_sum == r.total);
  }
}

TEST_CASE("depthwise separable counts strictly below standard conv") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t cin = rng.uniform_int(1, 64), cout = rng.uniform_int(2, 64);
    const int64_t k = 1 + 2 * rng.uniform_int(1, 2);  // 3 or 5
    const int64_t h = rng.uniform_int(8, 64);
    NetworkSpec ds;
    ds.input_channels = cin;
    LayerDesc l;
    l.kind = LayerKind::DsBlock;
    l.name = "net.b";
    l.in_ch = cin;
    l.out_ch = cout;
    l.kernel = k;
    l.padding = (k - 1) / 2;
    ds.layers.push_back(l);
    NetworkSpec dense = ds;
    dense.layers[0].kind = LayerKind::Conv;
    const int64_t ds_total = count_flops(ds, h, h).total;
    const int64_t dense_total = count_flops(dense, h, h).total;
    CHECK(ds_total == (k * k * cin + cin * cout) * h * h);
    CHECK(ds_total < dense_total);  // strict for cout>1, k>1
  }
}

TEST_CASE("channel-inconsistent spec rejected") {
  NetworkSpec spec = single_conv(3, 8, 3, 1, 1);
  LayerDesc bad = spec.layers[0];
  bad.name = "net.c2";
  bad.in_ch = 5;  // previous layer emits 8
  spec.layers.push_back(bad);
  CHECK_THROWS_AS(count_flops(spec, 64, 64), std::invalid_argument);
}
