#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "din/grad_check.hpp"
#include "din/ops.hpp"
#include "din/rng.hpp"
#include "oracles.hpp"

using namespace din;

namespace {

Tensor vec(std::vector<double> v) {
  const int64_t n = (int64_t)v.size();
  return Tensor::from_vector({n}, std::move(v));
}

}  // namespace

TEST_CASE("elementwise add/sub/mul basics") {
  Tensor a = vec({1, 2});
  Tensor b = vec({3, 4});
  Tensor s = add(a, b);
  CHECK(s.data()[0] == 4.0);
  CHECK(s.data()[1] == 6.0);

  Tensor z = mul(a, Tensor::scalar(0.0));
  CHECK(z.shape() == a.shape());
  CHECK(z.data()[0] == 0.0);
  CHECK(z.data()[1] == 0.0);

  Tensor d = sub(a, b);
  CHECK(d.data()[0] == -2.0);
}

TEST_CASE("per-channel broadcast add") {
  Tensor x = Tensor::zeros({1, 2, 2, 2});
  Tensor beta = Tensor::from_vector({1, 2, 1, 1}, {10, 20});
  Tensor y = add(x, beta);
  for (int64_t h = 0; h < 2; ++h)
    for (int64_t w = 0; w < 2; ++w) {
      CHECK(y.at(0, 0, h, w) == 10.0);
      CHECK(y.at(0, 1, h, w) == 20.0);
    }
}

TEST_CASE("broadcast shape mismatch rejected") {
  Tensor a = Tensor::zeros({1, 2, 2, 2});
  Tensor b = Tensor::zeros({1, 3, 1, 1});
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(add(vec({1, 2}), vec({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("channel_stats values") {
  const double eps = kDefaultEps;
  SUBCASE("uniform channel") {
    Tensor x = Tensor::full({1, 1, 2, 2}, 1.0);
    auto [m, s] = channel_stats(x);
    CHECK(m.value() == doctest::Approx(1.0));
    CHECK(s.value() == doctest::Approx(std::sqrt(eps)));
  }
  SUBCASE("1..4 channel") {
    Tensor x = Tensor::from_vector({1, 1, 2, 2}, {1, 2, 3, 4});
    auto [m, s] = channel_stats(x);
    CHECK(m.value() == doctest::Approx(2.5));
    CHECK(s.value() == doctest::Approx(std::sqrt(1.25 + eps)));
  }
  SUBCASE("channels are independent") {
    Tensor x = Tensor::from_vector({1, 2, 1, 2}, {1, 2, 100, -50});
    auto [m, s] = channel_stats(x);
    CHECK(m.data()[0] == doctest::Approx(1.5));
    Tensor x2 = Tensor::from_vector({1, 2, 1, 2}, {1, 2, 7, 7});
    auto [m2, s2] = channel_stats(x2);
    CHECK(m.data()[0] == m2.data()[0]);
    CHECK(s.data()[0] == s2.data()[0]);
  }
}

TEST_CASE("backward of sum(x*x)") {
  Tensor x = vec({1, 2});
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = sum_all(mul(x, x));
    tape.backward(y);
  }
  CHECK(x.grad()[0] == doctest::Approx(2.0));
  CHECK(x.grad()[1] == doctest::Approx(4.0));
}

TEST_CASE("gradient accumulates across reuse") {
  Tensor z = vec({1, 2, 3});
  z.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = add(sum_all(z), sum_all(z));
    tape.backward(y);
  }
  for (int i = 0; i < 3; ++i) CHECK(z.grad()[i] == doctest::Approx(2.0));
}

TEST_CASE("backward error paths") {
  Tensor x = vec({1, 2});
  x.set_requires_grad(true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);  // not scalar
  Tensor loose = Tensor::scalar(3.0);
  CHECK_THROWS_AS(tape.backward(loose), std::invalid_argument);  // not on tape
}

TEST_CASE("backward is deterministic bit for bit") {
  Rng rng(7);
  Tensor x = Tensor::randn({2, 3, 4, 4}, rng);
  auto run = [&]() {
    Tensor p = x.clone();
    p.set_requires_grad(true);
    Tape tape;
    TapeScope scope(tape);
    auto [m, s] = channel_stats(p);
    Tensor y = sum_all(mul(div(sub(p, m), s), p));
    tape.backward(y);
    return std::vector<double>(p.grad().begin(), p.grad().end());
  };
  auto g1 = run();
  auto g2 = run();
  CHECK(g1 == g2);
}

TEST_CASE("grad_check: polynomial passes at tight tolerance") {
  Tensor x = vec({0.5, -1.25, 2.0});
  GradCheckOpts opts;
  opts.rel_tol = 1e-6;
  auto res = grad_check([](const Tensor& t) { return sum_all(mul(t, t)); }, x, opts);
  CHECK(res.passed);
  CHECK(res.max_rel_err <= 1e-6);
}

TEST_CASE("grad_check: normalization backward through mean and std") {
  Rng rng(11);
  Tensor x = Tensor::randn({1, 3, 8, 8}, rng);
  SUBCASE("sum of IN(x) has finite (zero) gradients") {
    auto fn = [](const Tensor& t) {
      auto [m, s] = channel_stats(t);
      return sum_all(div(sub(t, m), s));
    };
    auto res = grad_check(fn, x);
    CHECK(res.passed);
    CHECK(res.num_nonfinite == 0);
  }
  SUBCASE("weighted sum of IN(x) has nontrivial gradients") {
    Tensor r = Tensor::randn(x.shape(), rng);
    auto fn = [&](const Tensor& t) {
      auto [m, s] = channel_stats(t);
      return sum_all(mul(div(sub(t, m), s), r));
    };
    auto res = grad_check(fn, x);
    CHECK(res.passed);
    CHECK(res.num_nonfinite == 0);
  }
}

TEST_CASE("grad_check: zero-gradient region uses absolute fallback") {
  // relu of strictly negative inputs: analytic and FD gradients are both 0
  Tensor x = vec({-1.0, -2.0, -0.5});
  auto res = grad_check([](const Tensor& t) { return sum_all(relu(t)); }, x);
  CHECK(res.passed);
  CHECK(res.num_fallback == 3);
}

TEST_CASE("every elementwise op passes FD over randomized tensors") {
  Rng rng(101);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    Shape shape = {1 + (int64_t)rng.uniform_int(1, 2) - 1, (int64_t)rng.uniform_int(1, 3),
                   (int64_t)rng.uniform_int(1, 4), (int64_t)rng.uniform_int(1, 4)};
    Tensor a = Tensor::randn(shape, rng);
    Tensor bsame = Tensor::randn(shape, rng);
    Tensor bchan = Tensor::randn({1, shape[1], 1, 1}, rng);
    Tensor bscalar = Tensor::randn({1}, rng);
    // keep divisors away from zero
    for (auto* t : {&bsame, &bchan, &bscalar})
      for (double& v : t->mut_data()) v = (v < 0 ? v - 0.5 : v + 0.5);

    for (ElemOp op : {ElemOp::Add, ElemOp::Sub, ElemOp::Mul, ElemOp::Div}) {
      for (const Tensor& b : {bsame, bchan, bscalar}) {
        auto wrt_a = grad_check([&](const Tensor& t) { return sum_all(elementwise(op, t, b)); }, a);
        CHECK(wrt_a.passed);
        auto wrt_b = grad_check([&](const Tensor& t) { return mean_all(elementwise(op, a, t)); }, b);
        CHECK(wrt_b.passed);
        checked += 2;
      }
    }
  }
  CHECK(checked >= 100);
}

TEST_CASE("channel_stats FD over randomized tensors") {
  Rng rng(202);
  for (int trial = 0; trial < 30; ++trial) {
    Shape shape = {(int64_t)rng.uniform_int(1, 2), (int64_t)rng.uniform_int(1, 3), (int64_t)rng.uniform_int(2, 5),
                   (int64_t)rng.uniform_int(2, 5)};
    Tensor x = Tensor::randn(shape, rng);
    auto res_m = grad_check(
        [](const Tensor& t) {
          auto [m, s] = channel_stats(t);
          return sum_all(mul(m, m));
        },
        x);
    CHECK(res_m.passed);
    auto res_s = grad_check(
        [](const Tensor& t) {
          auto [m, s] = channel_stats(t);
          return sum_all(mul(s, s));
        },
        x);
    CHECK(res_s.passed);
  }
}

TEST_CASE("instance-norm output statistics") {
  Rng rng(303);
  const double eps = kDefaultEps;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = Tensor::randn({1, 4, 6, 6}, rng, 2.0);
    auto [m, s] = channel_stats(x);
    Tensor y = div(sub(x, m), s);
    auto [my, sy] = channel_stats(y);
    for (int64_t c = 0; c < 4; ++c) {
      CHECK(std::fabs(my.data()[c]) <= 1e-9);
      CHECK(sy.data()[c] <= 1.0 + 3 * eps);
      CHECK(sy.data()[c] >= 1.0 - 3 * eps);
    }
  }
}

TEST_CASE("finite-value debug check") {
  Tensor ok = vec({1.0, 2.0});
  CHECK(ok.all_finite());
  Tensor bad = vec({1.0, 2.0});
  bad.mut_data()[1] = std::nan("");
  CHECK_FALSE(bad.all_finite());
}
