#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "din/tape.hpp"

namespace din {

inline constexpr double kDefaultEps = 1e-5;

enum class ElemOp { Add, Sub, Mul, Div };

namespace detail {

// Broadcast forms for binary ops: identical shapes, scalar rhs, or a 4-d
// rhs whose dims are each 1 or equal to the lhs dim (covers the
// per-channel [1,C,1,1] / [N,C,1,1] forms and spatial parameter maps).
struct Bcast {
  enum Kind { Same, Scalar, Dim4 } kind = Same;
  int64_t N = 1, C = 1, H = 1, W = 1;
  int64_t sn = 0, sc = 0, sh = 0, sw = 0;  // rhs strides, 0 on unit dims
};

inline Bcast broadcast_plan(const Tensor& a, const Tensor& b) {
  Bcast p;
  if (a.shape() == b.shape()) {
    p.kind = Bcast::Same;
    return p;
  }
  if (b.numel() == 1) {
    p.kind = Bcast::Scalar;
    return p;
  }
  check(a.rank() == 4 && b.rank() == 4,
        "elementwise: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
            " are not broadcast-compatible (need equal shapes, scalar rhs, or 4-d rhs with unit dims)");
  p.kind = Bcast::Dim4;
  p.N = a.dim(0);
  p.C = a.dim(1);
  p.H = a.dim(2);
  p.W = a.dim(3);
  const Shape& bs = b.shape();
  int64_t adims[4] = {p.N, p.C, p.H, p.W};
  int64_t strides[4];
  int64_t stride = 1;
  for (int i = 3; i >= 0; --i) {
    check(bs[i] == 1 || bs[i] == adims[i],
          "elementwise: rhs dim " + std::to_string(i) + " of " + shape_str(bs) +
              " does not broadcast against " + shape_str(a.shape()));
    strides[i] = (bs[i] == 1) ? 0 : stride;
    stride *= bs[i];
  }
  p.sn = strides[0];
  p.sc = strides[1];
  p.sh = strides[2];
  p.sw = strides[3];
  return p;
}

template <class F>
inline void for_each_pair(const Bcast& p, int64_t n_elems, F&& f) {
  switch (p.kind) {
    case Bcast::Same:
      for (int64_t i = 0; i < n_elems; ++i) f(i, i);
      break;
    case Bcast::Scalar:
      for (int64_t i = 0; i < n_elems; ++i) f(i, int64_t{0});
      break;
    case Bcast::Dim4: {
      int64_t i = 0;
      for (int64_t n = 0; n < p.N; ++n)
        for (int64_t c = 0; c < p.C; ++c)
          for (int64_t h = 0; h < p.H; ++h) {
            int64_t base = n * p.sn + c * p.sc + h * p.sh;
            for (int64_t w = 0; w < p.W; ++w) f(i++, base + w * p.sw);
          }
      break;
    }
  }
}

inline void accum_flat(Tensor t, std::span<const double> g) {
  auto& buf = t.grad_buffer();
  for (size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

}  // namespace detail

inline Tensor elementwise(ElemOp op, const Tensor& a, const Tensor& b) {
  detail::Bcast plan = detail::broadcast_plan(a, b);
  const int64_t n = a.numel();
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.mut_data();
  switch (op) {
    case ElemOp::Add:
      detail::for_each_pair(plan, n, [&](int64_t i, int64_t j) { ov[i] = av[i] + bv[j]; });
      break;
    case ElemOp::Sub:
      detail::for_each_pair(plan, n, [&](int64_t i, int64_t j) { ov[i] = av[i] - bv[j]; });
      break;
    case ElemOp::Mul:
      detail::for_each_pair(plan, n, [&](int64_t i, int64_t j) { ov[i] = av[i] * bv[j]; });
      break;
    case ElemOp::Div:
      detail::for_each_pair(plan, n, [&](int64_t i, int64_t j) { ov[i] = av[i] / bv[j]; });
      break;
  }
  if (detail::should_record({&a, &b})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [op, plan, a, b, out]() {
      auto g = out.grad();
      auto av2 = a.data();
      auto bv2 = b.data();
      if (a.requires_grad()) {
        Tensor at = a;
        auto& ga = at.grad_buffer();
        switch (op) {
          case ElemOp::Add:
          case ElemOp::Sub:
            for (int64_t i = 0; i < a.numel(); ++i) ga[i] += g[i];
            break;
          case ElemOp::Mul:
            detail::for_each_pair(plan, a.numel(), [&](int64_t i, int64_t j) { ga[i] += g[i] * bv2[j]; });
            break;
          case ElemOp::Div:
            detail::for_each_pair(plan, a.numel(), [&](int64_t i, int64_t j) { ga[i] += g[i] / bv2[j]; });
            break;
        }
      }
      if (b.requires_grad()) {
        Tensor bt = b;
        auto& gb = bt.grad_buffer();
        switch (op) {
          case ElemOp::Add:
            detail::for_each_pair(plan, a.numel(), [&](int64_t i, int64_t j) { gb[j] += g[i]; });
            break;
          case ElemOp::Sub:
            detail::for_each_pair(plan, a.numel(), [&](int64_t i, int64_t j) { gb[j] -= g[i]; });
            break;
          case ElemOp::Mul:
            detail::for_each_pair(plan, a.numel(), [&](int64_t i, int64_t j) { gb[j] += g[i] * av2[i]; });
            break;
          case ElemOp::Div:
            detail::for_each_pair(plan, a.numel(),
                                  [&](int64_t i, int64_t j) { gb[j] -= g[i] * av2[i] / (bv2[j] * bv2[j]); });
            break;
        }
      }
    });
  }
  return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::Add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::Sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::Mul, a, b); }
inline Tensor div(const Tensor& a, const Tensor& b) { return elementwise(ElemOp::Div, a, b); }

inline Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data();
  auto ov = out.mut_data();
  for (int64_t i = 0; i < a.numel(); ++i) ov[i] = av[i] * s;
  if (detail::should_record({&a})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [a, out, s]() {
      auto g = out.grad();
      Tensor at = a;
      auto& ga = at.grad_buffer();
      for (int64_t i = 0; i < a.numel(); ++i) ga[i] += s * g[i];
    });
  }
  return out;
}

inline Tensor add_scalar(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.shape());
  auto av = a.data();
  auto ov = out.mut_data();
  for (int64_t i = 0; i < a.numel(); ++i) ov[i] = av[i] + s;
  if (detail::should_record({&a})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [a, out]() { detail::accum_flat(a, out.grad()); });
  }
  return out;
}

inline Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto ov = out.mut_data();
  for (int64_t i = 0; i < x.numel(); ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    // subgradient at exactly 0 is 0
    Tape::current()->record(out, [x, out]() {
      auto g = out.grad();
      auto xv2 = x.data();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t i = 0; i < x.numel(); ++i)
        if (xv2[i] > 0.0) gx[i] += g[i];
    });
  }
  return out;
}

inline Tensor tanh_act(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xv = x.data();
  auto ov = out.mut_data();
  for (int64_t i = 0; i < x.numel(); ++i) ov[i] = std::tanh(xv[i]);
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out]() {
      auto g = out.grad();
      auto yv = out.data();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
    });
  }
  return out;
}

inline Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::scalar(acc);
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out]() {
      double g = out.grad()[0];
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    });
  }
  return out;
}

inline Tensor mean_all(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  const double inv = 1.0 / static_cast<double>(x.numel());
  Tensor out = Tensor::scalar(acc * inv);
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out, inv]() {
      double g = out.grad()[0] * inv;
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t i = 0; i < x.numel(); ++i) gx[i] += g;
    });
  }
  return out;
}

inline Tensor reshape(const Tensor& x, Shape new_shape) {
  check(shape_numel(new_shape) == x.numel(),
        "reshape: " + shape_str(x.shape()) + " has " + std::to_string(x.numel()) + " elements, target " +
            shape_str(new_shape) + " has " + std::to_string(shape_numel(new_shape)));
  Tensor out = Tensor::from_vector(std::move(new_shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (detail::should_record({&x})) {
    out.set_requires_grad(true);
    Tape::current()->record(out, [x, out]() { detail::accum_flat(x, out.grad()); });
  }
  return out;
}

// Per-sample, per-channel spatial mean and standard deviation of an NCHW
// tensor, each shaped [N,C,1,1]. Population variance; sigma = sqrt(var+eps).
inline std::pair<Tensor, Tensor> channel_stats(const Tensor& x, double eps = kDefaultEps) {
  check(x.rank() == 4, "channel_stats expects NCHW input, got " + shape_str(x.shape()));
  const int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t hw = H * W;
  const double inv_hw = 1.0 / static_cast<double>(hw);
  Tensor mean = Tensor::zeros({N, C, 1, 1});
  Tensor stdev = Tensor::zeros({N, C, 1, 1});
  auto xv = x.data();
  auto mv = mean.mut_data();
  auto sv = stdev.mut_data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* px = xv.data() + nc * hw;
    double m = 0.0;
    for (int64_t i = 0; i < hw; ++i) m += px[i];
    m *= inv_hw;
    double var = 0.0;
    for (int64_t i = 0; i < hw; ++i) {
      double d = px[i] - m;
      var += d * d;
    }
    var *= inv_hw;
    mv[nc] = m;
    sv[nc] = std::sqrt(var + eps);
  }
  if (detail::should_record({&x})) {
    mean.set_requires_grad(true);
    stdev.set_requires_grad(true);
    Tape* tape = Tape::current();
    // Independent contributions, so mean and std get separate nodes and
    // either can be dropped from the graph without touching the other.
    tape->record(mean, [x, mean, inv_hw, hw]() {
      auto g = mean.grad();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t nc = 0; nc < mean.numel(); ++nc) {
        double gm = g[nc] * inv_hw;
        double* pg = gx.data() + nc * hw;
        for (int64_t i = 0; i < hw; ++i) pg[i] += gm;
      }
    });
    tape->record(stdev, [x, mean, stdev, inv_hw, hw]() {
      auto g = stdev.grad();
      auto xv2 = x.data();
      auto mv2 = mean.data();
      auto sv2 = stdev.data();
      Tensor xt = x;
      auto& gx = xt.grad_buffer();
      for (int64_t nc = 0; nc < stdev.numel(); ++nc) {
        double coef = g[nc] * inv_hw / sv2[nc];
        const double* px = xv2.data() + nc * hw;
        double* pg = gx.data() + nc * hw;
        for (int64_t i = 0; i < hw; ++i) pg[i] += coef * (px[i] - mv2[nc]);
      }
    });
  }
  return {mean, stdev};
}

}  // namespace din
