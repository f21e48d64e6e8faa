#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "din/errors.hpp"
#include "din/rng.hpp"

namespace din {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

// Dense N-d array of doubles, row-major, canonical image layout NCHW.
// Copying a Tensor copies the handle; the payload is shared and treated
// as immutable once it participates in a taped computation. The grad
// buffer is allocated lazily and accumulates additively until zeroed.
class Tensor {
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
  };

 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return from_data(std::move(shape), {}, requires_grad, 0.0);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    return from_data(std::move(shape), {}, requires_grad, value);
  }

  static Tensor scalar(double v) {
    Tensor t = zeros({1});
    t.impl_->data[0] = v;
    return t;
  }

  static Tensor from_vector(Shape shape, std::vector<double> values, bool requires_grad = false) {
    check(shape_numel(shape) == static_cast<int64_t>(values.size()),
          "tensor data length " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
    for (int64_t d : shape) check(d > 0, "tensor dimensions must be positive, got " + shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(values);
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0, bool requires_grad = false) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.impl_->data) v = stddev * rng.normal();
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  size_t rank() const { return impl_->shape.size(); }
  int64_t dim(size_t i) const { return impl_->shape[i]; }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  std::span<const double> data() const { return impl_->data; }
  // In-place mutation is reserved for parameter updates and I/O staging,
  // never for tensors that already sit on a tape.
  std::span<double> mut_data() { return impl_->data; }

  double value() const {
    check(numel() == 1, "value() requires a single-element tensor, shape is " + shape_str(shape()));
    return impl_->data[0];
  }

  double at(int64_t n, int64_t c, int64_t h, int64_t w) const {
    const Shape& s = impl_->shape;
    return impl_->data[((n * s[1] + c) * s[2] + h) * s[3] + w];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool b) {
    impl_->requires_grad = b;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }

  std::vector<double>& grad_buffer() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
    return impl_->grad;
  }

  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  }

  // Deep copy of values only (fresh storage, no grad).
  Tensor clone() const {
    return from_vector(impl_->shape, impl_->data, false);
  }

  bool all_finite() const {
    for (double v : impl_->data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  const void* id() const { return impl_.get(); }

 private:
  static Tensor from_data(Shape shape, std::vector<double>, bool requires_grad, double fill) {
    for (int64_t d : shape) check(d > 0, "tensor dimensions must be positive, got " + shape_str(shape));
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->data.assign(static_cast<size_t>(shape_numel(shape)), fill);
    t.impl_->shape = std::move(shape);
    t.impl_->requires_grad = requires_grad;
    return t;
  }

  std::shared_ptr<Impl> impl_;
};

}  // namespace din
