#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "din/tape.hpp"

namespace din {

struct GradCheckOpts {
  double rel_tol = 1e-4;
  double abs_tol = 1e-7;
  double small_grad = 1e-6;  // below this magnitude the absolute fallback applies
  double step_scale = 1e-5;  // h = step_scale * max(1, |x_i|)
};

struct GradCheckResult {
  bool passed = true;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;  // over fallback elements
  int64_t worst_index = -1;
  int64_t num_checked = 0;
  int64_t num_fallback = 0;
  int64_t num_failures = 0;
  int64_t num_nonfinite = 0;
};

// Compares the taped gradient of a scalar-valued function against central
// finite differences, element by element (optionally only at sampled
// indices). The function must be deterministic and must not depend on any
// ambient tape of its own.
inline GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& fn, const Tensor& x,
                                  GradCheckOpts opts = {}, const std::vector<int64_t>* sample = nullptr) {
  GradCheckResult res;

  Tensor probe = x.clone();
  probe.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = fn(probe);
    check(y.numel() == 1, "grad_check requires a scalar-valued function");
    tape.backward(y);
  }
  std::vector<double> analytic(static_cast<size_t>(x.numel()), 0.0);
  if (probe.has_grad()) {
    auto g = probe.grad();
    analytic.assign(g.begin(), g.end());
  }

  std::vector<int64_t> all;
  if (!sample) {
    all.resize(static_cast<size_t>(x.numel()));
    for (int64_t i = 0; i < x.numel(); ++i) all[i] = i;
    sample = &all;
  }

  for (int64_t idx : *sample) {
    const double xi = x.data()[idx];
    const double h = opts.step_scale * std::max(1.0, std::fabs(xi));
    Tensor xp = x.clone();
    xp.mut_data()[idx] = xi + h;
    Tensor xm = x.clone();
    xm.mut_data()[idx] = xi - h;
    const double fd = (fn(xp).value() - fn(xm).value()) / (2.0 * h);
    ++res.num_checked;
    if (!std::isfinite(fd)) {
      ++res.num_nonfinite;
      ++res.num_failures;
      res.passed = false;
      continue;
    }
    const double a = analytic[idx];
    const double diff = std::fabs(a - fd);
    if (std::fabs(a) < opts.small_grad && std::fabs(fd) < opts.small_grad) {
      ++res.num_fallback;
      if (diff > res.max_abs_err) res.max_abs_err = diff;
      if (diff > opts.abs_tol) {
        ++res.num_failures;
        res.passed = false;
        res.worst_index = idx;
      }
    } else {
      const double rel = diff / std::max(std::fabs(a), std::fabs(fd));
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_index = idx;
      }
      if (rel > opts.rel_tol) {
        ++res.num_failures;
        res.passed = false;
      }
    }
  }
  return res;
}

}  // namespace din
