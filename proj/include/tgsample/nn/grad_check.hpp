#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "tgsample/nn/autodiff.hpp"
#include "tgsample/nn/params.hpp"

namespace tgsample::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Scalar objective rebuilt from scratch on the given tape.
using Objective = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients with central finite differences for every
/// trainable entry of `store`:  |analytic - fd| / max(1, |analytic|).
/// `stride` > 1 samples every stride-th entry of large parameters.
inline GradCheckResult grad_check(const Objective& fn, ParamStore& store, double h = 1e-5, std::size_t stride = 1) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(fn(tape));
  }
  GradCheckResult result;
  for (auto& p : store.all()) {
    if (!p.trainable) continue;
    const Tensor analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); i += std::max<std::size_t>(1, p.value.size() > 64 ? stride : 1)) {
      const double orig = p.value[i];
      p.value[i] = orig + h;
      double plus = 0.0;
      {
        Tape tape(false);
        plus = val(fn(tape)).item();
      }
      p.value[i] = orig - h;
      double minus = 0.0;
      {
        Tape tape(false);
        minus = val(fn(tape)).item();
      }
      p.value[i] = orig;
      const double fd = (plus - minus) / (2.0 * h);
      require(std::isfinite(fd), ErrorCode::NonFinite, "finite difference for " + p.name);
      const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = p.name;
        result.worst_index = i;
      }
    }
  }
  store.zero_grad();
  return result;
}

}  // namespace tgsample::nn
