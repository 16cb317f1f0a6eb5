#pragma once

// Reverse-mode differentiation over matrices.
//
// A Tape records every op applied to its Vars. Parameter leaves alias the
// parameter's value and accumulate straight into Parameter::grad, so a tape
// never copies weights. Ops whose inputs need no gradient store no backward
// closure, which makes a tape with gradients disabled a plain forward pass.
//
// Every op output is checked for NaN/Inf.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tgsample/error.hpp"
#include "tgsample/nn/params.hpp"
#include "tgsample/nn/tensor.hpp"

namespace tgsample::nn {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  [[nodiscard]] bool grad_enabled() const { return grad_enabled_; }

  Var constant(Tensor value) {
    auto& n = nodes_.emplace_back();
    n.own = std::move(value);
    return {this, nodes_.size() - 1};
  }

  Var param(Parameter& p) {
    auto& n = nodes_.emplace_back();
    n.param = &p;
    n.requires_grad = grad_enabled_ && p.trainable;
    return {this, nodes_.size() - 1};
  }

  [[nodiscard]] const Tensor& value(Var v) const {
    const auto& n = nodes_[v.id];
    return n.param ? n.param->value : n.own;
  }

  [[nodiscard]] bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient buffer of `v`, allocated on first use.
  Tensor& grad(Var v) {
    auto& n = nodes_[v.id];
    if (n.param) {
      n.param->has_grad = true;
      return n.param->grad;
    }
    if (n.grad.data.empty()) n.grad = Tensor(n.own.shape, 0.0);
    return n.grad;
  }

  [[nodiscard]] bool has_grad(Var v) const { return !nodes_[v.id].grad.data.empty(); }

  /// Backward closures receive the op's output value and its gradient.
  using Backward = std::function<void(const Tensor& out, const Tensor& out_grad)>;

  /// Records an op result. `inputs` decide whether the backward closure is kept.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
    return record_impl(std::move(value), any_requires(inputs), std::move(backward));
  }
  Var record(Tensor value, std::span<const Var> inputs, Backward backward) {
    bool req = false;
    for (const auto& v : inputs) req = req || nodes_[v.id].requires_grad;
    return record_impl(std::move(value), req, std::move(backward));
  }

  /// Seeds d(root)/d(root) = 1 and runs every closure in reverse order.
  void backward(Var root) {
    require(value(root).size() == 1, ErrorCode::ShapeMismatch, "backward root must be a scalar");
    if (!nodes_[root.id].requires_grad) return;
    grad(root).data[0] += 1.0;
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (n.backward && !n.grad.data.empty()) n.backward(n.own, n.grad);
    }
  }

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor own;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  bool any_requires(std::initializer_list<Var> inputs) const {
    for (const auto& v : inputs) {
      if (nodes_[v.id].requires_grad) return true;
    }
    return false;
  }

  Var record_impl(Tensor value, bool req, Backward backward) {
    if (!value.all_finite()) fail(ErrorCode::NonFinite, "op produced a non-finite value");
    auto& n = nodes_.emplace_back();
    n.own = std::move(value);
    n.requires_grad = req;
    if (req) n.backward = std::move(backward);
    return {this, nodes_.size() - 1};
  }

  std::deque<Node> nodes_;
  bool grad_enabled_;
};

inline const Tensor& val(Var v) { return v.tape->value(v); }

namespace detail {

/// Shape check; the message is only built on failure.
template <typename Msg>
inline void check(bool cond, Msg&& what) {
  if (!cond) fail(ErrorCode::ShapeMismatch, what());
}

inline std::string dims(const Tensor& t) { return shape_string({t.rows(), t.cols()}); }

// C[n,m] (+)= A[n,k] * B[k,m]
inline void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      const double* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += s * bp[j];
    }
  }
}

// C[n,k] += G[n,m] * B[k,m]^T
inline void gemm_nt(const double* g, const double* b, double* c, std::size_t n, std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* gi = g + i * m;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * m;
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += gi[j] * bp[j];
      ci[p] += s;
    }
  }
}

// C[k,m] += A[n,k]^T * G[n,m]
inline void gemm_tn(const double* a, const double* g, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ai[p];
      if (s == 0.0) continue;
      double* cp = c + p * m;
      for (std::size_t j = 0; j < m; ++j) cp[j] += s * gi[j];
    }
  }
}

}  // namespace detail


}  // namespace tgsample::nn
