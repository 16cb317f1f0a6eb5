#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tgsample/nn/autodiff.hpp"

namespace tgsample::nn {

namespace detail {

inline void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

/// A[n,k] * B[k,m]
inline Var matmul(Var a, Var b) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  const auto& B = val(b);
  const auto n = A.rows(), k = A.cols(), m = B.cols();
  detail::check(B.rows() == k, [&] { return std::string("matmul " + detail::dims(A) + " x " + detail::dims(B)); });
  Tensor out(n, m);
  detail::gemm_nn(A.data.data(), B.data.data(), out.data.data(), n, k, m);
  return tape.record(std::move(out), {a, b}, [&tape, a, b, n, k, m](const Tensor&, const Tensor& g) {
    if (tape.requires_grad(a)) detail::gemm_nt(g.data.data(), val(b).data.data(), tape.grad(a).data.data(), n, m, k);
    if (tape.requires_grad(b)) detail::gemm_tn(val(a).data.data(), g.data.data(), tape.grad(b).data.data(), n, k, m);
  });
}

/// x[n,d_in] * W[d_in,d_out] + b[1,d_out]
inline Var linear(Var x, Var w, Var b) {
  auto& tape = *x.tape;
  const auto& X = val(x);
  const auto& W = val(w);
  const auto& B = val(b);
  const auto n = X.rows(), k = X.cols(), m = W.cols();
  detail::check(W.rows() == k && B.size() == m, [&] { return std::string("linear " + detail::dims(X) + " x " + detail::dims(W) + " + " + detail::dims(B)); });
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i) std::copy(B.data.begin(), B.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * m));
  detail::gemm_nn(X.data.data(), W.data.data(), out.data.data(), n, k, m);
  return tape.record(std::move(out), {x, w, b}, [&tape, x, w, b, n, k, m](const Tensor&, const Tensor& g) {
    if (tape.requires_grad(x)) detail::gemm_nt(g.data.data(), val(w).data.data(), tape.grad(x).data.data(), n, m, k);
    if (tape.requires_grad(w)) detail::gemm_tn(val(x).data.data(), g.data.data(), tape.grad(w).data.data(), n, k, m);
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
    }
  });
}

inline Var transpose(Var a) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  const auto n = A.rows(), m = A.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j * n + i] = A[i * m + j];
  return tape.record(std::move(out), {a}, [&tape, a, n, m](const Tensor&, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[j * n + i];
  });
}

inline Var reshape(Var a, std::size_t rows, std::size_t cols) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  detail::check(A.size() == rows * cols, [&] { return std::string("reshape " + detail::dims(A) + " to " + std::to_string(rows) + "x" + std::to_string(cols)); });
  Tensor out(rows, cols, A.data);
  return tape.record(std::move(out), {a}, [&tape, a](const Tensor&, const Tensor& g) {
    detail::add_into(tape.grad(a), g);
  });
}

// ---------------------------------------------------------------------------
// Elementwise

inline Var add(Var a, Var b) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  const auto& B = val(b);
  detail::check(A.rows() == B.rows() && A.cols() == B.cols(), [&] { return std::string("add " + detail::dims(A) + " + " + detail::dims(B)); });
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
  return tape.record(std::move(out), {a, b}, [&tape, a, b](const Tensor&, const Tensor& g) {
    if (tape.requires_grad(a)) detail::add_into(tape.grad(a), g);
    if (tape.requires_grad(b)) detail::add_into(tape.grad(b), g);
  });
}

inline Var sub(Var a, Var b) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  const auto& B = val(b);
  detail::check(A.rows() == B.rows() && A.cols() == B.cols(), [&] { return std::string("sub " + detail::dims(A) + " - " + detail::dims(B)); });
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
  return tape.record(std::move(out), {a, b}, [&tape, a, b](const Tensor&, const Tensor& g) {
    if (tape.requires_grad(a)) detail::add_into(tape.grad(a), g);
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

inline Var mul(Var a, Var b) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  const auto& B = val(b);
  detail::check(A.rows() == B.rows() && A.cols() == B.cols(), [&] { return std::string("mul " + detail::dims(A) + " * " + detail::dims(B)); });
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
  return tape.record(std::move(out), {a, b}, [&tape, a, b](const Tensor&, const Tensor& g) {
    if (tape.requires_grad(a)) {
      auto& ga = tape.grad(a);
      const auto& B = val(b);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad(b);
      const auto& A = val(a);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

inline Var scale(Var a, double s) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * s;
  return tape.record(std::move(out), {a}, [&tape, a, s](const Tensor&, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s;
  });
}

/// x[n,m] + b[1,m] broadcast over rows.
inline Var add_row(Var x, Var b) {
  auto& tape = *x.tape;
  const auto& X = val(x);
  const auto& B = val(b);
  const auto n = X.rows(), m = X.cols();
  detail::check(B.size() == m, [&] { return std::string("add_row " + detail::dims(X) + " + " + detail::dims(B)); });
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = X[i * m + j] + B[j];
  return tape.record(std::move(out), {x, b}, [&tape, x, b, n, m](const Tensor&, const Tensor& g) {
    if (tape.requires_grad(x)) detail::add_into(tape.grad(x), g);
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
    }
  });
}

/// x[n,m] + b[n,1] broadcast over columns.
inline Var add_col(Var x, Var b) {
  auto& tape = *x.tape;
  const auto& X = val(x);
  const auto& B = val(b);
  const auto n = X.rows(), m = X.cols();
  detail::check(B.size() == n, [&] { return std::string("add_col " + detail::dims(X) + " + " + detail::dims(B)); });
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = X[i * m + j] + B[i];
  return tape.record(std::move(out), {x, b}, [&tape, x, b, n, m](const Tensor&, const Tensor& g) {
    if (tape.requires_grad(x)) detail::add_into(tape.grad(x), g);
    if (tape.requires_grad(b)) {
      auto& gb = tape.grad(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[i] += g[i * m + j];
    }
  });
}

inline Var relu(Var a) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] > 0.0 ? A[i] : 0.0;
  return tape.record(std::move(out), {a}, [&tape, a](const Tensor& y, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (y[i] > 0.0) ga[i] += g[i];
    }
  });
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline Var sigmoid(Var a) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(A[i]);
  return tape.record(std::move(out), {a}, [&tape, a](const Tensor& y, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

/// Elementwise -log(sigmoid(x)) = softplus(-x); the RankNet pair loss.
inline Var neg_log_sigmoid(Var a) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus(-A[i]);
  return tape.record(std::move(out), {a}, [&tape, a](const Tensor&, const Tensor& g) {
    auto& ga = tape.grad(a);
    const auto& A = val(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= g[i] * sigmoid(-A[i]);
  });
}

// ---------------------------------------------------------------------------
// Structure

inline Var concat_cols(std::span<const Var> parts) {
  detail::check(!parts.empty(), [&] { return std::string("concat_cols of nothing"); });
  auto& tape = *parts[0].tape;
  const auto n = val(parts[0]).rows();
  std::size_t m = 0;
  for (const auto& p : parts) {
    detail::check(val(p).rows() == n, [&] { return std::string("concat_cols row mismatch"); });
    m += val(p).cols();
  }
  Tensor out(n, m);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& P = val(p);
    const auto w = P.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * m + off + j] = P[i * w + j];
    off += w;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [&tape, inputs, n, m](const Tensor&, const Tensor& g) {
    std::size_t off = 0;
    for (const auto& p : inputs) {
      const auto w = val(p).cols();
      if (tape.requires_grad(p)) {
        auto& gp = tape.grad(p);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * m + off + j];
      }
      off += w;
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var concat_rows(std::span<const Var> parts) {
  detail::check(!parts.empty(), [&] { return std::string("concat_rows of nothing"); });
  auto& tape = *parts[0].tape;
  const auto m = val(parts[0]).cols();
  std::size_t n = 0;
  for (const auto& p : parts) {
    detail::check(val(p).cols() == m, [&] { return std::string("concat_rows column mismatch"); });
    n += val(p).rows();
  }
  Tensor out(n, m);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& P = val(p);
    std::copy(P.data.begin(), P.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += P.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [&tape, inputs](const Tensor&, const Tensor& g) {
    std::size_t off = 0;
    for (const auto& p : inputs) {
      const auto sz = val(p).size();
      if (tape.requires_grad(p)) {
        auto& gp = tape.grad(p);
        for (std::size_t i = 0; i < sz; ++i) gp[i] += g[off + i];
      }
      off += sz;
    }
  });
}

/// Rows `ids` of a[n,m], in order (repeats allowed).
inline Var gather_rows(Var a, std::vector<std::size_t> ids) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  const auto m = A.cols();
  Tensor out(ids.size(), m);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    detail::check(ids[r] < A.rows(), [&] { return std::string("gather_rows index " + std::to_string(ids[r]) + " of " + detail::dims(A)); });
    std::copy_n(A.data.begin() + static_cast<std::ptrdiff_t>(ids[r] * m), m, out.data.begin() + static_cast<std::ptrdiff_t>(r * m));
  }
  return tape.record(std::move(out), {a}, [&tape, a, ids = std::move(ids), m](const Tensor&, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (std::size_t r = 0; r < ids.size(); ++r)
      for (std::size_t j = 0; j < m; ++j) ga[ids[r] * m + j] += g[r * m + j];
  });
}

/// x[1,m] repeated into n rows.
inline Var repeat_rows(Var x, std::size_t n) {
  auto& tape = *x.tape;
  const auto& X = val(x);
  detail::check(X.rows() == 1, [&] { return std::string("repeat_rows needs a single row, got " + detail::dims(X)); });
  const auto m = X.cols();
  Tensor out(n, m);
  for (std::size_t i = 0; i < n; ++i) std::copy(X.data.begin(), X.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * m));
  return tape.record(std::move(out), {x}, [&tape, x, n, m](const Tensor&, const Tensor& g) {
    auto& gx = tape.grad(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) gx[j] += g[i * m + j];
  });
}

// ---------------------------------------------------------------------------
// Reductions

inline Var sum(Var a) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  double s = 0.0;
  for (const double v : A.data) s += v;
  return tape.record(Tensor::scalar(s), {a}, [&tape, a](const Tensor&, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (auto& v : ga.data) v += g[0];
  });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(val(a).size())); }

/// Column means of a[n,m] -> [1,m].
inline Var mean_rows(Var a) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  const auto n = A.rows(), m = A.cols();
  detail::check(n > 0, [&] { return std::string("mean_rows of empty tensor"); });
  Tensor out(1, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += A[i * m + j];
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : out.data) v *= inv;
  return tape.record(std::move(out), {a}, [&tape, a, n, m, inv](const Tensor&, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) ga[i * m + j] += g[j] * inv;
  });
}

/// a[blocks*n, d] -> [n, d], averaging row r of every block.
inline Var mean_row_blocks(Var a, std::size_t blocks) {
  auto& tape = *a.tape;
  const auto& A = val(a);
  detail::check(blocks > 0 && A.rows() % blocks == 0, [&] { return std::string("mean_row_blocks " + detail::dims(A) + " into " + std::to_string(blocks)); });
  const auto n = A.rows() / blocks, d = A.cols();
  Tensor out(n, d);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t i = 0; i < n * d; ++i) out[i] += A[b * n * d + i];
  const double inv = 1.0 / static_cast<double>(blocks);
  for (auto& v : out.data) v *= inv;
  return tape.record(std::move(out), {a}, [&tape, a, blocks, n, d, inv](const Tensor&, const Tensor& g) {
    auto& ga = tape.grad(a);
    for (std::size_t b = 0; b < blocks; ++b)
      for (std::size_t i = 0; i < n * d; ++i) ga[b * n * d + i] += g[i] * inv;
  });
}

/// Softmax over all entries of a column vector x[s,1].
inline Var softmax_col(Var x) {
  auto& tape = *x.tape;
  const auto& X = val(x);
  detail::check(X.cols() == 1 && X.rows() > 0, [&] { return std::string("softmax_col needs a non-empty column, got " + detail::dims(X)); });
  const double mx = *std::max_element(X.data.begin(), X.data.end());
  Tensor out(X.rows(), 1);
  double z = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) z += (out[i] = std::exp(X[i] - mx));
  for (auto& v : out.data) v /= z;
  return tape.record(std::move(out), {x}, [&tape, x](const Tensor& y, const Tensor& g) {
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
    auto& gx = tape.grad(x);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] += y[i] * (g[i] - dot);
  });
}

// ---------------------------------------------------------------------------
// Encodings and losses

/// Time2Vec: t[n,1] -> [n,d]; channel 0 is omega_0 t + b_0, channel i >= 1 is
/// sin(omega_i t + b_i).
inline Var time2vec(Var t, Var omega, Var phase) {
  auto& tape = *t.tape;
  const auto& T = val(t);
  const auto& W = val(omega);
  const auto& B = val(phase);
  const auto n = T.size(), d = W.size();
  require(d >= 2, ErrorCode::InvalidArgument, "time2vec needs at least 2 channels");
  detail::check(T.cols() == 1 && B.size() == d, [&] { return std::string("time2vec shapes " + detail::dims(T) + ", " + detail::dims(W) + ", " + detail::dims(B)); });
  Tensor out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    out[i * d] = W[0] * T[i] + B[0];
    for (std::size_t c = 1; c < d; ++c) out[i * d + c] = std::sin(W[c] * T[i] + B[c]);
  }
  return tape.record(std::move(out), {t, omega, phase}, [&tape, t, omega, phase, n, d](const Tensor&, const Tensor& g) {
    const auto& T = val(t);
    const auto& W = val(omega);
    const auto& B = val(phase);
    const bool gt = tape.requires_grad(t), gw = tape.requires_grad(omega), gb = tape.requires_grad(phase);
    Tensor* dT = gt ? &tape.grad(t) : nullptr;
    Tensor* dW = gw ? &tape.grad(omega) : nullptr;
    Tensor* dB = gb ? &tape.grad(phase) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) {
        const double gi = g[i * d + c];
        const double dz = c == 0 ? gi : gi * std::cos(W[c] * T[i] + B[c]);
        if (dT) (*dT)[i] += dz * W[c];
        if (dW) (*dW)[c] += dz * T[i];
        if (dB) (*dB)[c] += dz;
      }
    }
  });
}

inline constexpr double kProbEps = 1e-7;

inline double clamp_prob(double p) { return std::clamp(p, kProbEps, 1.0 - kProbEps); }

/// Summed binary cross-entropy over p[n,1] (or [1,n]) with labels in {0,1};
/// probabilities are clamped to [eps, 1-eps] and the clamp passes no gradient.
inline Var bce_loss(Var p, std::span<const double> labels) {
  auto& tape = *p.tape;
  const auto& P = val(p);
  detail::check(P.size() == labels.size(), [&] { return std::string("bce_loss: " + std::to_string(P.size()) + " probabilities for " +
                                               std::to_string(labels.size()) + " labels"); });
  double loss = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double y = labels[i];
    require(y == 0.0 || y == 1.0, ErrorCode::InvalidArgument, "bce_loss labels must be 0 or 1");
    const double q = clamp_prob(P[i]);
    loss -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
  }
  std::vector<double> ys(labels.begin(), labels.end());
  return tape.record(Tensor::scalar(loss), {p}, [&tape, p, ys = std::move(ys)](const Tensor&, const Tensor& g) {
    const auto& P = val(p);
    auto& gp = tape.grad(p);
    for (std::size_t i = 0; i < P.size(); ++i) {
      if (P[i] <= kProbEps || P[i] >= 1.0 - kProbEps) continue;
      gp[i] += g[0] * (-ys[i] / P[i] + (1.0 - ys[i]) / (1.0 - P[i]));
    }
  });
}

}  // namespace tgsample::nn
