#pragma once

// Trainable building blocks. Layers hold non-owning pointers into a
// ParamStore and are cheap to copy.

#include <string>
#include <vector>

#include "tgsample/nn/ops.hpp"
#include "tgsample/nn/params.hpp"

namespace tgsample::nn {

struct Linear {
  Parameter* weight = nullptr;  // [d_in, d_out]
  Parameter* bias = nullptr;    // [1, d_out]

  static Linear create(ParamStore& store, const std::string& name, std::size_t d_in, std::size_t d_out,
                       LinearInit init = LinearInit::InverseSqrtFanIn) {
    Linear l;
    l.weight = &store.add_linear_weight(name + ".weight", d_in, d_out, init);
    const double bound = init == LinearInit::InverseSqrtFanIn ? 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(d_in, 1)))
                                                              : std::sqrt(static_cast<double>(d_in));
    l.bias = &store.add_uniform(name + ".bias", {1, d_out}, bound);
    return l;
  }

  [[nodiscard]] std::size_t d_in() const { return weight->value.shape[0]; }
  [[nodiscard]] std::size_t d_out() const { return weight->value.shape[1]; }

  Var operator()(Tape& tape, Var x) const { return linear(x, tape.param(*weight), tape.param(*bias)); }

  void zero() const {
    weight->value.fill(0.0);
    bias->value.fill(0.0);
  }
};

/// Feed-forward stack; ReLU between layers, nothing after the last one.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp create(ParamStore& store, const std::string& name, const std::vector<std::size_t>& widths,
                    LinearInit init = LinearInit::InverseSqrtFanIn) {
    Mlp m;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      m.layers.push_back(Linear::create(store, name + "." + std::to_string(i), widths[i], widths[i + 1], init));
    }
    return m;
  }

  Var operator()(Tape& tape, Var x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](tape, x);
      if (i + 1 < layers.size()) x = relu(x);
    }
    return x;
  }
};

inline Var mlp_forward(Tape& tape, Var x, const Mlp& mlp) { return mlp(tape, x); }

struct Time2Vec {
  Parameter* omega = nullptr;  // [1, d]
  Parameter* phase = nullptr;  // [1, d]

  static Time2Vec create(ParamStore& store, const std::string& name, std::size_t d) {
    require(d >= 2, ErrorCode::InvalidArgument, "time2vec needs at least 2 channels");
    Time2Vec t;
    t.omega = &store.add_uniform(name + ".omega", {1, d}, 1.0);
    t.phase = &store.add_uniform(name + ".phase", {1, d}, 1.0);
    return t;
  }

  [[nodiscard]] std::size_t dim() const { return omega->value.size(); }

  Var operator()(Tape& tape, Var t) const { return time2vec(t, tape.param(*omega), tape.param(*phase)); }
};

/// One token-mixing MLP across the token axis and one channel-mixing MLP
/// across features, both residual, then a mean over tokens.
///
/// Tokens arrive as `m` blocks of shape [n, d]: n independent items (e.g.
/// candidate neighbors) mixed in one pass.
struct Mixer {
  std::size_t tokens = 0;
  std::size_t width = 0;
  Parameter* token_w1 = nullptr;  // [h_tok, m]
  Parameter* token_b1 = nullptr;  // [h_tok, 1]
  Parameter* token_w2 = nullptr;  // [m, h_tok]
  Parameter* token_b2 = nullptr;  // [m, 1]
  Linear channel1;                // d -> h_ch
  Linear channel2;                // h_ch -> d

  static Mixer create(ParamStore& store, const std::string& name, std::size_t tokens, std::size_t width,
                      std::size_t token_hidden, std::size_t channel_hidden,
                      LinearInit init = LinearInit::InverseSqrtFanIn) {
    Mixer mx;
    mx.tokens = tokens;
    mx.width = width;
    const auto b_tok = [&](std::size_t fan_in) {
      return init == LinearInit::InverseSqrtFanIn ? 1.0 / std::sqrt(static_cast<double>(fan_in))
                                                  : std::sqrt(static_cast<double>(fan_in));
    };
    mx.token_w1 = &store.add_uniform(name + ".token1.weight", {token_hidden, tokens}, b_tok(tokens));
    mx.token_b1 = &store.add_uniform(name + ".token1.bias", {token_hidden, 1}, b_tok(tokens));
    mx.token_w2 = &store.add_uniform(name + ".token2.weight", {tokens, token_hidden}, b_tok(token_hidden));
    mx.token_b2 = &store.add_uniform(name + ".token2.bias", {tokens, 1}, b_tok(token_hidden));
    mx.channel1 = Linear::create(store, name + ".channel1", width, channel_hidden, init);
    mx.channel2 = Linear::create(store, name + ".channel2", channel_hidden, width, init);
    return mx;
  }

  Var operator()(Tape& tape, std::span<const Var> blocks) const {
    require(blocks.size() == tokens, ErrorCode::ShapeMismatch,
            "mixer expects " + std::to_string(tokens) + " tokens, got " + std::to_string(blocks.size()));
    const auto n = val(blocks[0]).rows();
    for (const auto& b : blocks) {
      require(val(b).rows() == n && val(b).cols() == width, ErrorCode::ShapeMismatch,
              "mixer token of shape " + detail::dims(val(b)) + ", expected [" + std::to_string(n) + "," +
                  std::to_string(width) + "]");
    }
    // [m*n, d] viewed as [m, n*d]: row i holds token i of every item
    const Var stacked = reshape(concat_rows(blocks), tokens, n * width);
    const Var hidden = relu(add_col(matmul(tape.param(*token_w1), stacked), tape.param(*token_b1)));
    const Var token_mixed = add(stacked, add_col(matmul(tape.param(*token_w2), hidden), tape.param(*token_b2)));
    const Var rows = reshape(token_mixed, tokens * n, width);
    const Var channel_mixed = add(rows, channel2(tape, relu(channel1(tape, rows))));
    return mean_row_blocks(channel_mixed, tokens);
  }

  Var operator()(Tape& tape, std::initializer_list<Var> blocks) const {
    return (*this)(tape, std::span<const Var>(blocks.begin(), blocks.size()));
  }

  void zero_token_mixing() const {
    token_w1->value.fill(0.0);
    token_b1->value.fill(0.0);
    token_w2->value.fill(0.0);
    token_b2->value.fill(0.0);
  }
};

/// mixer_forward on a single item: tokens [m, d] -> [1, d].
inline Var mixer_forward(Tape& tape, Var tokens, const Mixer& mixer) {
  const auto m = val(tokens).rows();
  std::vector<Var> blocks;
  blocks.reserve(m);
  for (std::size_t i = 0; i < m; ++i) blocks.push_back(gather_rows(tokens, {i}));
  return mixer(tape, blocks);
}

}  // namespace tgsample::nn
