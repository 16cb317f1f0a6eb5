#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "tgsample/nn/grad_check.hpp"
#include "tgsample/nn/layers.hpp"

using namespace tgsample;
using namespace tgsample::nn;

namespace {

constexpr double kGradTol = 1e-4;

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(r, c);
  for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
  return t;
}

// weighted sum so every output entry gets a distinct upstream gradient
Var probe(Tape& tape, Var x, std::uint64_t seed = 99) {
  const auto& v = val(x);
  return sum(mul(x, tape.constant(random_tensor(v.rows(), v.cols(), seed))));
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

}  // namespace

TEST(Linear, IdentityWeightsReturnInput) {
  Tape tape;
  Tensor eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  const auto x = random_tensor(4, 3, 1);
  const auto out = linear(tape.constant(x), tape.constant(eye), tape.constant(Tensor(1, 3)));
  EXPECT_EQ(val(out).data, x.data);
}

TEST(Linear, HandArithmetic) {
  Tape tape;
  const auto out = linear(tape.constant(Tensor::row({1, 2})), tape.constant(Tensor::column({1, 1})),
                          tape.constant(Tensor::scalar(0.5)));
  EXPECT_DOUBLE_EQ(val(out).item(), 3.5);
}

TEST(Linear, BiasGradientCountsRows) {
  ParamStore store;
  auto& w = store.add_uniform("w", {3, 2}, 1.0);
  auto& b = store.add_constant("b", {1, 2}, 0.0);
  Tape tape;
  tape.backward(sum(linear(tape.constant(random_tensor(5, 3, 2)), tape.param(w), tape.param(b))));
  EXPECT_EQ(b.grad.data, (std::vector<double>{5.0, 5.0}));
}

TEST(Linear, ShapeMismatchAndNonFinite) {
  Tape tape;
  EXPECT_EQ(code_of([&] { linear(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 2)), tape.constant(Tensor(1, 2))); }),
            ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([&] {
              linear(tape.constant(Tensor::row({1e308, 1e308})), tape.constant(Tensor(2, 1, 10.0)),
                     tape.constant(Tensor::scalar(0)));
            }),
            ErrorCode::NonFinite);
}

TEST(Mlp, ZeroFinalLayerOutputsZero) {
  ParamStore store(3);
  const auto mlp = Mlp::create(store, "m", {4, 8, 8, 1});
  mlp.layers.back().zero();
  Tape tape;
  const auto out = mlp(tape, tape.constant(random_tensor(10, 4, 5)));
  for (const double v : val(out).data) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, SingleLayerIsLinear) {
  ParamStore store(3);
  const auto mlp = Mlp::create(store, "m", {4, 2});
  Tape tape;
  const auto x = tape.constant(random_tensor(3, 4, 6));
  const auto a = val(mlp(tape, x));
  const auto b = val(linear(x, tape.param(*mlp.layers[0].weight), tape.param(*mlp.layers[0].bias)));
  EXPECT_EQ(a.data, b.data);
}

// A small MLP can represent the rank polynomial whose maxima sit at ranks 1, 2
// and k+1; inputs and targets are rescaled to unit range for training.
TEST(Mlp, FitsRankPolynomial) {
  constexpr std::size_t k = 5;
  constexpr std::size_t n = 32;
  auto poly = [](double x) {
    const double a = (x - 1) * (x - 2) * (x - static_cast<double>(k + 1));
    return -a * a;
  };
  std::vector<double> xs(n), ys(n);
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = static_cast<double>(i + 1);
    ys[i] = poly(xs[i]);
    lo = std::min(lo, ys[i]);
    hi = std::max(hi, ys[i]);
  }
  const double range = hi - lo;
  Tensor x(n, 1), y(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = xs[i] / static_cast<double>(n);
    y[i] = (ys[i] - lo) / range;
  }
  ParamStore store(11);
  const auto mlp = Mlp::create(store, "fit", {1, 32, 32, 1});
  for (int step = 0; step < 4000; ++step) {
    Tape tape;
    const auto err = sub(mlp(tape, tape.constant(x)), tape.constant(y));
    tape.backward(sum(mul(err, err)));
    adam_step(store, {.lr = 0.01});
  }
  Tape tape(false);
  const auto pred = val(mlp(tape, tape.constant(x)));
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(pred[i] - y[i]));
  EXPECT_LT(worst, 0.1);
}

TEST(Time2Vec, ZeroPhaseAtZeroTime) {
  ParamStore store(1);
  const auto t2v = Time2Vec::create(store, "t", 6);
  t2v.phase->value.fill(0.0);
  Tape tape;
  const auto out = t2v(tape, tape.constant(Tensor::column({0.0})));
  for (const double v : val(out).data) EXPECT_EQ(v, 0.0);
}

TEST(Time2Vec, PeriodicChannels) {
  ParamStore store(2);
  const auto t2v = Time2Vec::create(store, "t", 5);
  Tape tape;
  const double t0 = 0.37;
  const auto base = val(t2v(tape, tape.constant(Tensor::column({t0}))));
  for (std::size_t c = 1; c < 5; ++c) {
    const double period = 2.0 * std::numbers::pi / t2v.omega->value[c];
    const auto shifted = val(t2v(tape, tape.constant(Tensor::column({t0 + period}))));
    EXPECT_LT(std::abs(shifted[c] - base[c]), 1e-9);
  }
  EXPECT_NEAR(base[0], t2v.omega->value[0] * t0 + t2v.phase->value[0], 1e-15);
}

TEST(Time2Vec, OmegaGradientIsCosine) {
  ParamStore store(3);
  const auto t2v = Time2Vec::create(store, "t", 4);
  t2v.phase->value.fill(0.0);
  Tape tape;
  tape.backward(sum(t2v(tape, tape.constant(Tensor::column({1.0})))));
  for (std::size_t c = 1; c < 4; ++c) EXPECT_NEAR(t2v.omega->grad[c], std::cos(t2v.omega->value[c]), 1e-12);
  EXPECT_DOUBLE_EQ(t2v.omega->grad[0], 1.0);
}

TEST(Time2Vec, RejectsSingleChannel) {
  ParamStore store;
  EXPECT_EQ(code_of([&] { Time2Vec::create(store, "t", 1); }), ErrorCode::InvalidArgument);
}

TEST(Mixer, ZeroTokenMixingOnIdenticalTokensIsChannelMlp) {
  ParamStore store(4);
  const auto mx = Mixer::create(store, "mx", 3, 6, 4, 5);
  mx.zero_token_mixing();
  Tape tape;
  const auto token = tape.constant(random_tensor(1, 6, 8));
  const auto out = val(mx(tape, {token, token, token}));
  const auto expect = val(add(token, mx.channel2(tape, relu(mx.channel1(tape, token)))));
  ASSERT_EQ(out.size(), expect.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expect[i], 1e-14);
}

TEST(Mixer, TokenOrderMatters) {
  ParamStore store(5);
  const auto mx = Mixer::create(store, "mx", 2, 4, 3, 4);
  Tape tape;
  const auto a = tape.constant(random_tensor(1, 4, 1));
  const auto b = tape.constant(random_tensor(1, 4, 2));
  EXPECT_NE(val(mx(tape, {a, b})).data, val(mx(tape, {b, a})).data);
}

TEST(Mixer, BatchedItemsAreIndependent) {
  ParamStore store(6);
  const auto mx = Mixer::create(store, "mx", 2, 4, 3, 4);
  Tape tape;
  const auto a = random_tensor(5, 4, 1);
  const auto b = random_tensor(5, 4, 2);
  const auto batched = val(mx(tape, {tape.constant(a), tape.constant(b)}));
  for (std::size_t r = 0; r < 5; ++r) {
    const auto single =
        val(mx(tape, {gather_rows(tape.constant(a), {r}), gather_rows(tape.constant(b), {r})}));
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(batched.at(r, c), single[c], 1e-14);
  }
}

TEST(Mixer, SingleItemForm) {
  ParamStore store(6);
  const auto mx = Mixer::create(store, "mx", 2, 4, 3, 4);
  Tape tape;
  const auto tokens = tape.constant(random_tensor(2, 4, 3));
  const auto a = val(mixer_forward(tape, tokens, mx));
  const auto b = val(mx(tape, {gather_rows(tokens, {0}), gather_rows(tokens, {1})}));
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(code_of([&] { mx(tape, {gather_rows(tokens, {0})}); }), ErrorCode::ShapeMismatch);
}

TEST(Mixer, GradientsMatchFiniteDifferences) {
  ParamStore store(7);
  const auto mx = Mixer::create(store, "mx", 3, 5, 4, 6);
  auto& a = store.add_uniform("a", {4, 5}, 1.0);
  auto& b = store.add_uniform("b", {4, 5}, 1.0);
  auto& c = store.add_uniform("c", {4, 5}, 1.0);
  const auto r = grad_check([&](Tape& t) { return probe(t, mx(t, {t.param(a), t.param(b), t.param(c)})); }, store);
  EXPECT_LT(r.max_rel_error, kGradTol) << r.worst_param << "[" << r.worst_index << "]";
}

TEST(Bce, HandValues) {
  Tape tape;
  const std::vector<double> one{1.0};
  EXPECT_NEAR(val(bce_loss(tape.constant(Tensor::scalar(0.5)), one)).item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(val(bce_loss(tape.constant(Tensor::scalar(1.0 - kProbEps)), one)).item(), kProbEps, 1e-12);
  const std::vector<double> both{1.0, 0.0};
  EXPECT_NEAR(val(bce_loss(tape.constant(Tensor::column({0.5, 0.5})), both)).item(), 2.0 * std::log(2.0), 1e-15);
}

TEST(Bce, ClampsSaturatedProbabilities) {
  Tape tape;
  const std::vector<double> zero{0.0};
  EXPECT_NEAR(val(bce_loss(tape.constant(Tensor::scalar(1.0)), zero)).item(), -std::log(kProbEps), 1e-6);
}

TEST(Bce, RejectsNonBinaryLabels) {
  Tape tape;
  const std::vector<double> half{0.5};
  EXPECT_EQ(code_of([&] { bce_loss(tape.constant(Tensor::scalar(0.5)), half); }), ErrorCode::InvalidArgument);
}

TEST(Adam, FirstStepByHand) {
  ParamStore store;
  auto& w = store.add_constant("w", {1, 1}, 0.0);
  w.grad[0] = 1.0;
  w.has_grad = true;
  adam_step(store, {.lr = 0.1});
  EXPECT_NEAR(w.value[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_EQ(w.grad[0], 0.0);
}

TEST(Adam, ZeroGradientLeavesValue) {
  ParamStore store;
  auto& w = store.add_constant("w", {1, 3}, 0.25);
  w.has_grad = true;
  adam_step(store, {.lr = 0.1});
  EXPECT_EQ(w.value.data, (std::vector<double>(3, 0.25)));
}

TEST(Adam, IdenticalParametersStayIdentical) {
  ParamStore store;
  auto& a = store.add_constant("a", {2, 2}, 0.5);
  auto& b = store.add_constant("b", {2, 2}, 0.5);
  for (int step = 0; step < 20; ++step) {
    Tape tape;
    tape.backward(add(probe(tape, tape.param(a), 3), probe(tape, tape.param(b), 3)));
    adam_step(store, {.lr = 0.05});
  }
  EXPECT_EQ(a.value.data, b.value.data);
  EXPECT_NE(a.value[0], 0.5);
}

TEST(Adam, MissingGradientsAndFrozenParameters) {
  ParamStore store;
  auto& a = store.add_constant("frozen.a", {1, 1}, 1.0);
  auto& b = store.add_constant("b", {1, 1}, 1.0);
  EXPECT_EQ(code_of([&] { adam_step(store); }), ErrorCode::MissingGradient);
  store.set_trainable("frozen.", false);
  Tape tape;
  tape.backward(add(sum(tape.param(a)), sum(tape.param(b))));
  EXPECT_FALSE(a.has_grad);
  adam_step(store, {.lr = 0.1});
  EXPECT_EQ(a.value[0], 1.0);
  EXPECT_LT(b.value[0], 1.0);
}

TEST(GradCheck, QuadraticIsExact) {
  ParamStore store(1);
  auto& w = store.add_uniform("w", {3, 3}, 2.0);
  const auto r = grad_check([&](Tape& t) { return sum(mul(t.param(w), t.param(w))); }, store);
  EXPECT_LT(r.max_rel_error, 1e-9);
  EXPECT_EQ(r.checked, 9u);
}

TEST(GradCheck, EveryOp) {
  ParamStore store(21);
  auto& a = store.add_uniform("a", {4, 3}, 1.0);
  auto& b = store.add_uniform("b", {3, 5}, 1.0);
  auto& c = store.add_uniform("c", {4, 3}, 1.0);
  auto& row = store.add_uniform("row", {1, 3}, 1.0);
  auto& col = store.add_uniform("col", {4, 1}, 1.0);
  auto& t = store.add_uniform("t", {4, 1}, 2.0);
  auto& om = store.add_uniform("om", {1, 4}, 1.0);
  auto& ph = store.add_uniform("ph", {1, 4}, 1.0);
  const std::vector<std::pair<const char*, Objective>> cases = {
      {"matmul", [&](Tape& tp) { return probe(tp, matmul(tp.param(a), tp.param(b))); }},
      {"linear", [&](Tape& tp) { return probe(tp, linear(tp.param(a), tp.param(b), tp.constant(random_tensor(1, 5, 4)))); }},
      {"transpose", [&](Tape& tp) { return probe(tp, transpose(tp.param(a))); }},
      {"reshape", [&](Tape& tp) { return probe(tp, reshape(tp.param(a), 2, 6)); }},
      {"add_sub_mul", [&](Tape& tp) { return probe(tp, mul(sub(tp.param(a), tp.param(c)), add(tp.param(a), tp.param(c)))); }},
      {"scale", [&](Tape& tp) { return probe(tp, scale(tp.param(a), -2.5)); }},
      {"add_row", [&](Tape& tp) { return probe(tp, add_row(tp.param(a), tp.param(row))); }},
      {"add_col", [&](Tape& tp) { return probe(tp, add_col(tp.param(a), tp.param(col))); }},
      {"relu", [&](Tape& tp) { return probe(tp, relu(tp.param(a))); }},
      {"sigmoid", [&](Tape& tp) { return probe(tp, sigmoid(tp.param(a))); }},
      {"neg_log_sigmoid", [&](Tape& tp) { return probe(tp, neg_log_sigmoid(scale(tp.param(a), 8.0))); }},
      {"concat_cols", [&](Tape& tp) { return probe(tp, concat_cols({tp.param(a), tp.param(col), tp.param(c)})); }},
      {"concat_rows", [&](Tape& tp) {
         const std::vector<Var> parts{tp.param(a), tp.param(row), tp.param(c)};
         return probe(tp, concat_rows(parts));
       }},
      {"gather_rows", [&](Tape& tp) { return probe(tp, gather_rows(tp.param(a), {3, 0, 3, 1})); }},
      {"repeat_rows", [&](Tape& tp) { return probe(tp, repeat_rows(tp.param(row), 5)); }},
      {"mean", [&](Tape& tp) { return mean(mul(tp.param(a), tp.param(a))); }},
      {"mean_rows", [&](Tape& tp) { return probe(tp, mean_rows(tp.param(a))); }},
      {"mean_row_blocks", [&](Tape& tp) { return probe(tp, mean_row_blocks(tp.param(a), 2)); }},
      {"softmax_col", [&](Tape& tp) { return probe(tp, softmax_col(tp.param(col))); }},
      {"time2vec", [&](Tape& tp) { return probe(tp, time2vec(tp.param(t), tp.param(om), tp.param(ph))); }},
      {"bce", [&](Tape& tp) {
         const std::vector<double> y{1, 0, 0, 1};
         return bce_loss(sigmoid(tp.param(col)), y);
       }},
  };
  for (const auto& [name, fn] : cases) {
    const auto r = grad_check(fn, store);
    EXPECT_LT(r.max_rel_error, kGradTol) << name << ": " << r.worst_param << "[" << r.worst_index << "]";
  }
}

TEST(Tape, NoGradTapeStoresNoClosures) {
  ParamStore store(1);
  auto& w = store.add_uniform("w", {2, 2}, 1.0);
  Tape tape(false);
  const auto out = sum(mul(tape.param(w), tape.param(w)));
  EXPECT_FALSE(tape.requires_grad(out));
  tape.backward(out);
  EXPECT_FALSE(w.has_grad);
}

TEST(Tape, ForwardIsDeterministic) {
  ParamStore a(9), b(9);
  const auto ma = Mlp::create(a, "m", {3, 7, 1});
  const auto mb = Mlp::create(b, "m", {3, 7, 1});
  Tape ta, tb;
  const auto x = random_tensor(6, 3, 1);
  EXPECT_EQ(val(ma(ta, ta.constant(x))).data, val(mb(tb, tb.constant(x))).data);
}

TEST(ParamStore, InitIsKeyedByName) {
  ParamStore a(4), b(4);
  a.add_uniform("first", {3, 3}, 1.0);
  const auto& pa = a.add_uniform("shared", {2, 2}, 1.0);
  const auto& pb = b.add_uniform("shared", {2, 2}, 1.0);
  EXPECT_EQ(pa.value.data, pb.value.data);
  EXPECT_EQ(code_of([&] { a.add("shared", {1}); }), ErrorCode::InvalidArgument);
}

TEST(ParamStore, NodeTableIsStandardNormal) {
  ParamStore store(8);
  const auto& m = store.add_normal("M", {200, 50});
  double s = 0.0, s2 = 0.0;
  for (const double v : m.value.data) {
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(m.value.size());
  EXPECT_NEAR(s / n, 0.0, 0.05);
  EXPECT_NEAR(s2 / n, 1.0, 0.05);
}

TEST(ParamStore, LinearInitBounds) {
  ParamStore store(8);
  const auto& w = store.add_linear_weight("w", 16, 64, LinearInit::InverseSqrtFanIn);
  const auto& literal = store.add_linear_weight("v", 16, 64, LinearInit::SqrtFanIn);
  double wmax = 0.0, vmax = 0.0;
  for (const double x : w.value.data) wmax = std::max(wmax, std::abs(x));
  for (const double x : literal.value.data) vmax = std::max(vmax, std::abs(x));
  EXPECT_LE(wmax, 0.25);
  EXPECT_GT(wmax, 0.2);
  EXPECT_LE(vmax, 4.0);
  EXPECT_GT(vmax, 3.0);
}

TEST(Checkpoint, RoundTripF64IsExact) {
  const auto base = (std::filesystem::temp_directory_path() / "tgsample_ckpt64").string();
  ParamStore a(1);
  Mlp::create(a, "m", {3, 4, 1});
  a.add_normal("M", {5, 2});
  save_checkpoint(a, base);
  ParamStore b(2);
  Mlp::create(b, "m", {3, 4, 1});
  b.add_normal("M", {5, 2});
  load_checkpoint(b, base);
  for (std::size_t i = 0; i < a.all().size(); ++i) EXPECT_EQ(a.all()[i].value.data, b.all()[i].value.data);
}

TEST(Checkpoint, F32RoundsToFloat) {
  const auto base = (std::filesystem::temp_directory_path() / "tgsample_ckpt32").string();
  ParamStore a(1);
  auto& p = a.add_normal("p", {4, 4});
  save_checkpoint(a, base, Dtype::F32);
  ParamStore b;
  auto& q = b.add("p", {4, 4});
  load_checkpoint(b, base);
  for (std::size_t i = 0; i < p.value.size(); ++i) EXPECT_EQ(q.value[i], static_cast<double>(static_cast<float>(p.value[i])));
}

TEST(Checkpoint, MismatchErrors) {
  const auto base = (std::filesystem::temp_directory_path() / "tgsample_ckpt_mm").string();
  ParamStore a;
  a.add("p", {2, 2});
  save_checkpoint(a, base);
  ParamStore wrong_shape;
  wrong_shape.add("p", {2, 3});
  EXPECT_EQ(code_of([&] { load_checkpoint(wrong_shape, base); }), ErrorCode::CheckpointMismatch);
  ParamStore extra;
  extra.add("p", {2, 2});
  extra.add("q", {1, 1});
  EXPECT_EQ(code_of([&] { load_checkpoint(extra, base); }), ErrorCode::CheckpointMismatch);
  ParamStore unknown;
  unknown.add("r", {2, 2});
  EXPECT_EQ(code_of([&] { load_checkpoint(unknown, base); }), ErrorCode::CheckpointMismatch);
  EXPECT_EQ(code_of([&] { load_checkpoint(a, base + "_missing"); }), ErrorCode::CheckpointMismatch);
}
