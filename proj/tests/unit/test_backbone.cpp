#include <gtest/gtest.h>

#include <algorithm>

#include "tgsample/backbone.hpp"
#include "tgsample/nn/grad_check.hpp"

using namespace tgsample;

namespace {

struct Fixture {
  nn::ParamStore store{3};
  NodeEmbedding m;
  Backbone bb;
  std::vector<Event> events;

  Fixture(BackboneVariant variant, std::size_t d_edge = 2, std::size_t slots = 3, bool time_encoding = true) {
    m = NodeEmbedding::create(store, 20, 5);
    bb = Backbone::create(store, m, d_edge,
                          {.variant = variant, .d_z = 6, .d_time = 4, .time_encoding = time_encoding, .slots = slots});
    Rng rng(1);
    events.resize(50);
    for (auto& e : events) {
      e.edge_feat.resize(d_edge);
      for (auto& f : e.edge_feat) f = rng.normal();
    }
  }

  [[nodiscard]] EdgeFeatures edges() const { return {events, events[0].edge_feat.size()}; }
};

SampledNeighborhood neighborhood(std::vector<NeighborRecord> recs, std::size_t k) {
  SampledNeighborhood s;
  s.slots = recs;
  s.valid.assign(recs.size(), true);
  s.slots.resize(k);
  s.valid.resize(k, false);
  s.scores.assign(k, 0.0);
  return s;
}

const std::vector<NeighborRecord> kRecs{{4, 1.0, 3}, {7, 2.5, 8}, {9, 4.0, 11}};

}  // namespace

TEST(Backbone, EmptyNeighborhoodIsDefaultVector) {
  for (const auto variant : {BackboneVariant::AttnLite, BackboneVariant::MixerLite}) {
    Fixture f(variant);
    nn::Tape tape;
    const auto z = f.bb.aggregate(tape, 1, 10.0, neighborhood({}, 3), f.edges());
    EXPECT_EQ(nn::val(z).data, f.bb.default_vector().value.data);
  }
}

TEST(Backbone, SingleSlotAttentionReturnsItsValue) {
  Fixture f(BackboneVariant::AttnLite);
  nn::Tape tape;
  const std::vector<NeighborRecord> one{kRecs[1]};
  const auto readout = nn::val(f.bb.attention_readout(tape, 1, 10.0, one, f.edges()));
  const auto feats = f.bb.slot_features(tape, 10.0, one, f.edges());
  const auto value = nn::val(nn::linear(feats, tape.param(f.store.get("backbone.attn.value.weight")),
                                        tape.param(f.store.get("backbone.attn.value.bias"))));
  ASSERT_EQ(readout.size(), value.size());
  for (std::size_t i = 0; i < value.size(); ++i) EXPECT_NEAR(readout[i], value[i], 1e-14);
}

TEST(Backbone, AttentionIsPermutationInvariantMixerIsNot) {
  auto permuted = kRecs;
  std::swap(permuted[0], permuted[2]);
  {
    Fixture f(BackboneVariant::AttnLite);
    nn::Tape tape;
    const auto a = nn::val(f.bb.aggregate(tape, 1, 10.0, neighborhood(kRecs, 3), f.edges()));
    const auto b = nn::val(f.bb.aggregate(tape, 1, 10.0, neighborhood(permuted, 3), f.edges()));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
  {
    Fixture f(BackboneVariant::MixerLite);
    nn::Tape tape;
    const auto a = nn::val(f.bb.aggregate(tape, 1, 10.0, neighborhood(kRecs, 3), f.edges()));
    const auto b = nn::val(f.bb.aggregate(tape, 1, 10.0, neighborhood(permuted, 3), f.edges()));
    EXPECT_NE(a.data, b.data);
  }
}

TEST(Backbone, MixerChecksSlotCount) {
  Fixture f(BackboneVariant::MixerLite);
  nn::Tape tape;
  EXPECT_THROW(f.bb.aggregate(tape, 1, 10.0, neighborhood(kRecs, 4), f.edges()), Error);
}

TEST(Backbone, WithoutTimeEncodingOnlyIdentityMatters) {
  Fixture f(BackboneVariant::AttnLite, 0, 3, false);
  nn::Tape tape;
  auto shifted = kRecs;
  for (auto& r : shifted) r.t -= 0.5;
  const auto a = nn::val(f.bb.aggregate(tape, 1, 10.0, neighborhood(kRecs, 3), f.edges()));
  const auto b = nn::val(f.bb.aggregate(tape, 1, 50.0, neighborhood(shifted, 3), f.edges()));
  EXPECT_EQ(a.data, b.data);
}

TEST(Merge, ZeroWeightsGiveOneHalf) {
  Fixture f(BackboneVariant::AttnLite);
  for (const auto& layer : f.bb.merge_mlp().layers) layer.zero();
  nn::Tape tape;
  const auto z = tape.constant(nn::Tensor(1, 6, 0.3));
  EXPECT_EQ(nn::val(f.bb.merge_predict(tape, z, z)).item(), 0.5);
}

TEST(Merge, ClampedAndAsymmetric) {
  Fixture f(BackboneVariant::AttnLite);
  nn::Tape tape;
  Rng rng(2);
  nn::Tensor a(1, 6), b(1, 6);
  for (auto& v : a.data) v = rng.normal();
  for (auto& v : b.data) v = rng.normal();
  const auto ab = nn::val(f.bb.merge_predict(tape, tape.constant(a), tape.constant(b))).item();
  const auto ba = nn::val(f.bb.merge_predict(tape, tape.constant(b), tape.constant(a))).item();
  EXPECT_NE(ab, ba);
  f.bb.merge_mlp().layers.back().bias->value.fill(1e3);
  const auto saturated = nn::val(f.bb.merge_predict(tape, tape.constant(a), tape.constant(b))).item();
  EXPECT_EQ(saturated, 1.0 - nn::kProbEps);
}

TEST(Backbone, AggregateIsDeterministic) {
  Fixture a(BackboneVariant::MixerLite), b(BackboneVariant::MixerLite);
  nn::Tape ta, tb;
  EXPECT_EQ(nn::val(a.bb.aggregate(ta, 2, 9.0, neighborhood({kRecs[0], kRecs[2]}, 3), a.edges())).data,
            nn::val(b.bb.aggregate(tb, 2, 9.0, neighborhood({kRecs[0], kRecs[2]}, 3), b.edges())).data);
}

TEST(Backbone, PipelineGradientsMatchFiniteDifferences) {
  for (const auto variant : {BackboneVariant::AttnLite, BackboneVariant::MixerLite}) {
    Fixture f(variant);
    const auto s_i = neighborhood({kRecs[0], kRecs[1]}, 3);
    const auto s_j = neighborhood(kRecs, 3);
    const auto r = nn::grad_check(
        [&](nn::Tape& tape) {
          const auto z_i = f.bb.aggregate(tape, 1, 10.0, s_i, f.edges());
          const auto z_j = f.bb.aggregate(tape, 2, 10.0, s_j, f.edges());
          const double y = 1.0;
          return nn::bce_loss(f.bb.merge_predict(tape, z_i, z_j), std::span<const double>(&y, 1));
        },
        f.store, 1e-5, 7);
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(variant) << " " << r.worst_param;
  }
}

TEST(Backbone, ParseNames) {
  EXPECT_EQ(parse_backbone("mixer_lite"), BackboneVariant::MixerLite);
  EXPECT_EQ(parse_backbone(to_string(BackboneVariant::AttnLite)), BackboneVariant::AttnLite);
  EXPECT_THROW(parse_backbone("tgn"), Error);
}
